#![no_main]

use deckland::harness::{read_train_log, write_train_log};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(log) = read_train_log(data) {
        let mut out = Vec::new();
        write_train_log(&mut out, &log.agent, &log.records).unwrap();
        let again = read_train_log(out.as_slice()).expect("written log reads back");
        assert_eq!(again.records.len(), log.records.len());
    }
});
