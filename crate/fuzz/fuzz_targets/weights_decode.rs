#![no_main]

use deckland::nn::MlpNetwork;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = MlpNetwork::from_bytes(data) {
        // Anything accepted must re-encode to the same bytes and run.
        assert_eq!(net.to_bytes(), data);
        let x = vec![0.25; net.input_dim()];
        let _ = net.forward(&x);
    }
});
