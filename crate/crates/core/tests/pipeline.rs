use std::fs;

use deckland::harness::{
    evaluate_policy, export_plots, load_network, policy_from_network, read_train_log, run_training,
    EvalSettings, HarnessError, RunConfig,
};

fn quick_config(agent: &str, dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.agent = agent.into();
    cfg.episodes = 3;
    cfg.seeds = vec![5, 6];
    cfg.out_dir = dir.to_path_buf();
    cfg.env.max_steps = 150;
    cfg.dqn.warm_start = 64;
    cfg
}

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn training_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config("ppo", dir.path());
    let mut seen = Vec::new();
    let outs = run_training(&cfg, |seed, r| seen.push((seed, r.episode))).unwrap();
    assert_eq!(outs.len(), 2);
    assert_eq!(seen, vec![(5, 0), (5, 1), (5, 2), (6, 0), (6, 1), (6, 2)]);

    let names: Vec<String> = read_all(dir.path()).into_iter().map(|(n, _)| n).collect();
    assert_eq!(
        names,
        [
            "ppo_seed5.critic.weights",
            "ppo_seed5.toml",
            "ppo_seed5.train.csv",
            "ppo_seed5.weights",
            "ppo_seed6.critic.weights",
            "ppo_seed6.toml",
            "ppo_seed6.train.csv",
            "ppo_seed6.weights",
        ]
    );

    let out = &outs[0];
    assert_eq!(load_network(&out.artifacts.weights).unwrap(), out.network);
    let log = read_train_log(fs::File::open(&out.artifacts.log).unwrap()).unwrap();
    assert_eq!(log.agent, "ppo");
    assert_eq!(log.records, out.records);
    let effective =
        RunConfig::from_toml_str(&fs::read_to_string(&out.artifacts.config).unwrap()).unwrap();
    assert_eq!(effective.seeds, vec![5]);
    assert_eq!(effective.env, cfg.env);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for agent in ["dqn", "double", "dueling", "ppo"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_training(&quick_config(agent, a.path()), |_, _| {}).unwrap();
        let mut cfg_b = quick_config(agent, b.path());
        cfg_b.out_dir = b.path().to_path_buf();
        run_training(&cfg_b, |_, _| {}).unwrap();
        let (fa, fb) = (read_all(a.path()), read_all(b.path()));
        assert_eq!(fa.len(), fb.len());
        for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
            assert_eq!(na, nb);
            if na.ends_with(".toml") {
                continue;
            }
            assert!(ba == bb, "{agent}: {na} differs");
        }
    }
}

#[test]
fn invalid_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = quick_config("ppo", &out);
    cfg.ppo.clip = -1.0;
    cfg.episodes = 0;
    match run_training(&cfg, |_, _| {}) {
        Err(HarnessError::InvalidConfig(problems)) => {
            let fields: Vec<&str> = problems.iter().map(|p| p.field.as_str()).collect();
            assert_eq!(fields, ["episodes", "ppo.clip"]);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(!out.exists());
}

#[test]
fn corrupt_weights_are_reported_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let outs = run_training(&quick_config("dqn", dir.path()), |_, _| {}).unwrap();
    let path = &outs[0].artifacts.weights;
    let bytes = fs::read(path).unwrap();
    fs::write(path, &bytes[..bytes.len() - 3]).unwrap();
    match load_network(path) {
        Err(HarnessError::Weights { path: p, .. }) => assert_eq!(&p, path),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn evaluation_of_loaded_policy_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config("dueling", dir.path());
    let outs = run_training(&cfg, |_, _| {}).unwrap();
    let settings = EvalSettings {
        episodes: 4,
        timing_samples: 50,
        ..EvalSettings::default()
    };
    let mut csvs = Vec::new();
    for _ in 0..2 {
        let net = load_network(&outs[0].artifacts.weights).unwrap();
        let policy = policy_from_network(net, &cfg.env).unwrap();
        let report = evaluate_policy(policy.as_ref(), &cfg.env, &settings).unwrap();
        assert_eq!(report.episodes.len(), 4);
        assert!(report.median_inference_ms < 1.0);
        let mut buf = Vec::new();
        report.write_episodes_csv(&mut buf).unwrap();
        csvs.push(buf);
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn plots_need_at_least_one_log() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        export_plots(dir.path()),
        Err(HarnessError::NoLogs(_))
    ));
    assert!(!dir.path().join("plots").exists());
}

#[test]
fn bad_log_aborts_plot_export() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("x.train.csv"),
        "episode,total_reward\n0,1\n",
    )
    .unwrap();
    assert!(export_plots(dir.path()).is_err());
    assert!(!dir.path().join("plots").exists());
}

#[test]
fn plots_cover_every_log() {
    let dir = tempfile::tempdir().unwrap();
    run_training(&quick_config("ppo", dir.path()), |_, _| {}).unwrap();
    let mut cfg = quick_config("dqn", dir.path());
    cfg.seeds = vec![5];
    run_training(&cfg, |_, _| {}).unwrap();

    let bundle = export_plots(dir.path()).unwrap();
    let mut names: Vec<String> = bundle
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for stem in ["dqn_seed5", "ppo_seed5", "ppo_seed6"] {
        for kind in ["reward", "loss", "steps", "impact"] {
            assert!(
                names.contains(&format!("{stem}_{kind}.csv")),
                "{stem}_{kind}"
            );
        }
    }
    assert!(names.contains(&"ppo_seed5_actor_loss.csv".to_string()));
    assert!(!names.contains(&"dqn_seed5_actor_loss.csv".to_string()));
    for shared in [
        "comparison_reward.csv",
        "comparison_steps.csv",
        "wave.csv",
        "spectrum.csv",
    ] {
        assert!(names.contains(&shared.to_string()), "{shared}");
    }

    let reward = fs::read_to_string(bundle.out_dir.join("ppo_seed5_reward.csv")).unwrap();
    let mut lines = reward.lines();
    assert_eq!(lines.next(), Some("episode,mean,std"));
    assert_eq!(lines.count(), 3);
    let cmp = fs::read_to_string(bundle.out_dir.join("comparison_reward.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 1 + 3 * 3);
    let spectrum = fs::read_to_string(bundle.out_dir.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().next(), Some("f,S"));
    assert_eq!(spectrum.lines().count(), 1 + 256);
}

#[test]
fn single_episode_run_logs_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_config("dqn", dir.path());
    cfg.episodes = 1;
    cfg.seeds = vec![9];
    let outs = run_training(&cfg, |_, _| {}).unwrap();
    let log = read_train_log(fs::File::open(&outs[0].artifacts.log).unwrap()).unwrap();
    assert_eq!(log.records.len(), 1);
    let text = fs::read_to_string(&outs[0].artifacts.log).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(load_network(&outs[0].artifacts.weights).is_ok());
}

#[test]
fn saved_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let outs = run_training(&quick_config("double", first.path()), |_, _| {}).unwrap();
    let saved = fs::read_to_string(&outs[0].artifacts.config).unwrap();
    let mut cfg = RunConfig::from_toml_str(&saved).unwrap();
    let second = tempfile::tempdir().unwrap();
    cfg.out_dir = second.path().to_path_buf();
    let again = run_training(&cfg, |_, _| {}).unwrap();
    assert_eq!(again.len(), 1);
    assert_eq!(again[0].records, outs[0].records);
    assert_eq!(
        fs::read(&again[0].artifacts.weights).unwrap(),
        fs::read(&outs[0].artifacts.weights).unwrap()
    );
}

#[test]
fn evaluation_leaves_weights_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config("ppo", dir.path());
    let outs = run_training(&cfg, |_, _| {}).unwrap();
    let path = &outs[0].artifacts.weights;
    let before = fs::read(path).unwrap();
    let first = deckland::harness::evaluate(path, &cfg, 3, 17).unwrap();
    assert_eq!(fs::read(path).unwrap(), before);
    let second = deckland::harness::evaluate(path, &cfg, 3, 17).unwrap();
    assert_eq!(first.episodes, second.episodes);
}
