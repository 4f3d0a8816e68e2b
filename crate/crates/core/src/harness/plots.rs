//! Plot-ready CSV bundles derived from training logs.
//!
//! For every `*.train.csv` log in a directory, writes into `<dir>/plots/`:
//! `<stem>_reward.csv`, `<stem>_loss.csv`, `<stem>_steps.csv` and
//! `<stem>_impact.csv`, each with columns `episode,mean,std` (window-20
//! centered moving average). PPO logs also get `<stem>_actor_loss.csv` and
//! `<stem>_critic_loss.csv`. Cross-agent comparisons go to
//! `comparison_reward.csv` and `comparison_steps.csv` with columns
//! `agent,seed_log,episode,mean,std`. The wave panels are `wave.csv`
//! (`t,z_w`) and `spectrum.csv` (`f,S`).

use std::fs;
use std::path::{Path, PathBuf};

use crate::wave::{sample_spectrum, synthesize_wave};

use super::config::RunConfig;
use super::record::{read_train_log, TrainLog, TrainRecord};
use super::stats::{moving_average, Smoothed};
use super::HarnessError;

pub const PLOT_WINDOW: usize = 20;
pub const TRAIN_LOG_SUFFIX: &str = ".train.csv";

/// Training logs found directly inside `dir`, sorted by file name.
pub fn find_train_logs(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut logs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(TRAIN_LOG_SUFFIX))
        })
        .collect();
    logs.sort();
    Ok(logs)
}

fn curve_csv(points: &[(usize, Smoothed)]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["episode", "mean", "std"])?;
    for (ep, s) in points {
        w.write_record([ep.to_string(), s.mean.to_string(), s.std.to_string()])?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

/// Smoothed curve of `pick` over the episodes where it is defined.
fn smoothed(
    records: &[TrainRecord],
    pick: impl Fn(&TrainRecord) -> Option<f64>,
) -> Vec<(usize, Smoothed)> {
    let (episodes, values): (Vec<usize>, Vec<f64>) = records
        .iter()
        .filter_map(|r| pick(r).map(|v| (r.episode, v)))
        .unzip();
    episodes
        .into_iter()
        .zip(moving_average(&values, PLOT_WINDOW))
        .collect()
}

/// Files written by [`export_plots`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotBundle {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Reads every training log in `dir` and writes plot CSVs into `dir/plots`.
/// Fails without writing anything if there are no logs or a log is invalid.
pub fn export_plots(dir: &Path) -> Result<PlotBundle, HarnessError> {
    let paths = find_train_logs(dir)?;
    if paths.is_empty() {
        return Err(HarnessError::NoLogs(dir.to_path_buf()));
    }
    let mut logs: Vec<(String, TrainLog)> = Vec::new();
    for p in &paths {
        let log = read_train_log(fs::File::open(p)?).map_err(|e| HarnessError::Log {
            path: p.clone(),
            source: Box::new(e),
        })?;
        let name = p.file_name().unwrap().to_string_lossy();
        let stem = name.trim_end_matches(TRAIN_LOG_SUFFIX).to_string();
        logs.push((stem, log));
    }

    let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();
    let mut cmp_reward = csv::Writer::from_writer(Vec::new());
    let mut cmp_steps = csv::Writer::from_writer(Vec::new());
    for w in [&mut cmp_reward, &mut cmp_steps] {
        w.write_record(["agent", "seed_log", "episode", "mean", "std"])?;
    }
    for (stem, log) in &logs {
        let rec = &log.records;
        let reward = smoothed(rec, |r| Some(r.total_reward));
        let steps = smoothed(rec, |r| Some(r.steps as f64));
        outputs.push((format!("{stem}_reward.csv"), curve_csv(&reward)?));
        outputs.push((
            format!("{stem}_loss.csv"),
            curve_csv(&smoothed(rec, |r| r.mean_loss))?,
        ));
        outputs.push((format!("{stem}_steps.csv"), curve_csv(&steps)?));
        outputs.push((
            format!("{stem}_impact.csv"),
            curve_csv(&smoothed(rec, |r| r.impact_velocity))?,
        ));
        if rec.iter().any(|r| r.actor_loss.is_some()) {
            outputs.push((
                format!("{stem}_actor_loss.csv"),
                curve_csv(&smoothed(rec, |r| r.actor_loss))?,
            ));
            outputs.push((
                format!("{stem}_critic_loss.csv"),
                curve_csv(&smoothed(rec, |r| r.critic_loss))?,
            ));
        }
        for (w, curve) in [(&mut cmp_reward, &reward), (&mut cmp_steps, &steps)] {
            for (ep, s) in curve {
                w.write_record([
                    log.agent.clone(),
                    stem.clone(),
                    ep.to_string(),
                    s.mean.to_string(),
                    s.std.to_string(),
                ])?;
            }
        }
    }
    let finish =
        |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| HarnessError::Io(e.into_error()));
    outputs.push(("comparison_reward.csv".into(), finish(cmp_reward)?));
    outputs.push(("comparison_steps.csv".into(), finish(cmp_steps)?));

    // Wave panels from the first run's effective configuration, if present.
    let first_stem = &logs[0].0;
    let config_path = dir.join(format!("{first_stem}.toml"));
    let config = if config_path.is_file() {
        RunConfig::from_toml_str(&fs::read_to_string(&config_path)?)
            .map_err(|e| HarnessError::ConfigParse(e.to_string()))?
    } else {
        RunConfig::default()
    };
    let seed = config.seeds.first().copied().unwrap_or(1);
    let (wave_csv, spectrum_csv) = wave_panels(&config, seed, config.env.horizon())?;
    outputs.push(("wave.csv".into(), wave_csv));
    outputs.push(("spectrum.csv".into(), spectrum_csv));

    let out_dir = dir.join("plots");
    fs::create_dir_all(&out_dir)?;
    let mut files = Vec::new();
    for (name, bytes) in outputs {
        let path = out_dir.join(name);
        super::run::write_atomic(&path, &bytes)?;
        files.push(path);
    }
    Ok(PlotBundle { out_dir, files })
}

/// `(t, z_w)` and `(f, S)` CSV bodies for one synthesized realization.
pub fn wave_panels(
    config: &RunConfig,
    seed: u64,
    duration: f64,
) -> Result<(Vec<u8>, Vec<u8>), HarnessError> {
    let env = &config.env;
    let wave = synthesize_wave(&env.wave, &env.grid, duration, env.dt, seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "z_w"])?;
    for (k, z) in wave.z_w.iter().enumerate() {
        w.write_record([wave.time(k).to_string(), z.to_string()])?;
    }
    let wave_csv = w
        .into_inner()
        .map_err(|e| HarnessError::Io(e.into_error()))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["f", "S"])?;
    for (f, s) in sample_spectrum(&env.wave, &env.grid)? {
        w.write_record([f.to_string(), s.to_string()])?;
    }
    let spectrum_csv = w
        .into_inner()
        .map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok((wave_csv, spectrum_csv))
}

/// Writes `wave.csv` and `spectrum.csv` for one realization into `out_dir`.
pub fn write_wave_panels(
    config: &RunConfig,
    seed: u64,
    duration: f64,
    out_dir: &Path,
) -> Result<[PathBuf; 2], HarnessError> {
    let (wave_csv, spectrum_csv) = wave_panels(config, seed, duration)?;
    fs::create_dir_all(out_dir)?;
    let paths = [out_dir.join("wave.csv"), out_dir.join("spectrum.csv")];
    super::run::write_atomic(&paths[0], &wave_csv)?;
    super::run::write_atomic(&paths[1], &spectrum_csv)?;
    Ok(paths)
}
