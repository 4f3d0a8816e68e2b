//! Training campaigns and on-disk outputs.
//!
//! A run for agent `A` and seed `S` writes into the output directory:
//!
//! - `A_seedS.train.csv`: per-episode log (see [`super::record`])
//! - `A_seedS.weights`: prediction network (value agents) or actor (PPO)
//! - `A_seedS.critic.weights`: PPO critic
//! - `A_seedS.toml`: effective configuration with defaults filled in
//!
//! Files are written to a temporary name and renamed into place, so a weight
//! file that exists always decodes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::nn::MlpNetwork;
use crate::{ppo, value};

use super::config::{AgentKind, RunConfig};
use super::record::{write_train_log, TrainRecord};
use super::HarnessError;

/// Paths produced by one seed's run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub agent: AgentKind,
    pub seed: u64,
    pub log: PathBuf,
    pub weights: PathBuf,
    pub critic_weights: Option<PathBuf>,
    pub config: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: RunArtifacts,
    pub records: Vec<TrainRecord>,
    pub network: MlpNetwork,
}

pub fn run_stem(agent: AgentKind, seed: u64) -> String {
    format!("{}_seed{}", agent.name(), seed)
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let file_name = path.file_name().ok_or_else(|| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name")
    })?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Trains one seed and returns its records and final network without
/// touching the filesystem.
pub fn train_seed(
    config: &RunConfig,
    seed: u64,
    on_episode: impl FnMut(&TrainRecord),
) -> Result<(Vec<TrainRecord>, MlpNetwork, Option<MlpNetwork>), HarnessError> {
    match config
        .agent_kind()
        .map_err(|p| HarnessError::InvalidConfig(vec![p]))?
    {
        AgentKind::Value(variant) => {
            let out = value::train_with(
                &config.dqn_config(variant),
                &config.env,
                config.episodes,
                seed,
                on_episode,
            )?;
            Ok((out.records, out.network, None))
        }
        AgentKind::Ppo => {
            let out = ppo::train_with(&config.ppo, &config.env, config.episodes, seed, on_episode)?;
            Ok((out.records, out.actor, Some(out.critic)))
        }
    }
}

/// Validates `config`, trains every seed in turn and writes each run's
/// outputs. On a write failure the files of the failing run are removed.
pub fn run_training(
    config: &RunConfig,
    mut on_episode: impl FnMut(u64, &TrainRecord),
) -> Result<Vec<RunOutput>, HarnessError> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(HarnessError::InvalidConfig(problems));
    }
    let agent = config
        .agent_kind()
        .map_err(|p| HarnessError::InvalidConfig(vec![p]))?;
    fs::create_dir_all(&config.out_dir)?;

    let mut outputs = Vec::new();
    for &seed in &config.seeds {
        let (records, network, critic) = train_seed(config, seed, |r| on_episode(seed, r))?;

        let stem = run_stem(agent, seed);
        let dir = &config.out_dir;
        let artifacts = RunArtifacts {
            agent,
            seed,
            log: dir.join(format!("{stem}.train.csv")),
            weights: dir.join(format!("{stem}.weights")),
            critic_weights: critic
                .as_ref()
                .map(|_| dir.join(format!("{stem}.critic.weights"))),
            config: dir.join(format!("{stem}.toml")),
        };

        let mut effective = config.clone();
        effective.seeds = vec![seed];
        let mut log = Vec::new();
        write_train_log(&mut log, agent.name(), &records)?;

        let mut files: Vec<(&Path, Vec<u8>)> = vec![
            (&artifacts.log, log),
            (&artifacts.weights, network.to_bytes()),
            (&artifacts.config, effective.to_toml_string().into_bytes()),
        ];
        if let (Some(path), Some(critic)) = (&artifacts.critic_weights, &critic) {
            files.push((path, critic.to_bytes()));
        }
        let mut written: Vec<&Path> = Vec::new();
        for (path, bytes) in &files {
            if let Err(e) = write_atomic(path, bytes) {
                for p in written {
                    let _ = fs::remove_file(p);
                }
                return Err(e.into());
            }
            written.push(path);
        }

        outputs.push(RunOutput {
            artifacts,
            records,
            network,
        });
    }
    Ok(outputs)
}

pub fn load_network(path: &Path) -> Result<MlpNetwork, HarnessError> {
    let bytes = fs::read(path)?;
    MlpNetwork::from_bytes(&bytes).map_err(|e| HarnessError::Weights {
        path: path.to_path_buf(),
        source: e,
    })
}
