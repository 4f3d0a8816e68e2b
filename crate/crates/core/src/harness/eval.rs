//! Frozen-policy evaluation: impact velocity, time to land, inference time.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::RngCore;

use crate::env::{
    Action, ActionMode, EnvConfig, EnvError, EnvState, LandingEnv, Termination, DISCRETE_ACTIONS,
};
use crate::nn::{HeadKind, MlpNetwork};
use crate::ppo::MeanPolicy;
use crate::seeded_streams;
use crate::value::GreedyPolicy;

use super::config::{FieldProblem, RunConfig};
use super::run::load_network;
use super::stats::median;
use super::{HarnessError, Policy};

/// Always requests the hover control `U0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoverPolicy;

impl Policy for HoverPolicy {
    fn act(&self, _: &EnvState) -> Action {
        Action::Discrete(1)
    }

    fn mode(&self) -> ActionMode {
        ActionMode::Discrete
    }
}

/// Requests the same continuous control every step.
#[derive(Debug, Clone, Copy)]
pub struct ConstantControl(pub f64);

impl Policy for ConstantControl {
    fn act(&self, _: &EnvState) -> Action {
        Action::Continuous(self.0)
    }

    fn mode(&self) -> ActionMode {
        ActionMode::Continuous
    }
}

/// Wraps a trained network: Gaussian heads act at the mean, Q heads greedily.
/// The network must take the 2-feature observation and emit one output per
/// discrete action (Q heads) or one mean (Gaussian head).
pub fn policy_from_network(
    net: MlpNetwork,
    env: &EnvConfig,
) -> Result<Box<dyn Policy>, HarnessError> {
    let expected_units = match net.head_kind() {
        HeadKind::Gaussian => 1,
        _ => DISCRETE_ACTIONS,
    };
    if net.input_dim() != 2 || net.output_units() != expected_units {
        return Err(HarnessError::IncompatibleNetwork(format!(
            "{} head with layers {:?}; expected 2 inputs and {expected_units} output(s)",
            net.head_kind().name(),
            net.layer_sizes()
        )));
    }
    Ok(match net.head_kind() {
        HeadKind::Gaussian => Box::new(MeanPolicy {
            actor: net,
            observation: env.observation,
        }),
        _ => Box::new(GreedyPolicy {
            network: net,
            observation: env.observation,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub episodes: usize,
    pub seed: u64,
    /// Landings faster than this (m/s) do not count as successes.
    pub success_velocity: f64,
    /// Single-state forward passes timed for the inference estimate.
    pub timing_samples: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            episodes: 50,
            seed: 1_000_003,
            success_velocity: 2.5,
            timing_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub episode: usize,
    pub steps: usize,
    pub landed: bool,
    pub success: bool,
    pub time_to_land: Option<f64>,
    pub impact_velocity: Option<f64>,
    pub total_reward: f64,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean over landed episodes; `None` if nothing landed.
    pub mean_impact_velocity: Option<f64>,
    pub mean_time_to_land: Option<f64>,
    /// Median single-state policy evaluation time in milliseconds.
    pub median_inference_ms: f64,
    pub success_rate: f64,
    pub landing_rate: f64,
    pub episodes: Vec<EvalEpisode>,
}

impl EvalReport {
    /// Per-episode CSV. Timing is left out so the file is reproducible.
    pub fn write_episodes_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "episode",
            "steps",
            "landed",
            "success",
            "time_to_land",
            "impact_velocity",
            "total_reward",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.episodes {
            w.write_record([
                e.episode.to_string(),
                e.steps.to_string(),
                (e.landed as u8).to_string(),
                (e.success as u8).to_string(),
                opt(e.time_to_land),
                opt(e.impact_velocity),
                e.total_reward.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `settings.episodes` fresh-wave episodes with a frozen policy.
pub fn evaluate_policy(
    policy: &dyn Policy,
    env_config: &EnvConfig,
    settings: &EvalSettings,
) -> Result<EvalReport, HarnessError> {
    let env_config = env_config.clone().with_mode(policy.mode());
    let dt = env_config.dt;
    let mut env = LandingEnv::new(env_config)?;
    let [_, _, mut wave_rng] = seeded_streams(settings.seed);
    let mut episodes = Vec::with_capacity(settings.episodes);

    for episode in 0..settings.episodes {
        let mut state = env.reset(wave_rng.next_u64())?;
        let mut ep = EvalEpisode {
            episode,
            steps: 0,
            landed: false,
            success: false,
            time_to_land: None,
            impact_velocity: None,
            total_reward: 0.0,
            termination: None,
        };
        loop {
            let out = match env.step(policy.act(&state)) {
                Ok(out) => out,
                Err(EnvError::NumericalFault { .. }) => break,
                Err(e) => return Err(e.into()),
            };
            ep.steps += 1;
            ep.total_reward += out.reward;
            state = out.state;
            if out.done {
                ep.termination = out.info.termination;
                if ep.termination == Some(Termination::Contact) {
                    ep.landed = true;
                    ep.time_to_land = Some(ep.steps as f64 * dt);
                    ep.impact_velocity = out.info.impact_velocity;
                    ep.success = out
                        .info
                        .impact_velocity
                        .is_some_and(|v| v < settings.success_velocity);
                }
                break;
            }
        }
        episodes.push(ep);
    }

    let landed: Vec<&EvalEpisode> = episodes.iter().filter(|e| e.landed).collect();
    let mean_of = |f: fn(&EvalEpisode) -> Option<f64>| {
        let v: Vec<f64> = landed.iter().filter_map(|e| f(e)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let n = episodes.len().max(1) as f64;
    Ok(EvalReport {
        mean_impact_velocity: mean_of(|e| e.impact_velocity),
        mean_time_to_land: mean_of(|e| e.time_to_land),
        median_inference_ms: median_inference_ms(policy, settings.timing_samples),
        success_rate: episodes.iter().filter(|e| e.success).count() as f64 / n,
        landing_rate: landed.len() as f64 / n,
        episodes,
    })
}

/// Loads a weight file and evaluates it under `config`'s environment and
/// evaluation settings.
pub fn evaluate(
    weights: &Path,
    config: &RunConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, HarnessError> {
    let settings = EvalSettings {
        episodes,
        seed,
        ..config.eval.settings()
    };
    if episodes == 0 {
        return Err(HarnessError::InvalidConfig(vec![FieldProblem {
            field: "eval.episodes".into(),
            reason: "must be >= 1".into(),
        }]));
    }
    let policy = policy_from_network(load_network(weights)?, &config.env)?;
    evaluate_policy(policy.as_ref(), &config.env, &settings)
}

/// Median wall-clock time of `samples` single-state policy evaluations.
pub fn median_inference_ms(policy: &dyn Policy, samples: usize) -> f64 {
    let state = EnvState::new(2.5, -0.5);
    let times: Vec<f64> = (0..samples)
        .map(|_| {
            let start = Instant::now();
            black_box(policy.act(black_box(&state)));
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    median(&times).unwrap_or(0.0)
}
