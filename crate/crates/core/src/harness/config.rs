//! Run configuration file (TOML). Every key is optional; omitted keys take
//! the defaults below.
//!
//! ```toml
//! agent = "ppo"            # dqn | double | dueling | ppo
//! episodes = 500
//! seeds = [1]
//! out_dir = "runs"
//!
//! [env]                    # dt, max_steps, height_clamp, velocity_clamp
//! [env.uav]                # mass, drag_z, gravity, hover_height
//! [env.reward]             # k1, k2, v_max, h_c, v_td
//! [env.action]             # delta_u, u_min, u_max
//! [env.wave]               # alpha_w, k_w, f_p, gamma_w, sigma_low, sigma_high, g
//! [env.grid]               # f_min, f_max, n_bins
//! [env.observation]        # height, velocity (feature scaling)
//! [dqn]                    # lr, batch_size, discount, capacity, sync_freq, ...
//! [ppo]                    # lr_actor, lr_critic, discount, gae_lambda, clip, ...
//! [eval]                   # episodes, seed, success_velocity, timing_samples
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::ppo::PpoConfig;
use crate::value::{DqnConfig, DqnVariant};

use super::eval::EvalSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Value(DqnVariant),
    Ppo,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Value(DqnVariant::Dqn),
        AgentKind::Value(DqnVariant::Double),
        AgentKind::Value(DqnVariant::Dueling),
        AgentKind::Ppo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Value(v) => v.name(),
            AgentKind::Ppo => "ppo",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentKind::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown agent `{s}` (expected dqn, double, dueling or ppo)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
    pub success_velocity: f64,
    pub timing_samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let d = EvalSettings::default();
        Self {
            episodes: d.episodes,
            seed: d.seed,
            success_velocity: d.success_velocity,
            timing_samples: d.timing_samples,
        }
    }
}

impl EvalConfig {
    pub fn settings(&self) -> EvalSettings {
        EvalSettings {
            episodes: self.episodes,
            seed: self.seed,
            success_velocity: self.success_velocity,
            timing_samples: self.timing_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub agent: String,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            agent: "ppo".into(),
            episodes: 500,
            seeds: vec![1],
            out_dir: PathBuf::from("runs"),
            env: EnvConfig::default(),
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// A configuration field that failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProblem {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for FieldProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// The effective configuration with every default spelled out.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    pub fn agent_kind(&self) -> Result<AgentKind, FieldProblem> {
        self.agent.parse().map_err(|reason| FieldProblem {
            field: "agent".into(),
            reason,
        })
    }

    pub fn dqn_config(&self, variant: DqnVariant) -> DqnConfig {
        self.dqn.clone().with_variant(variant)
    }

    /// Every offending field; empty when the configuration is usable.
    pub fn problems(&self) -> Vec<FieldProblem> {
        let mut out = Vec::new();
        let mut push = |field: String, reason: String| out.push(FieldProblem { field, reason });
        if let Err(p) = self.agent_kind() {
            push(p.field, p.reason);
        }
        if self.episodes == 0 {
            push("episodes".into(), "must be >= 1".into());
        }
        if self.seeds.is_empty() {
            push("seeds".into(), "at least one seed is required".into());
        }
        let distinct: HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            push("seeds".into(), "seeds must be distinct".into());
        }
        if let Err(e) = self.env.validate() {
            let field = match &e {
                crate::env::EnvError::InvalidParameter { field, .. } => format!("env.{field}"),
                crate::env::EnvError::Wave(crate::wave::WaveError::InvalidParameter {
                    field,
                    ..
                }) => format!("env.wave.{field}"),
                _ => "env".into(),
            };
            push(field, e.to_string());
        }
        for (f, r) in self.dqn.problems() {
            push(format!("dqn.{f}"), r);
        }
        for (f, r) in self.ppo.problems() {
            push(format!("ppo.{f}"), r);
        }
        if self.eval.episodes == 0 {
            push("eval.episodes".into(), "must be >= 1".into());
        }
        if !(self.eval.success_velocity > 0.0) {
            push("eval.success_velocity".into(), "must be > 0".into());
        }
        out
    }
}
