//! Configuration, orchestration, evaluation and reporting.

pub mod config;
pub mod eval;
pub mod plots;
pub mod record;
pub mod run;
pub mod stats;

use std::path::PathBuf;

use thiserror::Error;

use crate::env::{Action, ActionMode, EnvError, EnvState};
use crate::nn::ParseError;
use crate::wave::WaveError;
use crate::AgentError;

pub use config::{AgentKind, FieldProblem, RunConfig};
pub use eval::{evaluate, evaluate_policy, policy_from_network, EvalReport, EvalSettings};
pub use plots::{export_plots, write_wave_panels};
pub use record::{read_train_log, write_train_log, TrainLog, TrainRecord};
pub use run::{load_network, run_training, RunOutput};
pub use stats::{moving_average, Smoothed};

/// A frozen decision rule that can be evaluated in the environment.
pub trait Policy {
    fn act(&self, state: &EnvState) -> Action;
    fn mode(&self) -> ActionMode;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn act(&self, state: &EnvState) -> Action {
        (**self).act(state)
    }

    fn mode(&self) -> ActionMode {
        (**self).mode()
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n{}", .0.iter().map(|p| format!("  {p}")).collect::<Vec<_>>().join("\n"))]
    InvalidConfig(Vec<FieldProblem>),
    #[error("cannot parse configuration: {0}")]
    ConfigParse(String),
    #[error("log is missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: bad value `{value}` in column `{column}`")]
    BadField {
        line: usize,
        column: String,
        value: String,
    },
    #[error("{path}: {source}")]
    Log {
        path: PathBuf,
        source: Box<HarnessError>,
    },
    #[error("no training logs (*.train.csv) in {0}")]
    NoLogs(PathBuf),
    #[error("network does not fit the landing task: {0}")]
    IncompatibleNetwork(String),
    #[error("{path}: {source}")]
    Weights { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
