//! Offshore VTOL landing simulator and from-scratch deep RL agents.
//!
//! - [`wave`]: JONSWAP spectrum and random-phase platform heave synthesis.
//! - [`env`]: vertical landing dynamics, action spaces, reward and termination.
//! - [`nn`]: dense tanh networks with analytic gradients, SGD and soft updates.
//! - [`value`]: DQN, Double DQN and Dueling DQN with replay and target networks.
//! - [`ppo`]: clipped-surrogate PPO with a Gaussian actor and GAE.
//! - [`harness`]: configuration, training/evaluation runs, logs and plot data.

pub mod env;
pub mod harness;
pub mod nn;
pub mod ppo;
pub mod value;
pub mod wave;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent configuration: {}", format_problems(.0))]
    InvalidConfig(Vec<(String, String)>),
    #[error("parameters became non-finite in episode {episode}")]
    Diverged { episode: usize },
    #[error(transparent)]
    Env(#[from] env::EnvError),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
}

fn format_problems(problems: &[(String, String)]) -> String {
    problems
        .iter()
        .map(|(f, r)| format!("{f}: {r}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Independent generators for network initialization, action/minibatch
/// sampling and per-episode wave seeds, all derived from one run seed.
pub(crate) fn seeded_streams(seed: u64) -> [ChaCha8Rng; 3] {
    [1, 2, 3].map(|stream| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    })
}
