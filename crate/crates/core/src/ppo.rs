//! Proximal Policy Optimization with a Gaussian actor, a value critic and
//! generalized advantage estimation.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionMode, EnvConfig, EnvError, EnvState, LandingEnv, ObservationScale};
use crate::harness::{Policy, TrainRecord};
use crate::nn::{self, GradientSet, HeadSpec, MlpNetwork, NnError};
use crate::value::mean;
use crate::{seeded_streams, AgentError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    /// Likelihood-ratio clip `epsilon`.
    pub clip: f64,
    /// Environment steps between update phases.
    pub rollout_horizon: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub capacity: usize,
    pub entropy_coef: f64,
    /// Initial log standard deviation of the Gaussian policy.
    pub init_log_std: f64,
    /// Standardize advantages over each rollout before the update phase.
    pub normalize_advantages: bool,
    /// Global gradient-norm clip for both networks; `0` disables clipping.
    pub grad_clip: f64,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            discount: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            rollout_horizon: 20,
            epochs: 4,
            minibatch_size: 5,
            capacity: 10_000,
            entropy_coef: 0.0,
            init_log_std: (0.5 * 9.81f64).ln(),
            normalize_advantages: true,
            grad_clip: 0.0,
            hidden: vec![32, 32, 16],
        }
    }
}

impl PpoConfig {
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |f: &str, r: String| out.push((f.to_string(), r));
        for (name, lr) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic)] {
            if !(lr.is_finite() && lr > 0.0) {
                bad(name, format!("must be > 0, got {lr}"));
            }
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            bad(
                "discount",
                format!("must lie in (0, 1], got {}", self.discount),
            );
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            bad(
                "gae_lambda",
                format!("must lie in [0, 1], got {}", self.gae_lambda),
            );
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            bad("clip", format!("must be > 0, got {}", self.clip));
        }
        if self.rollout_horizon == 0 || self.rollout_horizon > self.capacity {
            bad(
                "rollout_horizon",
                format!("must lie in [1, capacity], got {}", self.rollout_horizon),
            );
        }
        if self.epochs == 0 {
            bad("epochs", "must be >= 1".into());
        }
        if self.minibatch_size == 0 || self.minibatch_size > self.rollout_horizon {
            bad(
                "minibatch_size",
                format!(
                    "must lie in [1, rollout_horizon], got {}",
                    self.minibatch_size
                ),
            );
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) {
            bad(
                "entropy_coef",
                format!("must be >= 0, got {}", self.entropy_coef),
            );
        }
        if !self.init_log_std.is_finite() {
            bad("init_log_std", "must be finite".into());
        }
        if !(self.grad_clip >= 0.0) {
            bad("grad_clip", format!("must be >= 0, got {}", self.grad_clip));
        }
        if self.hidden.contains(&0) {
            bad("hidden", "layer widths must be positive".into());
        }
        out
    }

    fn clip_norm(&self) -> Option<f64> {
        (self.grad_clip > 0.0).then_some(self.grad_clip)
    }

    fn sizes(&self, output: usize) -> Vec<usize> {
        let mut sizes = vec![2];
        sizes.extend(&self.hidden);
        sizes.push(output);
        sizes
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        self.sizes(1)
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        self.sizes(1)
    }
}

/// `log N(a; mean, exp(log_std)^2)`.
pub fn gaussian_log_prob(a: f64, mean: f64, log_std: f64) -> f64 {
    let z = (a - mean) * (-log_std).exp();
    -0.5 * z * z - log_std - 0.5 * (2.0 * PI).ln()
}

/// Draw from the actor's policy at one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    /// Control clamped to the actor's bounds.
    pub action: f64,
    /// Unclamped draw, the value whose density is `log_prob`.
    pub raw: f64,
    pub log_prob: f64,
}

pub fn sample_action<R: Rng + ?Sized>(
    actor: &MlpNetwork,
    features: &[f64],
    rng: &mut R,
) -> SampledAction {
    let out = actor.forward(features);
    let (mean, log_std) = (out[0], out[1]);
    let noise: f64 = rng.sample(StandardNormal);
    let raw = mean + log_std.exp() * noise;
    let (low, high) = actor
        .gaussian_bounds()
        .expect("actor needs a gaussian head");
    SampledAction {
        action: raw.clamp(low, high),
        raw,
        log_prob: gaussian_log_prob(raw, mean, log_std),
    }
}

/// Backward GAE recursion `A_k = delta_k + gamma lambda (1 - done_k) A_{k+1}`
/// with `delta_k = r_k + gamma (1 - done_k) V_{k+1} - V_k`. `bootstrap` is
/// the value after the last step (ignored when that step is terminal).
/// Returns `(advantages, value_targets)` with targets `A + V`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    discount: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(
        values.len() == n && dones.len() == n,
        "rollout sequences differ in length"
    );
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for k in (0..n).rev() {
        let live = if dones[k] { 0.0 } else { 1.0 };
        let next_value = if k + 1 < n { values[k + 1] } else { bootstrap };
        let delta = rewards[k] + discount * live * next_value - values[k];
        running = delta + discount * lambda * live * running;
        advantages[k] = running;
    }
    let targets = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, targets)
}

/// One on-policy rollout. `log_probs` are recorded under the behavior policy
/// at collection time and never recomputed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub observations: Vec<[f64; 2]>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(
        &mut self,
        obs: [f64; 2],
        raw_action: f64,
        reward: f64,
        log_prob: f64,
        value: f64,
        done: bool,
    ) {
        self.observations.push(obs);
        self.actions.push(raw_action);
        self.rewards.push(reward);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.dones.push(done);
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    /// Fills advantages and value targets.
    pub fn finish(&mut self, bootstrap: f64, discount: f64, lambda: f64) {
        let (adv, targets) = compute_gae(
            &self.rewards,
            &self.values,
            &self.dones,
            bootstrap,
            discount,
            lambda,
        );
        self.advantages = adv;
        self.value_targets = targets;
    }

    /// Rescales advantages to zero mean and unit variance.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len() as f64;
        if n < 2.0 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n;
        let var = self
            .advantages
            .iter()
            .map(|a| (a - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = var.sqrt();
        for a in &mut self.advantages {
            *a = if std > 1e-8 { (*a - mean) / std } else { 0.0 };
        }
    }
}

/// Whether the clipped term is strictly the smaller one, so the sample
/// contributes no gradient.
fn clip_saturated(ratio: f64, advantage: f64, clip: f64) -> bool {
    (advantage > 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip)
}

/// Negated clipped surrogate over `indices` of `batch`, minus an optional
/// entropy bonus, with its gradient with respect to the actor.
pub fn ppo_loss(
    actor: &MlpNetwork,
    batch: &RolloutBatch,
    indices: &[usize],
    clip: f64,
    entropy_coef: f64,
) -> Result<(f64, GradientSet), NnError> {
    let n = indices.len() as f64;
    let mut grads = actor.zero_grad();
    let mut loss = 0.0;
    for &i in indices {
        let cache = actor.forward_cached(&batch.observations[i]);
        let (mean, log_std) = (cache.output()[0], cache.output()[1]);
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let ratio = (gaussian_log_prob(a, mean, log_std) - batch.log_probs[i]).exp();
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        loss -= (ratio * adv).min(clipped * adv) / n;
        loss -= entropy_coef * (log_std + 0.5 * (2.0 * PI).ln() + 0.5) / n;

        let mut upstream = [0.0, -entropy_coef / n];
        if !clip_saturated(ratio, adv, clip) {
            let inv_var = (-2.0 * log_std).exp();
            let d_mean = (a - mean) * inv_var;
            let d_log_std = (a - mean).powi(2) * inv_var - 1.0;
            let scale = -adv * ratio / n;
            upstream[0] += scale * d_mean;
            upstream[1] += scale * d_log_std;
        }
        actor.backward_into(&cache, &upstream, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Mean squared error between critic outputs and value targets over `indices`.
pub fn critic_loss(
    critic: &MlpNetwork,
    batch: &RolloutBatch,
    indices: &[usize],
) -> Result<(f64, GradientSet), NnError> {
    let n = indices.len() as f64;
    let mut grads = critic.zero_grad();
    let mut loss = 0.0;
    for &i in indices {
        let cache = critic.forward_cached(&batch.observations[i]);
        let err = cache.output()[0] - batch.value_targets[i];
        loss += err * err / n;
        critic.backward_into(&cache, &[2.0 * err / n], &mut grads)?;
    }
    Ok((loss, grads))
}

/// Mean losses of one update phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
}

/// Runs `epochs` passes of shuffled minibatch SGD over a finished rollout.
pub fn update<R: Rng + ?Sized>(
    config: &PpoConfig,
    actor: &mut MlpNetwork,
    critic: &mut MlpNetwork,
    batch: &RolloutBatch,
    rng: &mut R,
) -> Result<UpdateStats, NnError> {
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let (mut actor_losses, mut critic_losses) = (Vec::new(), Vec::new());
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let (la, ga) = ppo_loss(actor, batch, chunk, config.clip, config.entropy_coef)?;
            nn::sgd_step(actor, &ga, config.lr_actor, config.clip_norm())?;
            let (lc, gc) = critic_loss(critic, batch, chunk)?;
            nn::sgd_step(critic, &gc, config.lr_critic, config.clip_norm())?;
            actor_losses.push(la);
            critic_losses.push(lc);
        }
    }
    Ok(UpdateStats {
        actor_loss: mean(&actor_losses).unwrap_or(0.0),
        critic_loss: mean(&critic_losses).unwrap_or(0.0),
    })
}

#[derive(Debug, Clone)]
pub struct PpoOutcome {
    pub actor: MlpNetwork,
    pub critic: MlpNetwork,
    pub records: Vec<TrainRecord>,
}

pub fn build_actor<R: Rng + ?Sized>(
    config: &PpoConfig,
    env_config: &EnvConfig,
    rng: &mut R,
) -> Result<MlpNetwork, NnError> {
    let head = HeadSpec::Gaussian {
        low: env_config.action.u_min,
        high: env_config.action.u_max,
        init_log_std: config.init_log_std,
    };
    MlpNetwork::new(&config.actor_sizes(), head, rng)
}

pub fn train(
    config: &PpoConfig,
    env_config: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<PpoOutcome, AgentError> {
    train_with(config, env_config, episodes, seed, |_| {})
}

pub fn train_with(
    config: &PpoConfig,
    env_config: &EnvConfig,
    episodes: usize,
    seed: u64,
    mut on_episode: impl FnMut(&TrainRecord),
) -> Result<PpoOutcome, AgentError> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(AgentError::InvalidConfig(problems));
    }
    let env_config = env_config.clone().with_mode(ActionMode::Continuous);
    let obs = env_config.observation;
    let [mut init_rng, mut rng, mut wave_rng] = seeded_streams(seed);
    let mut actor = build_actor(config, &env_config, &mut init_rng)?;
    let mut critic = MlpNetwork::new(&config.critic_sizes(), HeadSpec::Linear, &mut init_rng)?;
    let mut env = LandingEnv::new(env_config)?;
    let mut rollout = RolloutBatch::default();
    let mut records = Vec::with_capacity(episodes);

    for episode in 0..episodes {
        let mut state = env.reset(wave_rng.next_u64())?;
        let mut record = TrainRecord::new(episode);
        let (mut actor_losses, mut critic_losses) = (Vec::new(), Vec::new());
        rollout.clear();
        loop {
            let x = obs.features(&state);
            let sample = sample_action(&actor, &x, &mut rng);
            let value = critic.forward(&x)[0];
            let out = match env.step(Action::Continuous(sample.action)) {
                Ok(out) => out,
                Err(EnvError::NumericalFault { .. }) => {
                    record.aborted = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            rollout.push(x, sample.raw, out.reward, sample.log_prob, value, out.done);
            record.total_reward += out.reward;
            record.steps += 1;

            if out.done || rollout.len() >= config.rollout_horizon {
                let bootstrap = if out.done {
                    0.0
                } else {
                    critic.forward(&obs.features(&out.state))[0]
                };
                rollout.finish(bootstrap, config.discount, config.gae_lambda);
                if config.normalize_advantages {
                    rollout.normalize_advantages();
                }
                let stats = update(config, &mut actor, &mut critic, &rollout, &mut rng)?;
                actor_losses.push(stats.actor_loss);
                critic_losses.push(stats.critic_loss);
                rollout.clear();
            }

            state = out.state;
            if out.done {
                record.finish(out.info.termination, out.info.impact_velocity);
                break;
            }
        }
        if !(actor.is_finite() && critic.is_finite()) {
            return Err(AgentError::Diverged { episode });
        }
        record.actor_loss = mean(&actor_losses);
        record.critic_loss = mean(&critic_losses);
        record.mean_loss = match (record.actor_loss, record.critic_loss) {
            (Some(a), Some(c)) => Some(a + c),
            _ => None,
        };
        on_episode(&record);
        records.push(record);
    }

    Ok(PpoOutcome {
        actor,
        critic,
        records,
    })
}

/// Deterministic policy acting at the actor's mean.
#[derive(Debug, Clone)]
pub struct MeanPolicy {
    pub actor: MlpNetwork,
    pub observation: ObservationScale,
}

impl Policy for MeanPolicy {
    fn act(&self, state: &EnvState) -> Action {
        Action::Continuous(self.actor.forward(&self.observation.features(state))[0])
    }

    fn mode(&self) -> ActionMode {
        ActionMode::Continuous
    }
}
