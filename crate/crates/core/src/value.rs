//! Value-based agents: DQN, Double DQN and Dueling DQN.
//!
//! All three share one learner. They differ only in the network head
//! (dueling) and in how bootstrap targets pick the next action (double).

use std::collections::VecDeque;

use rand::seq::index;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::env::{
    Action, EnvConfig, EnvError, LandingEnv, ObservationScale, Transition, DISCRETE_ACTIONS,
};
use crate::harness::TrainRecord;
use crate::nn::{self, HeadSpec, MlpNetwork, NnError};
use crate::{seeded_streams, AgentError};

/// Bounded FIFO store with uniform minibatch sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    /// Appends `item`, evicting the oldest entry when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `batch` distinct entries chosen uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&T> {
        assert!(batch <= self.len(), "minibatch larger than buffer");
        index::sample(rng, self.len(), batch)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// `eps(e) = max(eps_f, eps0 * decay_rate^e)` for episode `e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub eps_f: f64,
    pub decay_rate: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::reaching(1.0, 0.05, 80)
    }
}

impl EpsilonSchedule {
    /// Schedule that decays from `eps0` to `eps_f` over `episodes` episodes.
    pub fn reaching(eps0: f64, eps_f: f64, episodes: u32) -> Self {
        Self {
            eps0,
            eps_f,
            decay_rate: (eps_f / eps0).powf(1.0 / episodes.max(1) as f64),
        }
    }

    pub fn value(&self, episode: usize) -> f64 {
        let decayed = self.eps0 * self.decay_rate.powi(episode.min(i32::MAX as usize) as i32);
        decayed.max(self.eps_f)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.eps_f > 0.0 && self.eps_f <= self.eps0 && self.eps0 <= 1.0) {
            return Err(format!(
                "need 0 < eps_f <= eps0 <= 1, got eps0 = {}, eps_f = {}",
                self.eps0, self.eps_f
            ));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(format!(
                "decay_rate must lie in (0, 1], got {}",
                self.decay_rate
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DqnVariant {
    #[default]
    Dqn,
    Double,
    Dueling,
}

impl DqnVariant {
    pub fn name(self) -> &'static str {
        match self {
            DqnVariant::Dqn => "dqn",
            DqnVariant::Double => "double",
            DqnVariant::Dueling => "dueling",
        }
    }

    pub fn head(self) -> HeadSpec {
        match self {
            DqnVariant::Dueling => HeadSpec::Dueling,
            _ => HeadSpec::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    #[serde(skip)]
    pub variant: DqnVariant,
    pub lr: f64,
    pub batch_size: usize,
    pub discount: f64,
    pub capacity: usize,
    /// Learner steps between target-network blends.
    pub sync_freq: usize,
    pub soft_tau: f64,
    /// Global gradient-norm clip; `0` disables clipping.
    pub grad_clip: f64,
    /// Minimum buffer fill before the first update.
    pub warm_start: usize,
    pub hidden: Vec<usize>,
    pub epsilon: EpsilonSchedule,
    /// Multiplies rewards as they enter the replay buffer. Logged rewards
    /// are unscaled.
    pub reward_scale: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            variant: DqnVariant::Dqn,
            lr: 1e-2,
            batch_size: 64,
            discount: 0.995,
            capacity: 10_000,
            sync_freq: 10,
            soft_tau: 0.8,
            grad_clip: 1.0,
            warm_start: 200,
            hidden: vec![32, 32, 16],
            epsilon: EpsilonSchedule::default(),
            reward_scale: 0.01,
        }
    }
}

impl DqnConfig {
    pub fn with_variant(mut self, variant: DqnVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn clip(&self) -> Option<f64> {
        (self.grad_clip > 0.0).then_some(self.grad_clip)
    }

    /// Offending fields as `(name, reason)` pairs.
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |f: &str, r: String| out.push((f.to_string(), r));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            bad("lr", format!("must be > 0, got {}", self.lr));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            bad(
                "reward_scale",
                format!("must be > 0, got {}", self.reward_scale),
            );
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            bad(
                "discount",
                format!("must lie in (0, 1], got {}", self.discount),
            );
        }
        if self.batch_size == 0 {
            bad("batch_size", "must be >= 1".into());
        }
        if !(self.batch_size <= self.warm_start && self.warm_start <= self.capacity) {
            bad(
                "warm_start",
                format!(
                    "need batch_size <= warm_start <= capacity, got {} <= {} <= {}",
                    self.batch_size, self.warm_start, self.capacity
                ),
            );
        }
        if self.sync_freq == 0 {
            bad("sync_freq", "must be >= 1".into());
        }
        if !(self.soft_tau > 0.0 && self.soft_tau <= 1.0) {
            bad(
                "soft_tau",
                format!("must lie in (0, 1], got {}", self.soft_tau),
            );
        }
        if !(self.grad_clip >= 0.0) {
            bad("grad_clip", format!("must be >= 0, got {}", self.grad_clip));
        }
        if self.hidden.contains(&0) {
            bad("hidden", "layer widths must be positive".into());
        }
        if let Err(e) = self.epsilon.validate() {
            bad("epsilon", e);
        }
        out
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![2];
        sizes.extend(&self.hidden);
        sizes.push(DISCRETE_ACTIONS);
        sizes
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice over the network's Q outputs.
pub fn select_action<R: Rng + ?Sized>(
    net: &MlpNetwork,
    features: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..net.output_units())
    } else {
        argmax(&net.forward(features))
    }
}

fn action_index(t: &Transition) -> usize {
    match t.a {
        Action::Discrete(i) => i,
        Action::Continuous(_) => panic!("value agents store discrete actions only"),
    }
}

/// Bootstrap targets: `r` for terminal transitions, otherwise
/// `r + gamma * max_a' Q_target(s', a')`, or for the double variant
/// `r + gamma * Q_target(s', argmax_a' Q_prediction(s', a'))`.
pub fn compute_targets(
    batch: &[&Transition],
    prediction: &MlpNetwork,
    target: &MlpNetwork,
    discount: f64,
    variant: DqnVariant,
    obs: &ObservationScale,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                return t.r;
            }
            let x = obs.features(&t.s_next);
            let q_next = target.forward(&x);
            let bootstrap = match variant {
                DqnVariant::Double => q_next[argmax(&prediction.forward(&x))],
                DqnVariant::Dqn | DqnVariant::Dueling => {
                    q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                }
            };
            t.r + discount * bootstrap
        })
        .collect()
}

/// Mean squared TD error on `batch` followed by one clipped SGD step on the
/// prediction network. Only the taken action's output receives gradient.
/// Returns the loss measured before the update.
pub fn learn_on_batch(
    config: &DqnConfig,
    batch: &[&Transition],
    prediction: &mut MlpNetwork,
    target: &MlpNetwork,
    obs: &ObservationScale,
) -> Result<f64, NnError> {
    let targets = compute_targets(
        batch,
        prediction,
        target,
        config.discount,
        config.variant,
        obs,
    );
    let n = batch.len() as f64;
    let mut grads = prediction.zero_grad();
    let mut loss = 0.0;
    let mut upstream = vec![0.0; prediction.output_dim()];
    for (t, y) in batch.iter().zip(&targets) {
        let cache = prediction.forward_cached(&obs.features(&t.s));
        let a = action_index(t);
        let err = cache.output()[a] - y;
        loss += err * err / n;
        upstream.fill(0.0);
        upstream[a] = 2.0 * err / n;
        prediction.backward_into(&cache, &upstream, &mut grads)?;
    }
    nn::sgd_step(prediction, &grads, config.lr, config.clip())?;
    Ok(loss)
}

/// Samples a minibatch and learns from it; `None` while the buffer is below
/// the warm-start size (no parameters change).
pub fn learn_step<R: Rng + ?Sized>(
    config: &DqnConfig,
    buffer: &ReplayBuffer<Transition>,
    prediction: &mut MlpNetwork,
    target: &MlpNetwork,
    obs: &ObservationScale,
    rng: &mut R,
) -> Result<Option<f64>, NnError> {
    if buffer.len() < config.warm_start.max(config.batch_size) {
        return Ok(None);
    }
    let batch = buffer.sample(config.batch_size, rng);
    learn_on_batch(config, &batch, prediction, target, obs).map(Some)
}

/// Output of a value-agent training run.
#[derive(Debug, Clone)]
pub struct DqnOutcome {
    pub network: MlpNetwork,
    pub records: Vec<TrainRecord>,
    pub learner_steps: usize,
}

pub fn train(
    config: &DqnConfig,
    env_config: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<DqnOutcome, AgentError> {
    train_with(config, env_config, episodes, seed, |_| {})
}

/// Runs the replay/target-network training loop, calling `on_episode` after
/// every finished episode.
pub fn train_with(
    config: &DqnConfig,
    env_config: &EnvConfig,
    episodes: usize,
    seed: u64,
    mut on_episode: impl FnMut(&TrainRecord),
) -> Result<DqnOutcome, AgentError> {
    let problems = config.problems();
    if !problems.is_empty() {
        return Err(AgentError::InvalidConfig(problems));
    }
    let env_config = env_config
        .clone()
        .with_mode(crate::env::ActionMode::Discrete);
    let obs = env_config.observation;
    let mut env = LandingEnv::new(env_config)?;

    let [mut init_rng, mut rng, mut wave_rng] = seeded_streams(seed);
    let mut prediction =
        MlpNetwork::new(&config.layer_sizes(), config.variant.head(), &mut init_rng)?;
    let mut target = prediction.clone();
    let mut buffer = ReplayBuffer::new(config.capacity);
    let mut learner_steps = 0usize;
    let mut records = Vec::with_capacity(episodes);

    for episode in 0..episodes {
        let epsilon = config.epsilon.value(episode);
        let mut state = env.reset(wave_rng.next_u64())?;
        let mut record = TrainRecord::new(episode);
        record.epsilon = Some(epsilon);
        let mut losses = Vec::new();
        loop {
            let a = select_action(&prediction, &obs.features(&state), epsilon, &mut rng);
            let out = match env.step(Action::Discrete(a)) {
                Ok(out) => out,
                Err(EnvError::NumericalFault { .. }) => {
                    record.aborted = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            buffer.push(Transition {
                s: state,
                a: Action::Discrete(a),
                r: out.reward * config.reward_scale,
                s_next: out.state,
                done: out.done,
            });
            record.total_reward += out.reward;
            record.steps += 1;

            if let Some(loss) =
                learn_step(config, &buffer, &mut prediction, &target, &obs, &mut rng)?
            {
                losses.push(loss);
                learner_steps += 1;
                if learner_steps % config.sync_freq == 0 {
                    nn::soft_update(&mut target, &prediction, config.soft_tau)?;
                }
            }

            state = out.state;
            if out.done {
                record.finish(out.info.termination, out.info.impact_velocity);
                break;
            }
        }
        if !prediction.is_finite() {
            return Err(AgentError::Diverged { episode });
        }
        record.mean_loss = mean(&losses);
        on_episode(&record);
        records.push(record);
    }

    Ok(DqnOutcome {
        network: prediction,
        records,
        learner_steps,
    })
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Greedy policy over a trained Q network.
#[derive(Debug, Clone)]
pub struct GreedyPolicy {
    pub network: MlpNetwork,
    pub observation: ObservationScale,
}

impl crate::harness::Policy for GreedyPolicy {
    fn act(&self, state: &crate::env::EnvState) -> Action {
        Action::Discrete(argmax(
            &self.network.forward(&self.observation.features(state)),
        ))
    }

    fn mode(&self) -> crate::env::ActionMode {
        crate::env::ActionMode::Discrete
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    /// 2-input linear Q net whose outputs are just its biases.
    fn constant_q(values: &[f64]) -> MlpNetwork {
        let mut net = MlpNetwork::zeros(&[2, values.len()], HeadSpec::Linear).unwrap();
        net.param_buffers_mut()[1].copy_from_slice(values);
        net
    }

    fn tr(r: f64, done: bool) -> Transition {
        Transition {
            s: EnvState::new(1.0, 0.0),
            a: Action::Discrete(0),
            r,
            s_next: EnvState::new(0.5, -0.5),
            done,
        }
    }

    #[test]
    fn replay_evicts_oldest() {
        let mut buf = ReplayBuffer::new(5);
        for i in 0..12 {
            buf.push(i);
        }
        assert_eq!(buf.len(), 5);
        assert_eq!(
            buf.iter().copied().collect::<Vec<_>>(),
            vec![7, 8, 9, 10, 11]
        );
        let mut r = rng();
        let mut sample: Vec<i32> = buf.sample(5, &mut r).into_iter().copied().collect();
        sample.sort();
        assert_eq!(sample, vec![7, 8, 9, 10, 11]);
    }

    #[test]
    fn epsilon_schedule_hits_floor_at_episode_80() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.value(0), 1.0);
        assert!((s.value(80) - 0.05).abs() < 1e-12);
        assert!(s.value(79) > 0.05);
        assert_eq!(s.value(500), 0.05);
        for e in 0..600 {
            assert!(s.value(e + 1) <= s.value(e));
        }
    }

    #[test]
    fn greedy_selection_and_tie_break() {
        let mut r = rng();
        assert_eq!(
            select_action(&constant_q(&[1.0, 3.0, 2.0]), &[0.0, 0.0], 0.0, &mut r),
            1
        );
        assert_eq!(
            select_action(&constant_q(&[5.0, 5.0, 1.0]), &[0.0, 0.0], 0.0, &mut r),
            0
        );
    }

    #[test]
    fn full_exploration_is_uniform() {
        let net = constant_q(&[0.0, 10.0, 0.0]);
        let mut r = rng();
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            counts[select_action(&net, &[0.0, 0.0], 1.0, &mut r)] += 1;
        }
        let sigma = (3000.0 * (1.0 / 3.0) * (2.0 / 3.0f64)).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn bellman_targets() {
        let obs = ObservationScale {
            height: 1.0,
            velocity: 1.0,
        };
        let target = constant_q(&[2.0, 4.0, 0.0]);
        let pred = constant_q(&[9.0, 1.0, 0.0]);
        let terminal = tr(-3.0, true);
        let live = tr(-1.0, false);
        let batch = [&terminal, &live];
        let dqn = compute_targets(&batch, &pred, &target, 0.995, DqnVariant::Dqn, &obs);
        assert_eq!(dqn[0], -3.0);
        assert!((dqn[1] - 2.98).abs() < 1e-12);
        let double = compute_targets(&batch, &pred, &target, 0.995, DqnVariant::Double, &obs);
        assert_eq!(double[0], -3.0);
        assert!((double[1] - (-1.0 + 0.995 * 2.0)).abs() < 1e-12);
        assert!(double[1] < dqn[1]);
    }

    #[test]
    fn single_transition_loss_is_squared_error() {
        let obs = ObservationScale {
            height: 1.0,
            velocity: 1.0,
        };
        let config = DqnConfig::default();
        let mut pred = constant_q(&[1.0, 0.0, 0.0]);
        let target = constant_q(&[0.0; 3]);
        let t = tr(3.0, true);
        let loss = learn_on_batch(&config, &[&t], &mut pred, &target, &obs).unwrap();
        assert_eq!(loss, 4.0);
    }

    #[test]
    fn matching_targets_leave_parameters_unchanged() {
        let obs = ObservationScale::default();
        let config = DqnConfig::default();
        let mut pred = constant_q(&[-2.0, 7.0, 1.0]);
        let target = pred.clone();
        let t = tr(-2.0, true);
        let before = pred.clone();
        let loss = learn_on_batch(&config, &[&t, &t], &mut pred, &target, &obs).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(pred, before);
    }

    #[test]
    fn learn_step_waits_for_warm_start() {
        let config = DqnConfig::default();
        let mut buf = ReplayBuffer::new(1000);
        for _ in 0..199 {
            buf.push(tr(-1.0, false));
        }
        let mut pred = constant_q(&[0.0; 3]);
        let target = pred.clone();
        let before = pred.clone();
        let out = learn_step(
            &config,
            &buf,
            &mut pred,
            &target,
            &ObservationScale::default(),
            &mut rng(),
        );
        assert_eq!(out, Ok(None));
        assert_eq!(pred, before);
    }

    #[test]
    fn config_problems_name_fields() {
        let mut c = DqnConfig::default();
        c.discount = 1.5;
        c.warm_start = 20;
        let names: Vec<String> = c.problems().into_iter().map(|(f, _)| f).collect();
        assert_eq!(names, vec!["discount", "warm_start"]);
    }
}
