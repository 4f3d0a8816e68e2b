#![allow(dead_code)]

use deckland::nn::{GradientSet, HeadSpec, MlpNetwork};
use deckland::ppo::{gaussian_log_prob, RolloutBatch};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Elementwise relative error with an absolute floor for near-zero entries.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between `analytic` and central differences of
/// `loss` taken over every parameter of `net`.
pub fn fd_max_error(
    net: &MlpNetwork,
    analytic: &GradientSet,
    loss: impl Fn(&MlpNetwork) -> f64,
) -> f64 {
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let shapes: Vec<usize> = net.param_buffers().iter().map(|b| b.len()).collect();
    for (bi, len) in shapes.into_iter().enumerate() {
        for j in 0..len {
            let orig = probe.param_buffers()[bi][j];
            probe.param_buffers_mut()[bi][j] = orig + FD_STEP;
            let up = loss(&probe);
            probe.param_buffers_mut()[bi][j] = orig - FD_STEP;
            let down = loss(&probe);
            probe.param_buffers_mut()[bi][j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.buffers()[bi][j], numeric));
        }
    }
    worst
}

/// Gradient check of `sum_i c_i * y_i(x)` for random `x` and weights `c`.
pub fn check_network(net: &MlpNetwork, rng: &mut ChaCha8Rng) -> f64 {
    let x: Vec<f64> = (0..net.input_dim())
        .map(|_| rng.gen_range(-1.5..1.5))
        .collect();
    let c: Vec<f64> = (0..net.output_dim())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let cache = net.forward_cached(&x);
    let grads = net.backward(&cache, &c).unwrap();
    fd_max_error(net, &grads, |n| {
        n.forward(&x).iter().zip(&c).map(|(y, w)| y * w).sum()
    })
}

/// Head families exercised by the gradient suite.
pub fn head_families() -> Vec<(&'static str, HeadSpec, bool)> {
    vec![
        ("linear", HeadSpec::Linear, false),
        ("tanh", HeadSpec::Linear, true),
        ("softmax", HeadSpec::Softmax, true),
        ("dueling", HeadSpec::Dueling, true),
        (
            "gaussian",
            HeadSpec::Gaussian {
                low: 0.0,
                high: 19.62,
                init_log_std: 1.0,
            },
            true,
        ),
    ]
}

/// Random architecture: `hidden` selects between a bare affine map and a
/// stack of one to three tanh layers.
pub fn random_net(head: HeadSpec, hidden: bool, rng: &mut ChaCha8Rng) -> MlpNetwork {
    let mut sizes = vec![rng.gen_range(1..=4)];
    if hidden {
        for _ in 0..rng.gen_range(1..=3) {
            sizes.push(rng.gen_range(2..=7));
        }
    }
    let out = match head {
        HeadSpec::Gaussian { .. } => 1,
        _ => rng.gen_range(2..=4),
    };
    sizes.push(out);
    MlpNetwork::new(&sizes, head, rng).unwrap()
}

/// Random rollout for an actor with 2 inputs. Old log-probabilities are
/// those of the current actor shifted by a random amount, so ratios lie
/// around 1 without sitting on a clip boundary.
pub fn random_rollout(actor: &MlpNetwork, len: usize, rng: &mut ChaCha8Rng) -> RolloutBatch {
    let mut b = RolloutBatch::default();
    for _ in 0..len {
        let obs = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.5..1.5)];
        let out = actor.forward(&obs);
        let a = out[0] + rng.gen_range(-3.0..3.0);
        let shift = rng.gen_range(-0.5..0.5);
        let logp = gaussian_log_prob(a, out[0], out[1]) + shift;
        b.push(
            obs,
            a,
            rng.gen_range(-5.0..0.0),
            logp,
            rng.gen_range(-3.0..3.0),
            false,
        );
    }
    b.advantages = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
    b.value_targets = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
    b
}

/// GAE written out as an explicit double sum over TD residuals.
pub fn gae_double_sum(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let value_at = |j: usize| if j < n { values[j] } else { bootstrap };
    let delta = |j: usize| {
        let next = if dones[j] { 0.0 } else { value_at(j + 1) };
        rewards[j] + gamma * next - values[j]
    };
    (0..n)
        .map(|k| {
            let mut total = 0.0;
            for l in k..n {
                total += (gamma * lambda).powi((l - k) as i32) * delta(l);
                if dones[l] {
                    break;
                }
            }
            total
        })
        .collect()
}
