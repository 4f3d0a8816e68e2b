//! Dense feed-forward networks with tanh hidden layers and hand-written
//! backpropagation.
//!
//! Parameters are exposed as an ordered list of flat buffers (weights then
//! bias per layer, head layers last). [`GradientSet`] mirrors that list, which
//! keeps SGD, soft updates, clipping and serialization as simple zips.

mod codec;

pub use codec::{ParseError, ParseErrorKind, FORMAT_VERSION, MAGIC};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("invalid network shape: {0}")]
    InvalidShape(String),
    #[error("parameter sets are not shape-congruent")]
    ShapeMismatch,
    #[error("non-finite upstream gradient")]
    NonFiniteGradient,
}

/// Output head of an [`MlpNetwork`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadSpec {
    Linear,
    Softmax,
    /// Value and advantage streams merged as `V + A - mean(A)`.
    Dueling,
    /// Squashed mean `low + (high - low) (tanh(m) + 1) / 2` and a
    /// state-independent log standard deviation per output.
    Gaussian {
        low: f64,
        high: f64,
        init_log_std: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Linear,
    Softmax,
    Dueling,
    Gaussian,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Linear => "linear",
            HeadKind::Softmax => "softmax",
            HeadKind::Dueling => "dueling",
            HeadKind::Gaussian => "gaussian",
        }
    }
}

/// Fully connected layer, `y = W x + b` with `W` stored row-major (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || rng.gen_range(-bound..=bound);
        let weights = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias,
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.bias
            .iter()
            .zip(self.weights.chunks_exact(self.inputs))
            .map(|(b, row)| b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>())
            .collect()
    }

    /// Accumulates `dW += g x^T`, `db += g` and adds `W^T g` into `g_in`.
    fn backward(&self, x: &[f64], g: &[f64], gw: &mut [f64], gb: &mut [f64], g_in: &mut [f64]) {
        for (o, &go) in g.iter().enumerate() {
            gb[o] += go;
            let row = o * self.inputs;
            for i in 0..self.inputs {
                gw[row + i] += go * x[i];
                g_in[i] += self.weights[row + i] * go;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Head {
    Linear(Dense),
    Softmax(Dense),
    Dueling {
        value: Dense,
        advantage: Dense,
    },
    Gaussian {
        mean: Dense,
        log_std: Vec<f64>,
        low: f64,
        high: f64,
    },
}

/// Intermediate values of one forward pass, consumed by [`MlpNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input followed by every hidden activation.
    activations: Vec<Vec<f64>>,
    /// tanh of the Gaussian mean pre-activation (empty for other heads).
    squashed: Vec<f64>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn into_output(self) -> Vec<f64> {
        self.output
    }
}

/// Gradient buffers congruent with an [`MlpNetwork`]'s parameter buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    buffers: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn buffers(&self) -> &[Vec<f64>] {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.buffers
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.buffers.iter().flatten().copied()
    }

    /// Global L2 norm over every buffer.
    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.buffers.iter_mut().flatten().for_each(|g| *g *= factor);
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<(), NnError> {
        if !self.congruent(other) {
            return Err(NnError::ShapeMismatch);
        }
        for (a, b) in self.buffers.iter_mut().zip(&other.buffers) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    /// Rescales to norm `max_norm` when the current norm exceeds it. Returns
    /// the norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    fn congruent(&self, other: &GradientSet) -> bool {
        self.buffers.len() == other.buffers.len()
            && self
                .buffers
                .iter()
                .zip(&other.buffers)
                .all(|(a, b)| a.len() == b.len())
    }
}

/// Feed-forward network: `layer_sizes = [input, hidden..., output]`, tanh on
/// every hidden layer, and a configurable output head.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    hidden: Vec<Dense>,
    head: Head,
}

impl MlpNetwork {
    /// Builds a network with weights and biases drawn uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        head: HeadSpec,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Self::build(layer_sizes, head, |i, o| Dense::init(i, o, rng))
    }

    /// All-zero weights and biases (the Gaussian log-std still takes its
    /// initial value).
    pub fn zeros(layer_sizes: &[usize], head: HeadSpec) -> Result<Self, NnError> {
        Self::build(layer_sizes, head, Dense::zeros)
    }

    fn build(
        layer_sizes: &[usize],
        head: HeadSpec,
        mut layer: impl FnMut(usize, usize) -> Dense,
    ) -> Result<Self, NnError> {
        if layer_sizes.len() < 2 {
            return Err(NnError::InvalidShape(format!(
                "need at least input and output sizes, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(NnError::InvalidShape(format!(
                "layer sizes must be positive, got {layer_sizes:?}"
            )));
        }
        let n = layer_sizes.len();
        let hidden = layer_sizes[..n - 1]
            .windows(2)
            .map(|w| layer(w[0], w[1]))
            .collect();
        let (last, out) = (layer_sizes[n - 2], layer_sizes[n - 1]);
        let head = match head {
            HeadSpec::Linear => Head::Linear(layer(last, out)),
            HeadSpec::Softmax => Head::Softmax(layer(last, out)),
            HeadSpec::Dueling => Head::Dueling {
                value: layer(last, 1),
                advantage: layer(last, out),
            },
            HeadSpec::Gaussian {
                low,
                high,
                init_log_std,
            } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(NnError::InvalidShape(format!(
                        "gaussian bounds must satisfy low < high, got [{low}, {high}]"
                    )));
                }
                if !init_log_std.is_finite() {
                    return Err(NnError::InvalidShape("log-std must be finite".into()));
                }
                Head::Gaussian {
                    mean: layer(last, out),
                    log_std: vec![init_log_std; out],
                    low,
                    high,
                }
            }
        };
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            hidden,
            head,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Last entry of `layer_sizes`: actions for Q heads, action dimension for
    /// the Gaussian head.
    pub fn output_units(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Length of the vector returned by [`forward`](Self::forward).
    pub fn output_dim(&self) -> usize {
        match self.head {
            Head::Gaussian { .. } => 2 * self.output_units(),
            _ => self.output_units(),
        }
    }

    pub fn head_kind(&self) -> HeadKind {
        match self.head {
            Head::Linear(_) => HeadKind::Linear,
            Head::Softmax(_) => HeadKind::Softmax,
            Head::Dueling { .. } => HeadKind::Dueling,
            Head::Gaussian { .. } => HeadKind::Gaussian,
        }
    }

    /// Action bounds of a Gaussian head.
    pub fn gaussian_bounds(&self) -> Option<(f64, f64)> {
        match self.head {
            Head::Gaussian { low, high, .. } => Some((low, high)),
            _ => None,
        }
    }

    pub fn param_buffers(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.hidden {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        match &self.head {
            Head::Linear(l) | Head::Softmax(l) => {
                out.push(&l.weights);
                out.push(&l.bias);
            }
            Head::Dueling { value, advantage } => {
                out.extend([
                    &value.weights[..],
                    &value.bias,
                    &advantage.weights,
                    &advantage.bias,
                ]);
            }
            Head::Gaussian { mean, log_std, .. } => {
                out.extend([&mean.weights[..], &mean.bias, log_std]);
            }
        }
        out
    }

    pub fn param_buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.hidden {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        match &mut self.head {
            Head::Linear(l) | Head::Softmax(l) => {
                out.push(&mut l.weights);
                out.push(&mut l.bias);
            }
            Head::Dueling { value, advantage } => {
                out.push(&mut value.weights);
                out.push(&mut value.bias);
                out.push(&mut advantage.weights);
                out.push(&mut advantage.bias);
            }
            Head::Gaussian { mean, log_std, .. } => {
                out.push(&mut mean.weights);
                out.push(&mut mean.bias);
                out.push(log_std);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_buffers().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.param_buffers()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn zero_grad(&self) -> GradientSet {
        GradientSet {
            buffers: self
                .param_buffers()
                .iter()
                .map(|b| vec![0.0; b.len()])
                .collect(),
        }
    }

    /// Evaluates the network. Panics if `x.len() != input_dim()`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).output
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(
            x.len(),
            self.input_dim(),
            "input has {} features, network expects {}",
            x.len(),
            self.input_dim()
        );
        let mut activations = Vec::with_capacity(self.hidden.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.hidden {
            let mut h = layer.forward(activations.last().unwrap());
            h.iter_mut().for_each(|v| *v = v.tanh());
            activations.push(h);
        }
        let h = activations.last().unwrap();
        let mut squashed = Vec::new();
        let output = match &self.head {
            Head::Linear(l) => l.forward(h),
            Head::Softmax(l) => softmax(&l.forward(h)),
            Head::Dueling { value, advantage } => {
                let v = value.forward(h)[0];
                let a = advantage.forward(h);
                let mean = a.iter().sum::<f64>() / a.len() as f64;
                a.iter().map(|ai| v + ai - mean).collect()
            }
            Head::Gaussian {
                mean,
                log_std,
                low,
                high,
            } => {
                squashed = mean.forward(h).into_iter().map(f64::tanh).collect();
                let half_span = 0.5 * (high - low);
                let mut out: Vec<f64> = squashed
                    .iter()
                    .map(|t| low + half_span * (t + 1.0))
                    .collect();
                out.extend_from_slice(log_std);
                out
            }
        };
        ForwardCache {
            activations,
            squashed,
            output,
        }
    }

    /// Gradient of a scalar loss given `upstream = dL/d(output)`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<GradientSet, NnError> {
        let mut grads = self.zero_grad();
        self.backward_into(cache, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Like [`backward`](Self::backward) but accumulates into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grads: &mut GradientSet,
    ) -> Result<(), NnError> {
        assert_eq!(
            upstream.len(),
            self.output_dim(),
            "upstream gradient length"
        );
        if upstream.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient);
        }
        if grads.buffers.len() != self.param_buffers().len() {
            return Err(NnError::ShapeMismatch);
        }

        let h = cache.activations.last().unwrap();
        let mut g_h = vec![0.0; h.len()];
        let head_start = 2 * self.hidden.len();
        let (_, head_grads) = grads.buffers.split_at_mut(head_start);
        match &self.head {
            Head::Linear(l) => {
                let [gw, gb] = head_grads else { unreachable!() };
                l.backward(h, upstream, gw, gb, &mut g_h);
            }
            Head::Softmax(l) => {
                let p = &cache.output;
                let dot: f64 = p.iter().zip(upstream).map(|(pi, gi)| pi * gi).sum();
                let g_logits: Vec<f64> = p
                    .iter()
                    .zip(upstream)
                    .map(|(pi, gi)| pi * (gi - dot))
                    .collect();
                let [gw, gb] = head_grads else { unreachable!() };
                l.backward(h, &g_logits, gw, gb, &mut g_h);
            }
            Head::Dueling { value, advantage } => {
                let total: f64 = upstream.iter().sum();
                let mean = total / upstream.len() as f64;
                let g_adv: Vec<f64> = upstream.iter().map(|g| g - mean).collect();
                let [gvw, gvb, gaw, gab] = head_grads else {
                    unreachable!()
                };
                value.backward(h, &[total], gvw, gvb, &mut g_h);
                advantage.backward(h, &g_adv, gaw, gab, &mut g_h);
            }
            Head::Gaussian {
                mean, low, high, ..
            } => {
                let d = self.output_units();
                let half_span = 0.5 * (high - low);
                let g_pre: Vec<f64> = cache
                    .squashed
                    .iter()
                    .zip(&upstream[..d])
                    .map(|(t, g)| g * half_span * (1.0 - t * t))
                    .collect();
                let [gw, gb, gls] = head_grads else {
                    unreachable!()
                };
                mean.backward(h, &g_pre, gw, gb, &mut g_h);
                gls.iter_mut()
                    .zip(&upstream[d..])
                    .for_each(|(a, g)| *a += g);
            }
        }

        for (li, layer) in self.hidden.iter().enumerate().rev() {
            let out = &cache.activations[li + 1];
            let g_pre: Vec<f64> = g_h
                .iter()
                .zip(out)
                .map(|(g, a)| g * (1.0 - a * a))
                .collect();
            let x = &cache.activations[li];
            let mut g_in = vec![0.0; x.len()];
            let (gw, rest) = grads.buffers[2 * li..].split_first_mut().unwrap();
            layer.backward(x, &g_pre, gw, &mut rest[0], &mut g_in);
            g_h = g_in;
        }
        Ok(())
    }

    pub fn is_congruent(&self, other: &MlpNetwork) -> bool {
        self.layer_sizes == other.layer_sizes && self.head_kind() == other.head_kind()
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// One SGD step `theta <- theta - lr * grad`, after rescaling `grads` to
/// global norm `clip` when it is exceeded. Returns the unclipped norm.
pub fn sgd_step(
    net: &mut MlpNetwork,
    grads: &GradientSet,
    lr: f64,
    clip: Option<f64>,
) -> Result<f64, NnError> {
    assert!(lr > 0.0, "learning rate must be positive");
    let norm = grads.norm();
    let factor = match clip {
        Some(c) if norm > c && norm > 0.0 => c / norm,
        _ => 1.0,
    };
    let mut params = net.param_buffers_mut();
    if params.len() != grads.buffers.len()
        || params
            .iter()
            .zip(&grads.buffers)
            .any(|(p, g)| p.len() != g.len())
    {
        return Err(NnError::ShapeMismatch);
    }
    for (p, g) in params.iter_mut().zip(&grads.buffers) {
        p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * factor * g);
    }
    Ok(norm)
}

/// Polyak blend `target <- tau * source + (1 - tau) * target`.
pub fn soft_update(target: &mut MlpNetwork, source: &MlpNetwork, tau: f64) -> Result<(), NnError> {
    assert!(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
    if !target.is_congruent(source) {
        return Err(NnError::ShapeMismatch);
    }
    for (t, s) in target
        .param_buffers_mut()
        .into_iter()
        .zip(source.param_buffers())
    {
        if tau == 1.0 {
            t.copy_from_slice(s);
        } else {
            t.iter_mut()
                .zip(s)
                .for_each(|(t, s)| *t = tau * s + (1.0 - tau) * *t);
        }
    }
    Ok(())
}
