//! JONSWAP spectral model and random-phase synthesis of the platform heave.
//!
//! Each episode draws one [`WaveRealization`]: the spectrum is sampled on a
//! uniform [`FrequencyGrid`], every bin gets amplitude `sqrt(2 S(f) df)` and a
//! uniform random phase, and the displacement and its analytic derivative are
//! evaluated on a fixed time grid.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("spectral density undefined at non-positive frequency {0}")]
    NonPositiveFrequency(f64),
    #[error("invalid wave parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("grid upper frequency {f_max} Hz violates Nyquist limit {nyquist} Hz for dt = {dt} s")]
    Nyquist { f_max: f64, nyquist: f64, dt: f64 },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> WaveError {
    WaveError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// Parameters of the JONSWAP spectral density.
///
/// The amplitude prefactor is `alpha_w * g^2 / k_w^4`. `k_w` acts as a free
/// scale constant; the default is chosen for a moderate sea state (roughly
/// 1.35 m significant height at the default peak frequency).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JonswapParams {
    pub alpha_w: f64,
    pub k_w: f64,
    pub f_p: f64,
    pub gamma_w: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub g: f64,
}

impl Default for JonswapParams {
    fn default() -> Self {
        Self {
            alpha_w: 0.0081,
            k_w: 12.0,
            f_p: 0.1,
            gamma_w: 3.3,
            sigma_low: 0.07,
            sigma_high: 0.09,
            g: 9.81,
        }
    }
}

impl JonswapParams {
    pub fn validate(&self) -> Result<(), WaveError> {
        let positive = [
            ("alpha_w", self.alpha_w),
            ("k_w", self.k_w),
            ("f_p", self.f_p),
            ("sigma_low", self.sigma_low),
            ("sigma_high", self.sigma_high),
            ("g", self.g),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.gamma_w.is_finite() && self.gamma_w >= 1.0) {
            return Err(invalid(
                "gamma_w",
                format!("must be finite and >= 1, got {}", self.gamma_w),
            ));
        }
        Ok(())
    }
}

/// Uniformly spaced frequency samples `f_min, f_min + df, ..., f_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencyGrid {
    pub f_min: f64,
    pub f_max: f64,
    pub n_bins: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            f_min: 0.02,
            f_max: 1.0,
            n_bins: 256,
        }
    }
}

impl FrequencyGrid {
    pub fn new(f_min: f64, f_max: f64, n_bins: usize) -> Result<Self, WaveError> {
        let grid = Self {
            f_min,
            f_max,
            n_bins,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), WaveError> {
        if !(self.f_min.is_finite() && self.f_min > 0.0) {
            return Err(invalid("f_min", format!("must be > 0, got {}", self.f_min)));
        }
        if !(self.f_max.is_finite() && self.f_max > self.f_min) {
            return Err(invalid(
                "f_max",
                format!("must exceed f_min = {}, got {}", self.f_min, self.f_max),
            ));
        }
        if self.n_bins < 2 {
            return Err(invalid(
                "n_bins",
                format!("must be >= 2, got {}", self.n_bins),
            ));
        }
        Ok(())
    }

    /// Bin spacing in Hz.
    pub fn df(&self) -> f64 {
        (self.f_max - self.f_min) / (self.n_bins - 1) as f64
    }

    pub fn frequency(&self, i: usize) -> f64 {
        if i + 1 == self.n_bins {
            self.f_max
        } else {
            self.f_min + i as f64 * self.df()
        }
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_bins).map(|i| self.frequency(i))
    }
}

/// JONSWAP energy density `S(f)` in m^2 s.
pub fn spectral_density(params: &JonswapParams, f: f64) -> Result<f64, WaveError> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(WaveError::NonPositiveFrequency(f));
    }
    let fp = params.f_p;
    let sigma = if f <= fp {
        params.sigma_low
    } else {
        params.sigma_high
    };
    let scale = params.alpha_w * params.g * params.g / params.k_w.powi(4);
    let shape = f.powi(-5) * (-1.25 * (fp / f).powi(4)).exp();
    let peak_exponent = (-(f - fp).powi(2) / (2.0 * sigma * sigma * fp * fp)).exp();
    Ok(scale * shape * params.gamma_w.powf(peak_exponent))
}

/// Samples the spectrum at every grid frequency as `(f_i, S(f_i))`.
pub fn sample_spectrum(
    params: &JonswapParams,
    grid: &FrequencyGrid,
) -> Result<Vec<(f64, f64)>, WaveError> {
    grid.validate()?;
    grid.frequencies()
        .map(|f| spectral_density(params, f).map(|s| (f, s)))
        .collect()
}

/// One episode of platform motion sampled every `dt` seconds from `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveRealization {
    pub dt: f64,
    pub z_w: Vec<f64>,
    pub zdot_w: Vec<f64>,
    pub phases: Vec<f64>,
}

impl WaveRealization {
    /// A motionless platform with `len` samples.
    pub fn calm(len: usize, dt: f64) -> Self {
        let len = len.max(1);
        Self {
            dt,
            z_w: vec![0.0; len],
            zdot_w: vec![0.0; len],
            phases: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.z_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_w.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Number of samples covering `[0, duration]` at spacing `dt`.
pub fn sample_count(duration: f64, dt: f64) -> usize {
    // Tolerate representation error so that 10.0 / 0.01 yields 1001 samples.
    ((duration / dt) + 1e-9).floor() as usize + 1
}

fn check_timing(duration: f64, dt: f64, f_max: f64) -> Result<(), WaveError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(invalid("duration", format!("must be > 0, got {duration}")));
    }
    if !(dt.is_finite() && dt > 0.0 && dt < duration) {
        return Err(invalid(
            "dt",
            format!("must satisfy 0 < dt < duration, got {dt}"),
        ));
    }
    let nyquist = 1.0 / (2.0 * dt);
    if f_max >= nyquist {
        return Err(WaveError::Nyquist { f_max, nyquist, dt });
    }
    Ok(())
}

/// Draws random phases with `rng_seed` and synthesizes the platform heave.
pub fn synthesize_wave(
    params: &JonswapParams,
    grid: &FrequencyGrid,
    duration: f64,
    dt: f64,
    rng_seed: u64,
) -> Result<WaveRealization, WaveError> {
    params.validate()?;
    let spectrum = sample_spectrum(params, grid)?;
    synthesize_from_spectrum(&spectrum, grid.df(), duration, dt, rng_seed)
}

/// Random-phase synthesis from an already sampled spectrum.
///
/// `spectrum` holds `(f_i, S(f_i))` pairs with uniform spacing `df`. Any
/// non-negative spectrum is accepted, including the all-zero one.
pub fn synthesize_from_spectrum(
    spectrum: &[(f64, f64)],
    df: f64,
    duration: f64,
    dt: f64,
    rng_seed: u64,
) -> Result<WaveRealization, WaveError> {
    let f_max = spectrum.iter().map(|&(f, _)| f).fold(0.0, f64::max);
    check_timing(duration, dt, f_max)?;
    if !(df.is_finite() && df > 0.0) {
        return Err(invalid("df", format!("must be > 0, got {df}")));
    }
    if let Some(&(_, s)) = spectrum.iter().find(|(_, s)| !(s.is_finite() && *s >= 0.0)) {
        return Err(invalid(
            "spectrum",
            format!("density must be finite and >= 0, got {s}"),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let phases: Vec<f64> = spectrum.iter().map(|_| rng.gen_range(0.0..TAU)).collect();
    let components: Vec<(f64, f64, f64)> = spectrum
        .iter()
        .zip(&phases)
        .map(|(&(f, s), &phi)| ((2.0 * s * df).sqrt(), 2.0 * PI * f, phi))
        .filter(|&(a, _, _)| a > 0.0)
        .collect();

    let n = sample_count(duration, dt);
    let mut z_w = Vec::with_capacity(n);
    let mut zdot_w = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let (mut z, mut zd) = (0.0, 0.0);
        for &(a, omega, phi) in &components {
            let (sin, cos) = (omega * t + phi).sin_cos();
            z += a * cos;
            zd -= a * omega * sin;
        }
        z_w.push(z);
        zdot_w.push(zd);
    }

    Ok(WaveRealization {
        dt,
        z_w,
        zdot_w,
        phases,
    })
}

/// Displacement variance predicted by the sampled spectrum, `sum S(f_i) df`.
pub fn spectral_variance(spectrum: &[(f64, f64)], df: f64) -> f64 {
    spectrum.iter().map(|&(_, s)| s * df).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_scale_params() -> JonswapParams {
        JonswapParams {
            k_w: 0.016,
            ..JonswapParams::default()
        }
    }

    #[test]
    fn density_at_peak_collapses_enhancement_exponent() {
        for params in [JonswapParams::default(), small_scale_params()] {
            let fp = params.f_p;
            let expected = params.alpha_w * params.g.powi(2) / params.k_w.powi(4)
                * fp.powi(-5)
                * (-1.25f64).exp()
                * params.gamma_w;
            let s = spectral_density(&params, fp).unwrap();
            assert!(((s - expected) / expected).abs() < 1e-14);
        }
    }

    #[test]
    fn density_decays_far_above_peak() {
        let p = JonswapParams::default();
        let peak = spectral_density(&p, p.f_p).unwrap();
        let far = spectral_density(&p, 100.0 * p.f_p).unwrap();
        assert!(far < 1e-6 * peak);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let f = p.f_p * (2.0 + i as f64);
            let s = spectral_density(&p, f).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn density_rejects_non_positive_frequency() {
        let p = JonswapParams::default();
        assert_eq!(
            spectral_density(&p, 0.0),
            Err(WaveError::NonPositiveFrequency(0.0))
        );
        assert!(spectral_density(&p, -1.0).is_err());
        assert!(spectral_density(&p, f64::NAN).is_err());
    }

    #[test]
    fn two_bin_grid_matches_point_evaluations() {
        let p = JonswapParams::default();
        let grid = FrequencyGrid::new(p.f_p, 2.0 * p.f_p, 2).unwrap();
        let s = sample_spectrum(&p, &grid).unwrap();
        assert_eq!(s.len(), 2);
        for (i, f) in [p.f_p, 2.0 * p.f_p].into_iter().enumerate() {
            assert_eq!(s[i].0, f);
            let want = spectral_density(&p, f).unwrap();
            assert!((s[i].1 - want).abs() <= 1e-14 * want);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(0.0, 1.0, 10).is_err());
        assert!(FrequencyGrid::new(0.5, 0.5, 10).is_err());
        assert!(FrequencyGrid::new(0.1, 1.0, 1).is_err());
        let g = FrequencyGrid::new(0.1, 1.0, 10).unwrap();
        assert!((g.df() - 0.1).abs() < 1e-15);
        assert_eq!(g.frequency(9), 1.0);
    }

    #[test]
    fn params_validation() {
        let mut p = JonswapParams::default();
        p.gamma_w = 0.5;
        assert!(matches!(
            p.validate(),
            Err(WaveError::InvalidParameter {
                field: "gamma_w",
                ..
            })
        ));
        let mut p = JonswapParams::default();
        p.k_w = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_spectrum_gives_still_platform() {
        let grid = FrequencyGrid::default();
        let zero: Vec<(f64, f64)> = grid.frequencies().map(|f| (f, 0.0)).collect();
        let w = synthesize_from_spectrum(&zero, grid.df(), 10.0, 0.01, 7).unwrap();
        assert_eq!(w.len(), 1001);
        assert!(w.z_w.iter().all(|&z| z == 0.0));
        assert!(w.zdot_w.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn same_seed_same_realization() {
        let p = JonswapParams::default();
        let g = FrequencyGrid::default();
        let a = synthesize_wave(&p, &g, 10.0, 0.01, 42).unwrap();
        let b = synthesize_wave(&p, &g, 10.0, 0.01, 42).unwrap();
        let c = synthesize_wave(&p, &g, 10.0, 0.01, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.z_w, c.z_w);
        assert!(a.phases.iter().all(|&phi| (0.0..TAU).contains(&phi)));
        assert_eq!(a.phases.len(), g.n_bins);
    }

    #[test]
    fn nyquist_violation_is_rejected() {
        let p = JonswapParams::default();
        let g = FrequencyGrid::new(0.02, 30.0, 64).unwrap();
        let err = synthesize_wave(&p, &g, 10.0, 0.05, 1).unwrap_err();
        assert!(matches!(err, WaveError::Nyquist { .. }));
    }

    #[test]
    fn central_difference_matches_analytic_velocity() {
        let p = JonswapParams::default();
        let g = FrequencyGrid::default();
        let dt = 0.01;
        let w = synthesize_wave(&p, &g, 60.0, dt, 5).unwrap();
        let scale = w.zdot_w.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for k in 1..w.len() - 1 {
            let fd = (w.z_w[k + 1] - w.z_w[k - 1]) / (2.0 * dt);
            assert!((fd - w.zdot_w[k]).abs() < 0.01 * scale, "k = {k}");
        }
    }

    #[test]
    fn sample_count_covers_endpoints() {
        assert_eq!(sample_count(10.0, 0.01), 1001);
        assert_eq!(sample_count(1.0, 0.3), 4);
    }
}
