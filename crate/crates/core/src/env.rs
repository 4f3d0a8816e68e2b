//! Landing-phase environment: 1-D vertical VTOL dynamics above a heaving deck.
//!
//! The vehicle state is `x = (z, zdot)` with
//!
//! ```text
//! x1' = x2
//! x2' = -(k_fdz / m) x1 - g + U
//! ```
//!
//! integrated with classical RK4 at a fixed step, the control `U` held
//! constant across the step. Observations are `(z - z_w, zdot)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wave::{self, FrequencyGrid, JonswapParams, WaveError, WaveRealization};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("non-finite state at step {step}: z = {z}, zdot = {zdot}")]
    NumericalFault { step: usize, z: f64, zdot: f64 },
    #[error("attitude is gimbal-singular (cos phi * cos theta = {0})")]
    SingularAttitude(f64),
    #[error("step index {step} exceeds wave realization of {len} samples")]
    WaveExhausted { step: usize, len: usize },
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("action {0:?} does not match the configured action space")]
    ActionMismatch(Action),
    #[error("invalid environment parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error(transparent)]
    Wave(#[from] WaveError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> EnvError {
    EnvError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavParams {
    /// Mass in kg.
    pub mass: f64,
    /// Vertical drag coefficient `k_fdz`, multiplying the height.
    pub drag_z: f64,
    pub gravity: f64,
    /// Initial hover height above the deck, `H0`.
    pub hover_height: f64,
}

impl Default for UavParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            drag_z: 0.1,
            gravity: 9.81,
            hover_height: 5.0,
        }
    }
}

impl UavParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(invalid("mass", format!("must be > 0, got {}", self.mass)));
        }
        if !(self.drag_z.is_finite() && self.drag_z >= 0.0) {
            return Err(invalid(
                "drag_z",
                format!("must be >= 0, got {}", self.drag_z),
            ));
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return Err(invalid(
                "gravity",
                format!("must be > 0, got {}", self.gravity),
            ));
        }
        if !(self.hover_height.is_finite() && self.hover_height > 0.0) {
            return Err(invalid(
                "hover_height",
                format!("must be > 0, got {}", self.hover_height),
            ));
        }
        Ok(())
    }
}

/// Virtual control that holds the vehicle at height `z`: `U0 = (k_fdz/m) z + g`.
pub fn hover_control(params: &UavParams, z: f64) -> f64 {
    params.drag_z / params.mass * z + params.gravity
}

/// Converts the virtual control into rotor thrust, `u = m U / (cos phi cos theta)`.
pub fn thrust_from_virtual(
    params: &UavParams,
    u: f64,
    phi: f64,
    theta: f64,
) -> Result<f64, EnvError> {
    let c = phi.cos() * theta.cos();
    if c.abs() < 1e-12 {
        return Err(EnvError::SingularAttitude(c));
    }
    Ok(params.mass * u / c)
}

/// Time derivative of `(z, zdot)` under control `u`.
fn vertical_rates(params: &UavParams, z: f64, zdot: f64, u: f64) -> (f64, f64) {
    (zdot, -params.drag_z / params.mass * z - params.gravity + u)
}

/// One classical fourth-order Runge-Kutta step with `u` held constant.
pub fn rk4_step(params: &UavParams, z: f64, zdot: f64, u: f64, dt: f64) -> (f64, f64) {
    let (k1z, k1v) = vertical_rates(params, z, zdot, u);
    let (k2z, k2v) = vertical_rates(params, z + 0.5 * dt * k1z, zdot + 0.5 * dt * k1v, u);
    let (k3z, k3v) = vertical_rates(params, z + 0.5 * dt * k2z, zdot + 0.5 * dt * k2v, u);
    let (k4z, k4v) = vertical_rates(params, z + dt * k3z, zdot + dt * k3v, u);
    (
        z + dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z),
        zdot + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

/// Observation `(e_z, zdot)` with `e_z = z - z_w`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvState {
    pub e_z: f64,
    pub zdot: f64,
}

impl EnvState {
    pub fn new(e_z: f64, zdot: f64) -> Self {
        Self { e_z, zdot }
    }

    pub fn is_finite(&self) -> bool {
        self.e_z.is_finite() && self.zdot.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub k1: f64,
    pub k2: f64,
    /// Far-field descent speed of the reference profile (m/s).
    pub v_max: f64,
    /// Decay height of the reference profile (m).
    pub h_c: f64,
    /// Touchdown speed of the reference profile (m/s).
    pub v_td: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 2.0,
            v_max: 2.0,
            h_c: 5.0 / 3.0,
            v_td: 0.1,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(invalid("k1", format!("must be >= 0, got {}", self.k1)));
        }
        if !(self.k2.is_finite() && self.k2 >= 0.0) {
            return Err(invalid("k2", format!("must be >= 0, got {}", self.k2)));
        }
        if !(self.v_td.is_finite() && self.v_td >= 0.0) {
            return Err(invalid("v_td", format!("must be >= 0, got {}", self.v_td)));
        }
        if !(self.v_max.is_finite() && self.v_max > self.v_td) {
            return Err(invalid(
                "v_max",
                format!("must exceed v_td = {}, got {}", self.v_td, self.v_max),
            ));
        }
        if !(self.h_c.is_finite() && self.h_c > 0.0) {
            return Err(invalid("h_c", format!("must be > 0, got {}", self.h_c)));
        }
        Ok(())
    }
}

/// Reference sink rate: `-v_td` at the deck, relaxing exponentially towards
/// `-v_max` with height.
pub fn reference_descent_velocity(e_p: f64, rp: &RewardParams) -> f64 {
    let h = e_p.max(0.0);
    -rp.v_td - (rp.v_max - rp.v_td) * (1.0 - (-h / rp.h_c).exp())
}

/// Tracking reward `-k1 |e_p| - k2 |zdot - zdot_d|`.
pub fn reward(state: &EnvState, zdot_d: f64, rp: &RewardParams) -> f64 {
    -rp.k1 * state.e_z.abs() - rp.k2 * (state.zdot - zdot_d).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    #[default]
    Discrete,
    Continuous,
}

/// An agent's choice. Discrete indices map to `[U0 + dU, U0, U0 - dU]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(f64),
}

pub const DISCRETE_ACTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionSpec {
    pub delta_u: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for ActionSpec {
    fn default() -> Self {
        Self {
            delta_u: 1.5,
            u_min: 0.0,
            u_max: 2.0 * 9.81,
        }
    }
}

impl ActionSpec {
    pub fn validate(&self, uav: &UavParams) -> Result<(), EnvError> {
        if !(self.delta_u.is_finite() && self.delta_u > 0.0) {
            return Err(invalid(
                "delta_u",
                format!("must be > 0, got {}", self.delta_u),
            ));
        }
        let u0 = hover_control(uav, 0.0);
        if !(self.u_min.is_finite() && self.u_min < u0) {
            return Err(invalid(
                "u_min",
                format!("must be below the hover control {u0}, got {}", self.u_min),
            ));
        }
        if !(self.u_max.is_finite() && self.u_max > hover_control(uav, uav.hover_height)) {
            return Err(invalid(
                "u_max",
                format!("must exceed the hover control at H0, got {}", self.u_max),
            ));
        }
        Ok(())
    }

    /// The three admissible discrete controls at hover value `u0`.
    pub fn discrete_controls(&self, u0: f64) -> [f64; DISCRETE_ACTIONS] {
        [u0 + self.delta_u, u0, u0 - self.delta_u]
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.u_min, self.u_max)
    }
}

/// Fixed linear scaling applied to observations before they reach a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationScale {
    pub height: f64,
    pub velocity: f64,
}

impl Default for ObservationScale {
    fn default() -> Self {
        Self {
            height: 5.0,
            velocity: 2.0,
        }
    }
}

impl ObservationScale {
    pub fn features(&self, s: &EnvState) -> [f64; 2] {
        [s.e_z / self.height, s.zdot / self.velocity]
    }
}

/// Everything needed to build a [`LandingEnv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub dt: f64,
    /// Per-episode step budget `k_f`.
    pub max_steps: usize,
    /// Chosen by the agent, not the configuration file.
    #[serde(skip)]
    pub mode: ActionMode,
    /// Height-error clamp `E_max`; leaving `[-E_max, E_max]` aborts the episode.
    pub height_clamp: f64,
    /// Velocity clamp `V_max`.
    pub velocity_clamp: f64,
    pub uav: UavParams,
    pub reward: RewardParams,
    pub action: ActionSpec,
    pub wave: JonswapParams,
    pub grid: FrequencyGrid,
    pub observation: ObservationScale,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            max_steps: 1000,
            mode: ActionMode::Discrete,
            height_clamp: 10.0,
            velocity_clamp: 10.0,
            uav: UavParams::default(),
            reward: RewardParams::default(),
            action: ActionSpec::default(),
            wave: JonswapParams::default(),
            grid: FrequencyGrid::default(),
            observation: ObservationScale::default(),
        }
    }
}

impl EnvConfig {
    pub fn with_mode(mut self, mode: ActionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be >= 1"));
        }
        if !(self.height_clamp.is_finite() && self.height_clamp > self.uav.hover_height) {
            return Err(invalid(
                "height_clamp",
                format!("must exceed hover_height, got {}", self.height_clamp),
            ));
        }
        if !(self.velocity_clamp.is_finite() && self.velocity_clamp > 0.0) {
            return Err(invalid(
                "velocity_clamp",
                format!("must be > 0, got {}", self.velocity_clamp),
            ));
        }
        if !(self.observation.height > 0.0 && self.observation.velocity > 0.0) {
            return Err(invalid("observation", "scales must be > 0"));
        }
        self.uav.validate()?;
        self.reward.validate()?;
        self.action.validate(&self.uav)?;
        self.wave.validate()?;
        self.grid.validate()?;
        let nyquist = 1.0 / (2.0 * self.dt);
        if self.grid.f_max >= nyquist {
            return Err(WaveError::Nyquist {
                f_max: self.grid.f_max,
                nyquist,
                dt: self.dt,
            }
            .into());
        }
        Ok(())
    }

    /// Episode length in seconds.
    pub fn horizon(&self) -> f64 {
        self.max_steps as f64 * self.dt
    }

    /// Terminal reward applied when a state clamp is violated.
    pub fn abort_penalty(&self) -> f64 {
        -self.reward.k1 * self.height_clamp * 10.0
    }

    pub fn synthesize_wave(&self, seed: u64) -> Result<WaveRealization, WaveError> {
        // A one-step budget still needs two samples.
        let duration = self.horizon().max(1.5 * self.dt);
        wave::synthesize_wave(&self.wave, &self.grid, duration, self.dt, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Contact,
    Timeout,
    /// A state clamp was exceeded.
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Control actually integrated over the step.
    pub control: f64,
    pub termination: Option<Termination>,
    /// `|zdot - zdot_w|` at the contact step.
    pub impact_velocity: Option<f64>,
    pub z: f64,
    pub z_w: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// A single learning-time transition `(s, a, r, s', done)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: EnvState,
    pub a: Action,
    pub r: f64,
    pub s_next: EnvState,
    pub done: bool,
}

/// Stateful episode runner over one [`WaveRealization`].
#[derive(Debug, Clone)]
pub struct LandingEnv {
    config: EnvConfig,
    wave: WaveRealization,
    z: f64,
    zdot: f64,
    k: usize,
    done: bool,
}

impl LandingEnv {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let wave = WaveRealization::calm(config.max_steps + 1, config.dt);
        Ok(Self {
            config,
            wave,
            z: 0.0,
            zdot: 0.0,
            k: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn wave(&self) -> &WaveRealization {
        &self.wave
    }

    /// Starts an episode over a freshly synthesized wave.
    pub fn reset(&mut self, seed: u64) -> Result<EnvState, EnvError> {
        let wave = self.config.synthesize_wave(seed)?;
        self.reset_with_wave(wave)
    }

    /// Starts an episode over a caller-supplied wave (used for calm-sea checks).
    pub fn reset_with_wave(&mut self, wave: WaveRealization) -> Result<EnvState, EnvError> {
        if wave.len() < 2 {
            return Err(EnvError::WaveExhausted {
                step: 1,
                len: wave.len(),
            });
        }
        self.z = wave.z_w[0] + self.config.uav.hover_height;
        self.zdot = 0.0;
        self.k = 0;
        self.done = false;
        self.wave = wave;
        Ok(self.state())
    }

    pub fn state(&self) -> EnvState {
        EnvState::new(self.z - self.wave.z_w[self.k], self.zdot)
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn height(&self) -> f64 {
        self.z
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Control value for `action` at the current height, clamped in continuous mode.
    pub fn control_for(&self, action: Action) -> Result<f64, EnvError> {
        match (self.config.mode, action) {
            (ActionMode::Discrete, Action::Discrete(i)) if i < DISCRETE_ACTIONS => {
                let u0 = hover_control(&self.config.uav, self.z);
                Ok(self.config.action.discrete_controls(u0)[i])
            }
            (ActionMode::Continuous, Action::Continuous(u)) if u.is_finite() => {
                Ok(self.config.action.clamp(u))
            }
            _ => Err(EnvError::ActionMismatch(action)),
        }
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        let u = self.control_for(action)?;
        self.step_control(u)
    }

    /// Advances one step under raw control `u` (no action-space mapping).
    pub fn step_control(&mut self, u: f64) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let next = self.k + 1;
        if next >= self.wave.len() {
            return Err(EnvError::WaveExhausted {
                step: next,
                len: self.wave.len(),
            });
        }
        let cfg = &self.config;
        let (z, zdot) = rk4_step(&cfg.uav, self.z, self.zdot, u, cfg.dt);
        if !(z.is_finite() && zdot.is_finite()) {
            self.done = true;
            return Err(EnvError::NumericalFault {
                step: next,
                z,
                zdot,
            });
        }
        self.z = z;
        self.zdot = zdot;
        self.k = next;

        let z_w = self.wave.z_w[next];
        let state = EnvState::new(z - z_w, zdot);
        let zdot_d = reference_descent_velocity(state.e_z, &cfg.reward);
        let mut r = reward(&state, zdot_d, &cfg.reward);

        let mut impact_velocity = None;
        let termination = if state.e_z <= 0.0 {
            impact_velocity = Some((zdot - self.wave.zdot_w[next]).abs());
            Some(Termination::Contact)
        } else if state.e_z.abs() > cfg.height_clamp || zdot.abs() > cfg.velocity_clamp {
            r = cfg.abort_penalty();
            Some(Termination::Aborted)
        } else if next >= cfg.max_steps {
            Some(Termination::Timeout)
        } else {
            None
        };
        self.done = termination.is_some();

        Ok(StepOutcome {
            state,
            reward: r,
            done: self.done,
            info: StepInfo {
                control: u,
                termination,
                impact_velocity,
                z,
                z_w,
                time: next as f64 * cfg.dt,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calm_env(mut cfg: EnvConfig) -> (LandingEnv, EnvState) {
        cfg.max_steps = cfg.max_steps.max(1);
        let wave = WaveRealization::calm(cfg.max_steps + 1, cfg.dt);
        let mut env = LandingEnv::new(cfg).unwrap();
        let s = env.reset_with_wave(wave).unwrap();
        (env, s)
    }

    #[test]
    fn hover_control_values() {
        let mut p = UavParams::default();
        assert_eq!(hover_control(&p, 0.0), p.gravity);
        assert!((hover_control(&p, 5.0) - 10.31).abs() < 1e-12);
        p.drag_z = 0.0;
        assert_eq!(hover_control(&p, 123.0), p.gravity);
    }

    #[test]
    fn thrust_conversion() {
        let mut p = UavParams::default();
        p.mass = 2.0;
        assert!((thrust_from_virtual(&p, 9.81, 0.0, 0.0).unwrap() - 19.62).abs() < 1e-12);
        p.mass = 1.0;
        let u = thrust_from_virtual(&p, 10.0, std::f64::consts::FRAC_PI_3, 0.0).unwrap();
        assert!((u - 20.0).abs() < 1e-12);
        assert!(matches!(
            thrust_from_virtual(&p, 10.0, std::f64::consts::FRAC_PI_2, 0.0),
            Err(EnvError::SingularAttitude(_))
        ));
    }

    #[test]
    fn reference_descent_profile() {
        let rp = RewardParams {
            v_max: 2.0,
            v_td: 0.1,
            h_c: 1.0,
            ..RewardParams::default()
        };
        assert_eq!(reference_descent_velocity(0.0, &rp), -0.1);
        assert_eq!(reference_descent_velocity(-3.0, &rp), -0.1);
        let expected = -0.1 - 1.9 * (1.0 - (-1.0f64).exp());
        assert!((reference_descent_velocity(1.0, &rp) - expected).abs() < 1e-15);
        assert!((expected - (-1.301)).abs() < 1e-3);
        assert!((reference_descent_velocity(20.0, &rp) + 2.0).abs() < 1e-6);
    }

    #[test]
    fn reward_values() {
        let rp = RewardParams {
            k1: 1.0,
            k2: 2.0,
            ..RewardParams::default()
        };
        assert_eq!(reward(&EnvState::new(0.0, -0.4), -0.4, &rp), 0.0);
        assert_eq!(reward(&EnvState::new(1.0, 0.5), 0.0, &rp), -2.0);
        assert_eq!(
            reward(&EnvState::new(1.0, 0.5), 0.0, &rp),
            reward(&EnvState::new(-1.0, -0.5), 0.0, &rp)
        );
    }

    #[test]
    fn reset_places_vehicle_at_hover_height() {
        let (_, s) = calm_env(EnvConfig::default());
        assert_eq!(s, EnvState::new(5.0, 0.0));

        let mut env = LandingEnv::new(EnvConfig::default()).unwrap();
        let a = env.reset(9).unwrap();
        let wa = env.wave().clone();
        let b = env.reset(9).unwrap();
        assert_eq!(a, b);
        assert_eq!(&wa, env.wave());
        for seed in 0..100 {
            let s = env.reset(seed).unwrap();
            assert!((s.e_z - 5.0).abs() < 1e-12);
            assert_eq!(s.zdot, 0.0);
        }
    }

    #[test]
    fn hover_holds_height_on_calm_sea() {
        let (mut env, _) = calm_env(EnvConfig::default());
        for _ in 0..999 {
            let out = env.step(Action::Discrete(1)).unwrap();
            assert!((out.state.e_z - 5.0).abs() < 1e-9);
        }
        let last = env.step(Action::Discrete(1)).unwrap();
        assert_eq!(last.info.termination, Some(Termination::Timeout));
        assert!(last.done);
        assert_eq!(
            env.step(Action::Discrete(1)),
            Err(EnvError::EpisodeFinished)
        );
    }

    #[test]
    fn free_fall_matches_closed_form() {
        let mut cfg = EnvConfig::default().with_mode(ActionMode::Continuous);
        cfg.uav.drag_z = 0.0;
        cfg.height_clamp = 1000.0;
        cfg.uav.hover_height = 500.0;
        cfg.velocity_clamp = 100.0;
        let (mut env, _) = calm_env(cfg);
        for n in 1..=300 {
            let out = env.step(Action::Continuous(0.0)).unwrap();
            let expected = -9.81 * n as f64 * 0.01;
            assert!((out.state.zdot - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn discrete_actions_offset_hover() {
        let (env, _) = calm_env(EnvConfig::default());
        let u0 = hover_control(&env.config().uav, env.height());
        assert_eq!(env.control_for(Action::Discrete(0)).unwrap(), u0 + 1.5);
        assert_eq!(env.control_for(Action::Discrete(1)).unwrap(), u0);
        assert_eq!(env.control_for(Action::Discrete(2)).unwrap(), u0 - 1.5);
        assert!(env.control_for(Action::Discrete(3)).is_err());
        assert!(env.control_for(Action::Continuous(1.0)).is_err());
    }

    #[test]
    fn continuous_controls_are_clamped() {
        let (env, _) = calm_env(EnvConfig::default().with_mode(ActionMode::Continuous));
        assert_eq!(env.control_for(Action::Continuous(-5.0)).unwrap(), 0.0);
        assert_eq!(env.control_for(Action::Continuous(100.0)).unwrap(), 19.62);
        assert_eq!(env.control_for(Action::Continuous(3.0)).unwrap(), 3.0);
        assert!(env.control_for(Action::Continuous(f64::NAN)).is_err());
    }

    #[test]
    fn contact_reports_impact_velocity() {
        let mut cfg = EnvConfig::default().with_mode(ActionMode::Continuous);
        cfg.uav.drag_z = 0.0;
        let (mut env, _) = calm_env(cfg);
        let mut steps = 0;
        loop {
            let out = env.step(Action::Continuous(0.0)).unwrap();
            steps += 1;
            if out.done {
                assert_eq!(out.info.termination, Some(Termination::Contact));
                let v = out.info.impact_velocity.unwrap();
                assert!((v - 9.81 * steps as f64 * 0.01).abs() < 1e-6);
                break;
            }
        }
        // sqrt(2 * 5 / 9.81) = 1.0096 s
        assert_eq!(steps, 101);
    }

    #[test]
    fn clamp_violation_aborts_with_penalty() {
        let mut cfg = EnvConfig::default().with_mode(ActionMode::Continuous);
        cfg.velocity_clamp = 1.0;
        let (mut env, _) = calm_env(cfg.clone());
        let mut last = None;
        for _ in 0..1000 {
            let out = env.step(Action::Continuous(cfg.action.u_max)).unwrap();
            if out.done {
                last = Some(out);
                break;
            }
        }
        let out = last.unwrap();
        assert_eq!(out.info.termination, Some(Termination::Aborted));
        assert_eq!(out.reward, -100.0);
    }

    #[test]
    fn non_finite_control_is_a_fault() {
        let (mut env, _) = calm_env(EnvConfig::default());
        assert!(matches!(
            env.step_control(f64::INFINITY),
            Err(EnvError::NumericalFault { .. })
        ));
        assert!(env.is_done());
    }

    #[test]
    fn config_validation_names_fields() {
        let mut cfg = EnvConfig::default();
        cfg.uav.mass = -1.0;
        assert!(matches!(
            cfg.validate(),
            Err(EnvError::InvalidParameter { field: "mass", .. })
        ));
        let mut cfg = EnvConfig::default();
        cfg.dt = 0.6;
        assert!(matches!(
            cfg.validate(),
            Err(EnvError::Wave(WaveError::Nyquist { .. }))
        ));
    }
}
