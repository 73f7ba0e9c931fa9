//! Pendulum swing-up with an unsafe angular band.
//!
//! The angle `theta` is measured from the upright position and kept wrapped
//! to `[-pi, pi)`. The task signal is a reward in `[0, 1]` (1 when upright
//! and still); the safety cost is incurred while the pole lies in the band
//! `[-25, 75]` degrees and peaks at 25 degrees.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, ActionSpace, CmdpSpec, Environment, Info, Outcome, Transition};
use crate::seed::{self, STREAM_ENV};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub torque_limit: f64,
    pub angular_velocity_limit: f64,
    pub unsafe_angle_delta_deg: f64,
    pub horizon: usize,
    pub gamma_c: f64,
    pub gamma_l: f64,
    pub budget_d: f64,
    /// Initial angle is uniform on `pi +/- init_theta_halfwidth`.
    pub init_theta_halfwidth: f64,
    /// Initial angular velocity is uniform on `+/- init_theta_dot_halfwidth`.
    pub init_theta_dot_halfwidth: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            torque_limit: 2.0,
            angular_velocity_limit: 8.0,
            unsafe_angle_delta_deg: 25.0,
            horizon: 200,
            gamma_c: 0.99,
            gamma_l: 1.0,
            budget_d: 30.0,
            init_theta_halfwidth: 0.1,
            init_theta_dot_halfwidth: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// Reward-valued task signal; 1 at the upright rest state.
pub fn pendulum_task_cost(theta: f64, theta_dot: f64, a: f64) -> f64 {
    1.0 - (theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * a * a) / (PI * PI + 6.404)
}

/// Safety cost for an angle in degrees from upright, with the unsafe angle
/// at 25 degrees. The angle is wrapped to `(-180, 180]` first.
pub fn pendulum_safety_cost(theta_deg: f64) -> f64 {
    safety_cost_with_delta(theta_deg, 25.0)
}

pub fn safety_cost_with_delta(theta_deg: f64, delta: f64) -> f64 {
    let mut th = (theta_deg + 180.0).rem_euclid(360.0) - 180.0;
    if th == -180.0 {
        th = 180.0;
    }
    if (delta - 50.0..=delta + 50.0).contains(&th) {
        1.0 - (th - delta).abs() / 50.0
    } else {
        0.0
    }
}

/// One semi-implicit Euler step with torque and velocity clipping.
pub fn pendulum_step(params: &PendulumParams, state: PendulumState, action: f64) -> PendulumState {
    let PendulumParams { gravity: g, mass: m, length: l, dt, .. } = *params;
    let u = action.clamp(-params.torque_limit, params.torque_limit);
    let acc = 3.0 * g / (2.0 * l) * state.theta.sin() + 3.0 / (m * l * l) * u;
    let vmax = params.angular_velocity_limit;
    let theta_dot = (state.theta_dot + acc * dt).clamp(-vmax, vmax);
    PendulumState { theta: wrap_angle(state.theta + theta_dot * dt), theta_dot }
}

#[derive(Clone, Debug)]
pub struct PendulumEnv {
    params: PendulumParams,
    spec: CmdpSpec,
    state: PendulumState,
    start: Option<PendulumState>,
    t: usize,
}

impl PendulumEnv {
    pub fn new(params: PendulumParams) -> Result<Self> {
        let spec = CmdpSpec {
            state_dim: 3,
            action_space: ActionSpace::Box { lower: vec![-params.torque_limit], upper: vec![params.torque_limit] },
            gamma_c: params.gamma_c,
            gamma_l: params.gamma_l,
            budget_d: params.budget_d,
            horizon: params.horizon,
        };
        spec.validate()?;
        if !(params.dt > 0.0 && params.mass > 0.0 && params.length > 0.0) {
            return Err(Error::spec("pendulum dt, mass and length must be positive"));
        }
        Ok(PendulumEnv { params, spec, state: PendulumState { theta: PI, theta_dot: 0.0 }, start: None, t: 0 })
    }

    /// Resets always start from `state` instead of the sampled distribution.
    pub fn with_start(mut self, state: PendulumState) -> Self {
        self.start = Some(state);
        self
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.state.theta.cos(), self.state.theta.sin(), self.state.theta_dot]
    }

    fn advance(&mut self, action: &Action) -> Result<Outcome> {
        let a = action.scalar()?;
        if !a.is_finite() {
            return Err(Error::InvalidAction("non-finite torque".into()));
        }
        let u = a.clamp(-self.params.torque_limit, self.params.torque_limit);
        let PendulumState { theta, theta_dot } = self.state;
        let reward = pendulum_task_cost(theta, theta_dot, u);
        let safety = safety_cost_with_delta(theta.to_degrees(), self.params.unsafe_angle_delta_deg);
        self.state = pendulum_step(&self.params, self.state, u);
        self.t += 1;
        Ok(Outcome { task_cost: reward, safety_cost: safety, done: self.t >= self.params.horizon })
    }
}

impl Environment for PendulumEnv {
    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.t = 0;
        self.state = match self.start {
            Some(s) => s,
            None => {
                let mut rng = seed::stream(seed, STREAM_ENV);
                let hw = self.params.init_theta_halfwidth;
                let vw = self.params.init_theta_dot_halfwidth;
                let theta = PI + if hw > 0.0 { rng.random_range(-hw..=hw) } else { 0.0 };
                let theta_dot = if vw > 0.0 { rng.random_range(-vw..=vw) } else { 0.0 };
                PendulumState { theta: wrap_angle(theta), theta_dot }
            }
        };
        Ok(self.observation())
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        let out = self.advance(action)?;
        Ok(Transition {
            observation: self.observation(),
            task_cost: out.task_cost,
            safety_cost: out.safety_cost,
            done: out.done,
            info: Info::new(),
        })
    }

    fn simulate(&mut self, action: &Action) -> Result<Outcome> {
        self.advance(action)
    }
}
