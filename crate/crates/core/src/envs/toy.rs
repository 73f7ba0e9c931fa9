//! Small environments for tests and examples.

use crate::error::{Error, Result};
use crate::mdp::{Action, ActionSpace, CmdpSpec, Environment, Info, Transition};

/// Emits the same task and safety cost every step.
#[derive(Clone, Debug)]
pub struct ConstantCostEnv {
    spec: CmdpSpec,
    task_cost: f64,
    safety_cost: f64,
    t: usize,
}

impl ConstantCostEnv {
    pub fn new(task_cost: f64, safety_cost: f64, horizon: usize, gamma_l: f64) -> Result<Self> {
        let spec = CmdpSpec {
            state_dim: 1,
            action_space: ActionSpace::Box { lower: vec![-1.0], upper: vec![1.0] },
            gamma_c: 1.0,
            gamma_l,
            budget_d: 0.0,
            horizon,
        };
        spec.validate()?;
        Ok(ConstantCostEnv { spec, task_cost, safety_cost, t: 0 })
    }
}

impl Environment for ConstantCostEnv {
    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>> {
        self.t = 0;
        Ok(vec![0.0])
    }

    fn step(&mut self, _action: &Action) -> Result<Transition> {
        self.t += 1;
        Ok(Transition {
            observation: vec![self.t as f64],
            task_cost: self.task_cost,
            safety_cost: self.safety_cost,
            done: self.t >= self.spec.horizon,
            info: Info::new(),
        })
    }
}

/// One-step linear system `x' = x + a` with cost `x'^2 + r a^2` from
/// `x = x0`; the optimal action is `-x0 / (1 + r)`.
#[derive(Clone, Debug)]
pub struct QuadraticToy {
    spec: CmdpSpec,
    x0: f64,
    r: f64,
    x: f64,
}

impl QuadraticToy {
    pub fn new(x0: f64, r: f64) -> Result<Self> {
        if !(r >= 0.0) {
            return Err(Error::spec("control weight must be nonnegative"));
        }
        let spec = CmdpSpec {
            state_dim: 1,
            action_space: ActionSpace::Box { lower: vec![-2.0], upper: vec![2.0] },
            gamma_c: 1.0,
            gamma_l: 1.0,
            budget_d: 0.0,
            horizon: 1,
        };
        Ok(QuadraticToy { spec, x0, r, x: x0 })
    }

    pub fn cost(&self, a: f64) -> f64 {
        let next = self.x0 + a;
        next * next + self.r * a * a
    }

    pub fn optimal_action(&self) -> f64 {
        (-self.x0 / (1.0 + self.r)).clamp(-2.0, 2.0)
    }
}

impl Environment for QuadraticToy {
    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>> {
        self.x = self.x0;
        Ok(vec![self.x])
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        let a = action.scalar()?.clamp(-2.0, 2.0);
        let cost = self.cost(a);
        self.x += a;
        Ok(Transition { observation: vec![self.x], task_cost: cost, safety_cost: 0.0, done: true, info: Info::new() })
    }
}
