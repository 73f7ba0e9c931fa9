use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mdp::{Action, ActionSpace, CmdpSpec, Environment, Info, Outcome, Transition};
use crate::seed::{self, SimRng, STREAM_ENV};
use crate::solver::FiniteCmdp;

/// Runs a [`FiniteCmdp`] as an environment. The observation is `[s]`.
///
/// An episode ends after `horizon` steps or on entering an absorbing state.
#[derive(Clone, Debug)]
pub struct FiniteCmdpEnv {
    model: Arc<FiniteCmdp>,
    spec: CmdpSpec,
    rng: SimRng,
    state: usize,
    t: usize,
    start: Option<usize>,
}

impl FiniteCmdpEnv {
    pub fn new(model: FiniteCmdp) -> Result<Self> {
        model.validate()?;
        let spec = CmdpSpec {
            state_dim: 1,
            action_space: ActionSpace::Discrete { n: model.num_actions },
            gamma_c: model.gamma_c,
            gamma_l: model.gamma_l,
            budget_d: model.budget_d,
            horizon: model.horizon,
        };
        Ok(FiniteCmdpEnv {
            model: Arc::new(model),
            spec,
            rng: seed::stream(0, STREAM_ENV),
            state: 0,
            t: 0,
            start: None,
        })
    }

    /// Resets always start from `s` instead of sampling the initial
    /// distribution.
    pub fn with_start(mut self, s: usize) -> Result<Self> {
        if s >= self.model.num_states {
            return Err(Error::config(format!("start state {s} out of range")));
        }
        self.start = Some(s);
        Ok(self)
    }

    pub fn model(&self) -> &FiniteCmdp {
        &self.model
    }

    pub fn state(&self) -> usize {
        self.state
    }

    fn advance(&mut self, action: &Action) -> Result<Outcome> {
        let a = action.discrete_index()?;
        if a >= self.model.num_actions {
            return Err(Error::InvalidAction(format!("action {a} out of range")));
        }
        let s = self.state;
        let task_cost = self.model.task_cost[s][a];
        let safety_cost = self.model.safety_cost[s][a];
        self.state = self.model.sample_next(s, a, &mut self.rng);
        self.t += 1;
        let done = self.t >= self.model.horizon || self.model.is_absorbing(self.state);
        Ok(Outcome { task_cost, safety_cost, done })
    }
}

impl Environment for FiniteCmdpEnv {
    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.rng = seed::stream(seed, STREAM_ENV);
        self.state = match self.start {
            Some(s) => s,
            None => self.model.sample_initial(&mut self.rng),
        };
        self.t = 0;
        Ok(vec![self.state as f64])
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        let out = self.advance(action)?;
        Ok(Transition {
            observation: vec![self.state as f64],
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
