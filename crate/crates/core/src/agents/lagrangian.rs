//! Lagrangian baseline: best response to `c + lambda * l`, with `lambda`
//! moved by projected gradient ascent on the episodic constraint gap.

use serde::{Deserialize, Serialize};

use crate::envs::FiniteCmdpEnv;
use crate::error::{Error, Result};
use crate::mdp::{rollout, Action, Environment, Policy};
use crate::seed;
use crate::solver::FiniteCmdp;

pub const LAMBDA_CAP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianState {
    pub lambda: f64,
    pub penalty_lr: f64,
    /// Last observed episodic safety total.
    pub running_constraint_estimate: f64,
    /// Set once `lambda` has been clipped at [`LAMBDA_CAP`]; a sign the
    /// budget is infeasible.
    #[serde(default)]
    pub capped: bool,
}

impl Default for LagrangianState {
    fn default() -> Self {
        LagrangianState { lambda: 1.0, penalty_lr: 5e-2, running_constraint_estimate: 0.0, capped: false }
    }
}

/// `lambda <- clip(lambda + lr * (observed - d), 0, LAMBDA_CAP)`.
pub fn lagrangian_update(ls: &LagrangianState, observed_safety_total: f64, d: f64) -> Result<LagrangianState> {
    if !(ls.penalty_lr > 0.0) {
        return Err(Error::config("penalty_lr must be positive"));
    }
    let raw = ls.lambda + ls.penalty_lr * (observed_safety_total - d);
    let capped = ls.capped || raw > LAMBDA_CAP;
    Ok(LagrangianState {
        lambda: raw.clamp(0.0, LAMBDA_CAP),
        penalty_lr: ls.penalty_lr,
        running_constraint_estimate: observed_safety_total,
        capped,
    })
}

/// Deterministic time-indexed policy over a tabular environment; the first
/// observation component is the state index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeIndexedPolicy {
    pub stages: Vec<Vec<usize>>,
    #[serde(skip)]
    t: usize,
}

impl TimeIndexedPolicy {
    pub fn new(stages: Vec<Vec<usize>>) -> Self {
        TimeIndexedPolicy { stages, t: 0 }
    }

    pub fn action(&self, t: usize, s: usize) -> usize {
        self.stages[t.min(self.stages.len() - 1)][s]
    }
}

impl<E: Environment + ?Sized> Policy<E> for TimeIndexedPolicy {
    fn reset(&mut self, _seed: u64) {
        self.t = 0;
    }

    fn act(&mut self, _env: &E, observation: &[f64]) -> Result<Action> {
        let s = observation[0] as usize;
        let a = self.action(self.t, s);
        self.t += 1;
        Ok(Action::Discrete(a))
    }
}

/// Optimal finite-horizon policy for the task cost `c + lambda * l`, by
/// backward induction. Ties go to the lowest action index. Also returns the
/// time-0 values.
pub fn best_response(cmdp: &FiniteCmdp, lambda: f64) -> (TimeIndexedPolicy, Vec<f64>) {
    let m = cmdp.penalized(lambda);
    let (ns, na) = (m.num_states, m.num_actions);
    let mut v = vec![0.0; ns];
    let mut stages = Vec::with_capacity(m.horizon);
    for _ in 0..m.horizon {
        let mut next = vec![0.0; ns];
        let mut stage = vec![0; ns];
        for s in 0..ns {
            let mut best = f64::INFINITY;
            for a in 0..na {
                let ev: f64 = m.transition[s][a].iter().zip(&v).map(|(p, vn)| p * vn).sum();
                let q = m.task_cost[s][a] + m.gamma_c * ev;
                if a == 0 || q < best - 1e-12 * best.abs().max(1.0) {
                    best = q;
                    stage[s] = a;
                }
            }
            next[s] = best;
        }
        v = next;
        stages.push(stage);
    }
    stages.reverse();
    (TimeIndexedPolicy::new(stages), v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianConfig {
    pub iterations: usize,
    /// Episodes averaged per multiplier update.
    pub batch_episodes: usize,
    pub penalty_lr: f64,
    pub initial_lambda: f64,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        LagrangianConfig { iterations: 200, batch_episodes: 30, penalty_lr: 5e-2, initial_lambda: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianOutcome {
    pub policy: TimeIndexedPolicy,
    pub state: LagrangianState,
    pub lambda_history: Vec<f64>,
    pub safety_history: Vec<f64>,
}

/// Alternates best responses and multiplier updates, estimating the
/// expected safety total from `batch_episodes` sampled episodes.
pub fn train_lagrangian(cmdp: &FiniteCmdp, cfg: &LagrangianConfig, seed_value: u64) -> Result<LagrangianOutcome> {
    if cfg.iterations == 0 || cfg.batch_episodes == 0 {
        return Err(Error::config("iterations and batch_episodes must be positive"));
    }
    if !(cfg.initial_lambda >= 0.0) {
        return Err(Error::config("initial_lambda must be nonnegative"));
    }
    let mut env = FiniteCmdpEnv::new(cmdp.clone())?;
    let mut state = LagrangianState { lambda: cfg.initial_lambda, penalty_lr: cfg.penalty_lr, ..Default::default() };
    let mut lambda_history = vec![state.lambda];
    let mut safety_history = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let (mut policy, _) = best_response(cmdp, state.lambda);
        let mut total = 0.0;
        for ep in 0..cfg.batch_episodes {
            let s = seed::derive(seed_value, &[it as u64, ep as u64]);
            total += rollout(&mut env, &mut policy, cmdp.horizon, s)?.budget_used;
        }
        let mean = total / cfg.batch_episodes as f64;
        safety_history.push(mean);
        state = lagrangian_update(&state, mean, cmdp.budget_d)?;
        lambda_history.push(state.lambda);
    }
    let (policy, _) = best_response(cmdp, state.lambda);
    Ok(LagrangianOutcome { policy, state, lambda_history, safety_history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_examples() {
        let ls = LagrangianState::default();
        assert_eq!(lagrangian_update(&ls, 7.0, 7.0).unwrap().lambda, 1.0);
        let zero = LagrangianState { lambda: 0.0, ..ls.clone() };
        assert_eq!(lagrangian_update(&zero, 3.0, 7.0).unwrap().lambda, 0.0);
        assert!((lagrangian_update(&ls, 40.0, 30.0).unwrap().lambda - 1.5).abs() < 1e-15);
    }

    #[test]
    fn cap_flags_infeasible_budgets() {
        let ls = LagrangianState { lambda: LAMBDA_CAP - 1.0, ..Default::default() };
        let next = lagrangian_update(&ls, 1e9, 0.0).unwrap();
        assert_eq!(next.lambda, LAMBDA_CAP);
        assert!(next.capped);
    }

    #[test]
    fn bad_learning_rate() {
        let ls = LagrangianState { penalty_lr: 0.0, ..Default::default() };
        assert!(lagrangian_update(&ls, 1.0, 0.0).is_err());
    }
}
