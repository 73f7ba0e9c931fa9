//! Exhaustive search over open-loop action sequences of a deterministic
//! c-MDP. Used as the independent reference for the augmented solver.

use serde::{Deserialize, Serialize};

use super::finite::FiniteCmdp;
use crate::error::{Error, Result};

pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SafeOptimum {
    Feasible { cost: f64, actions: Vec<usize> },
    Infeasible,
}

impl SafeOptimum {
    pub fn cost(&self) -> Option<f64> {
        match self {
            SafeOptimum::Feasible { cost, .. } => Some(*cost),
            SafeOptimum::Infeasible => None,
        }
    }
}

/// Minimum discounted task cost over all action sequences of length
/// `horizon` from the start state whose discounted safety cost stays within
/// the budget. Ties keep the lexicographically first sequence.
pub fn brute_force_safe_optimum(cmdp: &FiniteCmdp, horizon: usize) -> Result<SafeOptimum> {
    cmdp.validate()?;
    let count = (cmdp.num_actions as u128).checked_pow(horizon as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { count, limit: ENUMERATION_LIMIT });
    }
    let start = cmdp.initial_state().ok_or_else(|| Error::spec("brute force needs a single start state"))?;
    let next: Vec<Vec<usize>> = (0..cmdp.num_states)
        .map(|s| (0..cmdp.num_actions).map(|a| cmdp.successor(s, a)).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    let na = cmdp.num_actions;
    let mut seq = vec![0usize; horizon];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let (mut s, mut task, mut safety, mut dc, mut dl) = (start, 0.0, 0.0, 1.0, 1.0);
        for &a in &seq {
            task += dc * cmdp.task_cost[s][a];
            safety += dl * cmdp.safety_cost[s][a];
            dc *= cmdp.gamma_c;
            dl *= cmdp.gamma_l;
            s = next[s][a];
        }
        if safety <= cmdp.budget_d && best.as_ref().is_none_or(|(b, _)| task < *b) {
            best = Some((task, seq.clone()));
        }
        // odometer increment, last position fastest
        let mut i = horizon;
        loop {
            if i == 0 {
                return Ok(match best {
                    Some((cost, actions)) => SafeOptimum::Feasible { cost, actions },
                    None => SafeOptimum::Infeasible,
                });
            }
            i -= 1;
            seq[i] += 1;
            if seq[i] < na {
                break;
            }
            seq[i] = 0;
        }
    }
}
