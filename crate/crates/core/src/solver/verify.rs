//! Numerical checks of the solver against independent references: the
//! brute-force oracle, the hard-constrained value, and Monte-Carlo safety.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::augmented::{build_saute_mdp, FiniteSauteMdp, Interpolation, ZGrid};
use super::finite::FiniteCmdp;
use super::oracle::{brute_force_safe_optimum, SafeOptimum};
use super::vi::{finite_horizon, hard_constrained_values, ValueTable};
use crate::error::{Error, Result};
use crate::saute::Penalty;
use crate::seed::{self, SimRng, STREAM_POLICY};

/// A tabular decision rule over `(time, state, z node)`.
pub trait TabularDecision: Sync {
    fn decide(&self, t: usize, s: usize, z_node: usize, rng: &mut SimRng) -> usize;
}

impl TabularDecision for ValueTable {
    fn decide(&self, t: usize, s: usize, z_node: usize, _rng: &mut SimRng) -> usize {
        self.action(t, s, z_node)
    }
}

/// Picks every action with equal probability.
#[derive(Clone, Copy, Debug)]
pub struct UniformRandom {
    pub num_actions: usize,
}

impl TabularDecision for UniformRandom {
    fn decide(&self, _t: usize, _s: usize, _z: usize, rng: &mut SimRng) -> usize {
        rng.random_range(0..self.num_actions)
    }
}

/// Counts Monte-Carlo episodes in which the exact safety state goes
/// negative. Episodes last `base.horizon` steps or until an absorbing state.
pub fn almost_sure_check(
    mdp: &FiniteSauteMdp,
    policy: &dyn TabularDecision,
    episodes: usize,
    seed: u64,
) -> Result<usize> {
    if episodes == 0 {
        return Err(Error::config("need at least one episode"));
    }
    let base = &mdp.base;
    let mut violations = 0;
    for e in 0..episodes {
        let mut rng = seed::stream(seed::derive(seed, &[e as u64]), STREAM_POLICY);
        let mut s = base.sample_initial(&mut rng);
        let mut z = base.budget_d;
        for t in 0..base.horizon {
            let zi = mdp.z_grid.nearest(z);
            let a = policy.decide(t, s, zi, &mut rng);
            z = (z - base.safety_cost[s][a]) / base.gamma_l;
            if z < 0.0 {
                violations += 1;
                break;
            }
            s = base.sample_next(s, a, &mut rng);
            if base.is_absorbing(s) {
                break;
            }
        }
    }
    Ok(violations)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub n_values: Vec<f64>,
    /// `V_n` tables at time 0, one per entry of `n_values`.
    pub values: Vec<Vec<Vec<f64>>>,
    /// Hard-constrained value (`+inf` where infeasible).
    pub hard_values: Vec<Vec<f64>>,
    /// Sup-norm gap between `V_n` and the hard-constrained value over the
    /// feasible nodes.
    pub gaps: Vec<f64>,
    pub gaps_nonincreasing: bool,
    pub feasible_nodes: usize,
}

/// Solves the finite-horizon augmented problem for each penalty in
/// `n_list`, checks the values are pointwise nondecreasing in `n`, and
/// measures the distance to the hard-constrained value.
pub fn monotone_convergence_report(cmdp: &FiniteCmdp, z_grid: &ZGrid, n_list: &[f64]) -> Result<MonotoneReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::config("penalty list must be non-empty and ascending"));
    }
    let horizon = cmdp.horizon;
    let mdp = build_saute_mdp(cmdp.clone(), z_grid.clone(), Penalty::Finite(n_list[0]), Interpolation::Nearest)?;
    let values: Vec<Vec<Vec<f64>>> =
        n_list.iter().map(|&n| finite_horizon(&mdp.with_penalty(Penalty::Finite(n)), horizon).values).collect();
    for (i, pair) in values.windows(2).enumerate() {
        for (s, (lo_row, hi_row)) in pair[0].iter().zip(&pair[1]).enumerate() {
            for (zi, (&lo, &hi)) in lo_row.iter().zip(hi_row).enumerate() {
                if lo > hi + 1e-9 {
                    return Err(Error::MonotonicityViolation { state: s, z_node: zi, index: i, lower: lo, upper: hi });
                }
            }
        }
    }
    let hard_values = hard_constrained_values(&mdp, horizon);
    let feasible_nodes = hard_values.iter().flatten().filter(|v| v.is_finite()).count();
    let gaps: Vec<f64> = values
        .iter()
        .map(|table| {
            table
                .iter()
                .flatten()
                .zip(hard_values.iter().flatten())
                .filter(|(_, h)| h.is_finite())
                .map(|(v, h)| (h - v).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let gaps_nonincreasing = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    Ok(MonotoneReport { n_values: n_list.to_vec(), values, hard_values, gaps, gaps_nonincreasing, feasible_nodes })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleComparison {
    pub oracle: SafeOptimum,
    /// Augmented value at the start state and budget node.
    pub saute_value: f64,
    /// Value threshold above which the augmented solve signals infeasibility.
    pub infeasibility_floor: f64,
    pub saute_feasible: bool,
    pub agree: bool,
}

/// Compares the augmented finite-horizon value at `(s0, d)` with the
/// brute-force constrained optimum of a deterministic c-MDP.
///
/// With a finite penalty, a value of at least `n * gamma_c^(H-1)` is read as
/// "infeasible"; `n` must exceed the largest feasible cost for this to be a
/// valid test.
pub fn compare_with_oracle(cmdp: &FiniteCmdp, z_grid: &ZGrid, n: Penalty, tol: f64) -> Result<OracleComparison> {
    let horizon = cmdp.horizon;
    let oracle = brute_force_safe_optimum(cmdp, horizon)?;
    let s0 = cmdp.initial_state().ok_or_else(|| Error::spec("needs a single start state"))?;
    let mdp = build_saute_mdp(cmdp.clone(), z_grid.clone(), n, Interpolation::Nearest)?;
    let table = finite_horizon(&mdp, horizon);
    let saute_value = table.value(s0, mdp.budget_node());
    let infeasibility_floor = n.value() * cmdp.gamma_c.powi(horizon as i32 - 1);
    let saute_feasible = saute_value < infeasibility_floor;
    let agree = match &oracle {
        SafeOptimum::Feasible { cost, .. } => saute_feasible && (saute_value - cost).abs() <= tol,
        SafeOptimum::Infeasible => !saute_feasible,
    };
    Ok(OracleComparison { oracle, saute_value, infeasibility_floor, saute_feasible, agree })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn risky() -> FiniteCmdp {
        // one state; action 0 free but unsafe, action 1 costs 1 and is safe
        FiniteCmdp {
            num_states: 2,
            num_actions: 2,
            transition: vec![vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![vec![0.0, 1.0]; 2]],
            task_cost: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            safety_cost: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
            gamma_c: 0.9,
            gamma_l: 1.0,
            budget_d: 2.0,
            horizon: 5,
            initial: vec![1.0, 0.0],
        }
    }

    #[test]
    fn equal_penalties_give_identical_tables() {
        let r = monotone_convergence_report(&risky(), &ZGrid::integer(2), &[0.0, 0.0]).unwrap();
        assert_eq!(r.values[0], r.values[1]);
    }

    #[test]
    fn descending_list_rejected() {
        assert!(monotone_convergence_report(&risky(), &ZGrid::integer(2), &[10.0, 1.0]).is_err());
    }

    #[test]
    fn gap_closes_for_large_penalty() {
        let r = monotone_convergence_report(&risky(), &ZGrid::integer(2), &[0.0, 1.0, 10.0, 1000.0]).unwrap();
        assert!(r.gaps_nonincreasing);
        assert!(r.gaps[3] < 1e-9, "{:?}", r.gaps);
        assert!(r.gaps[0] > 0.0);
    }

    #[test]
    fn oracle_agrees_on_small_instance() {
        let c = compare_with_oracle(&risky(), &ZGrid::integer(2), Penalty::Infinite, 1e-9).unwrap();
        assert!(c.agree, "{c:?}");
        // two free unsafe steps, then three paid steps
        let expected = 0.9f64.powi(2) + 0.9f64.powi(3) + 0.9f64.powi(4);
        assert!((c.saute_value - expected).abs() < 1e-12);
    }

    #[test]
    fn huge_budget_never_violates() {
        let mut m = risky();
        m.budget_d = 1e9;
        let grid = ZGrid::new(vec![-1.0, 0.0, 1e9]).unwrap();
        let mdp = build_saute_mdp(m, grid, Penalty::Finite(1.0), Interpolation::Nearest).unwrap();
        let v = almost_sure_check(&mdp, &UniformRandom { num_actions: 2 }, 200, 1).unwrap();
        assert_eq!(v, 0);
    }
}
