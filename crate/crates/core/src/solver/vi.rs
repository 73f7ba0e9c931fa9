use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augmented::FiniteSauteMdp;
use crate::error::{Error, Result};

/// Relative tolerance under which two action values count as tied; ties
/// resolve to the lowest action index.
const TIE_TOL: f64 = 1e-12;

/// Optimal values and greedy actions over `(state, z node)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    #[serde(with = "inf_grid")]
    pub values: Vec<Vec<f64>>,
    pub policy: Vec<Vec<usize>>,
    pub residual: f64,
    pub iterations: usize,
    /// Sup-norm residual after each sweep (empty for backward induction).
    #[serde(default)]
    pub residual_history: Vec<f64>,
    /// Time-indexed greedy actions for finite-horizon solves; `stages[t]`
    /// has the same layout as `policy`. Empty for stationary solves.
    #[serde(default)]
    pub stages: Vec<Vec<Vec<usize>>>,
}

impl ValueTable {
    pub fn value(&self, s: usize, zi: usize) -> f64 {
        self.values[s][zi]
    }

    /// Greedy action at time `t`.
    pub fn action(&self, t: usize, s: usize, zi: usize) -> usize {
        match self.stages.len() {
            0 => self.policy[s][zi],
            len => self.stages[t.min(len - 1)][s][zi],
        }
    }
}

#[inline]
fn q_value(mdp: &FiniteSauteMdp, next: &[f64], x: usize, a: usize, gamma: f64) -> f64 {
    let c = mdp.cost(x, a);
    if c == f64::INFINITY {
        return c;
    }
    let mut ev = 0.0;
    for &(y, p) in mdp.successors(x, a) {
        ev += p * next[y as usize];
    }
    c + gamma * ev
}

/// Minimum over actions with lowest-index tie breaking.
#[inline]
fn best_action(q: impl Iterator<Item = f64> + Clone) -> (f64, usize) {
    let min = q.clone().fold(f64::INFINITY, f64::min);
    let tol = TIE_TOL * min.abs().max(1.0);
    let idx = q.clone().position(|v| v <= min + tol || v == min).unwrap_or(0);
    (min, idx)
}

/// One Jacobi sweep: reads `v`, returns `T v` and the greedy actions.
pub fn bellman_sweep(mdp: &FiniteSauteMdp, v: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let gamma = mdp.base.gamma_c;
    let na = mdp.num_actions();
    (0..mdp.num_aug_states())
        .into_par_iter()
        .map(|x| best_action((0..na).map(|a| q_value(mdp, v, x, a, gamma))))
        .unzip()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() }).fold(0.0, f64::max)
}

fn reshape<T: Copy>(flat: &[T], nz: usize) -> Vec<Vec<T>> {
    flat.chunks(nz).map(|c| c.to_vec()).collect()
}

/// Solves the augmented MDP.
///
/// With `gamma_c < 1` this is discounted value iteration run until the
/// sup-norm change between sweeps is at most `tol`. With `gamma_c = 1` the
/// problem is solved by backward induction over the base horizon.
pub fn value_iteration(mdp: &FiniteSauteMdp, tol: f64, max_iters: usize) -> Result<ValueTable> {
    if !(tol > 0.0) {
        return Err(Error::config("tolerance must be positive"));
    }
    if mdp.base.gamma_c == 1.0 {
        return Ok(finite_horizon(mdp, mdp.base.horizon));
    }
    let nz = mdp.nz();
    let mut v = vec![0.0; mdp.num_aug_states()];
    let mut history = Vec::new();
    for k in 1..=max_iters {
        let (next, policy) = bellman_sweep(mdp, &v);
        let residual = sup_diff(&next, &v);
        history.push(residual);
        v = next;
        if residual <= tol {
            return Ok(ValueTable {
                values: reshape(&v, nz),
                policy: reshape(&policy, nz),
                residual,
                iterations: k,
                residual_history: history,
                stages: Vec::new(),
            });
        }
        if residual.is_nan() {
            return Err(Error::Diverged { context: "value iteration".into() });
        }
    }
    Err(Error::NotConverged { iterations: max_iters, residual: history.last().copied().unwrap_or(f64::NAN) })
}

/// Backward induction over `horizon` stages with zero terminal value.
pub fn finite_horizon(mdp: &FiniteSauteMdp, horizon: usize) -> ValueTable {
    let nz = mdp.nz();
    let mut v = vec![0.0; mdp.num_aug_states()];
    let mut stages = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let (next, policy) = bellman_sweep(mdp, &v);
        v = next;
        stages.push(reshape(&policy, nz));
    }
    stages.reverse();
    let policy = stages.first().cloned().unwrap_or_else(|| vec![vec![0; nz]; mdp.base.num_states]);
    ValueTable {
        values: reshape(&v, nz),
        policy,
        residual: 0.0,
        iterations: horizon,
        residual_history: Vec::new(),
        stages,
    }
}

/// Discounted value of a stationary deterministic policy, by iterating the
/// policy's Bellman operator until the change is at most `tol`.
pub fn evaluate_stationary(
    mdp: &FiniteSauteMdp,
    policy: &[Vec<usize>],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<Vec<f64>>> {
    let gamma = mdp.base.gamma_c;
    if gamma >= 1.0 {
        return Err(Error::config("stationary evaluation needs gamma_c < 1"));
    }
    let nz = mdp.nz();
    let flat: Vec<usize> = policy.iter().flatten().copied().collect();
    let mut v = vec![0.0; mdp.num_aug_states()];
    for _ in 0..max_iters {
        let next: Vec<f64> = (0..v.len()).into_par_iter().map(|x| q_value(mdp, &v, x, flat[x], gamma)).collect();
        let diff = sup_diff(&next, &v);
        v = next;
        if diff <= tol {
            return Ok(reshape(&v, nz));
        }
    }
    Err(Error::NotConverged { iterations: max_iters, residual: f64::NAN })
}

/// Expected value under the start distribution at the budget node.
pub fn initial_value(mdp: &FiniteSauteMdp, values: &[Vec<f64>]) -> f64 {
    let nz = mdp.nz();
    mdp.initial_aug_states().iter().map(|&(x, p)| p * values[x / nz][x % nz]).sum()
}

/// Finite-horizon value of the hard-constrained problem, computed from
/// feasibility sets rather than from any finite penalty.
///
/// An action is admissible at `(s, z)` with `t` steps to go when it keeps
/// the exact successor `z` nonnegative and every reachable successor is
/// itself feasible with `t - 1` steps to go. Infeasible states get `+inf`.
pub fn hard_constrained_values(mdp: &FiniteSauteMdp, horizon: usize) -> Vec<Vec<f64>> {
    let gamma = mdp.base.gamma_c;
    let na = mdp.num_actions();
    let n_aug = mdp.num_aug_states();
    let mut v = vec![0.0; n_aug];
    for _ in 0..horizon {
        let next: Vec<f64> = (0..n_aug)
            .into_par_iter()
            .map(|x| {
                let (s, _) = mdp.split_index(x);
                let mut best = f64::INFINITY;
                for a in 0..na {
                    if mdp.z_after(x, a) < 0.0 {
                        continue;
                    }
                    let succ = mdp.successors(x, a);
                    if succ.iter().any(|&(y, _)| v[y as usize] == f64::INFINITY) {
                        continue;
                    }
                    let ev: f64 = succ.iter().map(|&(y, p)| p * v[y as usize]).sum();
                    best = best.min(mdp.base.task_cost[s][a] + gamma * ev);
                }
                best
            })
            .collect();
        v = next;
    }
    reshape(&v, mdp.nz())
}

/// (De)serializes a value grid with non-finite entries as strings.
mod inf_grid {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Cell {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(grid: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let cells: Vec<Vec<Cell>> = grid
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| match v {
                        v if v.is_finite() => Cell::Num(v),
                        v if v == f64::INFINITY => Cell::Str("inf".into()),
                        v if v == f64::NEG_INFINITY => Cell::Str("-inf".into()),
                        _ => Cell::Str("nan".into()),
                    })
                    .collect()
            })
            .collect();
        cells.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let cells = Vec::<Vec<Cell>>::deserialize(d)?;
        cells
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|c| match c {
                        Cell::Num(v) => Ok(v),
                        Cell::Str(s) => match s.as_str() {
                            "inf" => Ok(f64::INFINITY),
                            "-inf" => Ok(f64::NEG_INFINITY),
                            "nan" => Ok(f64::NAN),
                            other => Err(serde::de::Error::custom(format!("bad value '{other}'"))),
                        },
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saute::Penalty;
    use crate::solver::augmented::{build_saute_mdp, Interpolation, ZGrid};
    use crate::solver::finite::FiniteCmdp;

    fn single(cost: f64, gamma: f64) -> FiniteSauteMdp {
        let base = FiniteCmdp {
            num_states: 1,
            num_actions: 1,
            transition: vec![vec![vec![1.0]]],
            task_cost: vec![vec![cost]],
            safety_cost: vec![vec![0.0]],
            gamma_c: gamma,
            gamma_l: 1.0,
            budget_d: 1.0,
            horizon: 10,
            initial: vec![1.0],
        };
        build_saute_mdp(base, ZGrid::integer(1), Penalty::Finite(100.0), Interpolation::Nearest).unwrap()
    }

    #[test]
    fn zero_costs_give_zero_values() {
        let m = single(0.0, 0.9);
        let t = value_iteration(&m, 1e-10, 1000).unwrap();
        // the violation node always pays n; every reachable node is free
        for (zi, &z) in m.z_grid.nodes().iter().enumerate() {
            assert_eq!(t.value(0, zi) == 0.0, z >= 0.0, "node {z}");
        }
    }

    #[test]
    fn geometric_series() {
        let m = single(1.0, 0.5);
        let t = value_iteration(&m, 1e-12, 1000).unwrap();
        let v = t.value(0, m.budget_node());
        assert!((v - 2.0).abs() < 1e-11, "{v}");
        assert!(t.residual <= 1e-12);
    }

    #[test]
    fn non_convergence_is_reported() {
        let err = value_iteration(&single(1.0, 0.99), 1e-12, 5).unwrap_err();
        match err {
            Error::NotConverged { iterations, residual } => {
                assert_eq!(iterations, 5);
                assert!(residual > 0.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn undiscounted_uses_backward_induction() {
        let m = single(1.0, 1.0);
        let t = value_iteration(&m, 1e-9, 10).unwrap();
        assert_eq!(t.value(0, m.budget_node()), 10.0);
        assert_eq!(t.stages.len(), 10);
    }

    #[test]
    fn ties_break_to_lowest_action() {
        assert_eq!(best_action([3.0, 1.0, 1.0].into_iter()).1, 1);
        assert_eq!(best_action([1.0 + 1e-15, 1.0].into_iter()).1, 0);
        assert_eq!(best_action([f64::INFINITY, f64::INFINITY].into_iter()), (f64::INFINITY, 0));
    }

    #[test]
    fn infinite_values_roundtrip_json() {
        let t = ValueTable {
            values: vec![vec![1.5, f64::INFINITY]],
            policy: vec![vec![0, 1]],
            residual: 0.0,
            iterations: 1,
            residual_history: vec![],
            stages: vec![],
        };
        let s = serde_json::to_string(&t).unwrap();
        let back: ValueTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
