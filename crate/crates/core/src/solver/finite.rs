use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SimRng;

const ROW_TOL: f64 = 1e-12;

/// A tabular constrained MDP.
///
/// Tensors are row-major nested arrays: `transition[s][a][s']`,
/// `task_cost[s][a]`, `safety_cost[s][a]`. `initial` is the start-state
/// distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteCmdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub task_cost: Vec<Vec<f64>>,
    pub safety_cost: Vec<Vec<f64>>,
    pub gamma_c: f64,
    pub gamma_l: f64,
    pub budget_d: f64,
    pub horizon: usize,
    pub initial: Vec<f64>,
}

impl FiniteCmdp {
    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.num_states, self.num_actions);
        if ns == 0 || na == 0 {
            return Err(Error::spec("need at least one state and one action"));
        }
        let shape_ok = self.transition.len() == ns
            && self.task_cost.len() == ns
            && self.safety_cost.len() == ns
            && self.initial.len() == ns
            && self.transition.iter().all(|r| r.len() == na && r.iter().all(|p| p.len() == ns))
            && self.task_cost.iter().all(|r| r.len() == na)
            && self.safety_cost.iter().all(|r| r.len() == na);
        if !shape_ok {
            return Err(Error::spec("tensor shapes do not match num_states/num_actions"));
        }
        for s in 0..ns {
            for a in 0..na {
                let row = &self.transition[s][a];
                if row.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::spec(format!("negative probability in row ({s}, {a})")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > ROW_TOL {
                    return Err(Error::spec(format!("row ({s}, {a}) sums to {total}")));
                }
                if !self.task_cost[s][a].is_finite() {
                    return Err(Error::spec(format!("non-finite task cost at ({s}, {a})")));
                }
                let l = self.safety_cost[s][a];
                if !(l >= 0.0) || !l.is_finite() {
                    return Err(Error::spec(format!("safety cost {l} at ({s}, {a}) must be finite and >= 0")));
                }
            }
        }
        if self.initial.iter().any(|p| !(*p >= 0.0)) || (self.initial.iter().sum::<f64>() - 1.0).abs() > ROW_TOL {
            return Err(Error::spec("initial distribution is not a probability vector"));
        }
        if !(self.gamma_c > 0.0 && self.gamma_c <= 1.0) || !(self.gamma_l > 0.0 && self.gamma_l <= 1.0) {
            return Err(Error::spec("discounts must lie in (0, 1]"));
        }
        if !(self.budget_d >= 0.0) {
            return Err(Error::spec("budget must be nonnegative"));
        }
        if self.horizon == 0 {
            return Err(Error::spec("horizon must be at least 1"));
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.transition.iter().flatten().all(|row| row.contains(&1.0))
    }

    /// Successor of a deterministic transition.
    pub fn successor(&self, s: usize, a: usize) -> Result<usize> {
        self.transition[s][a].iter().position(|&p| p == 1.0).ok_or(Error::NotDeterministic { state: s, action: a })
    }

    /// A state every action maps back to itself at zero cost.
    pub fn is_absorbing(&self, s: usize) -> bool {
        (0..self.num_actions)
            .all(|a| self.transition[s][a][s] == 1.0 && self.task_cost[s][a] == 0.0 && self.safety_cost[s][a] == 0.0)
    }

    /// The single start state, when the initial distribution is a point mass.
    pub fn initial_state(&self) -> Option<usize> {
        self.initial.iter().position(|&p| p == 1.0)
    }

    pub fn sample_initial(&self, rng: &mut SimRng) -> usize {
        sample_index(&self.initial, rng)
    }

    pub fn sample_next(&self, s: usize, a: usize, rng: &mut SimRng) -> usize {
        sample_index(&self.transition[s][a], rng)
    }

    /// Copy with task cost `c + lambda * l`.
    pub fn penalized(&self, lambda: f64) -> FiniteCmdp {
        let mut out = self.clone();
        for (crow, lrow) in out.task_cost.iter_mut().zip(&self.safety_cost) {
            for (c, l) in crow.iter_mut().zip(lrow) {
                *c += lambda * l;
            }
        }
        out
    }

    pub fn with_budget(&self, d: f64) -> FiniteCmdp {
        FiniteCmdp { budget_d: d, ..self.clone() }
    }
}

pub(crate) fn sample_index(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn two_state() -> FiniteCmdp {
        FiniteCmdp {
            num_states: 2,
            num_actions: 1,
            transition: vec![vec![vec![0.25, 0.75]], vec![vec![0.0, 1.0]]],
            task_cost: vec![vec![1.0], vec![0.0]],
            safety_cost: vec![vec![1.0], vec![0.0]],
            gamma_c: 0.9,
            gamma_l: 1.0,
            budget_d: 1.0,
            horizon: 5,
            initial: vec![1.0, 0.0],
        }
    }

    #[test]
    fn validates_rows() {
        let mut m = two_state();
        assert!(m.validate().is_ok());
        m.transition[0][0] = vec![0.5, 0.6];
        assert!(m.validate().is_err());
    }

    #[test]
    fn rejects_negative_safety_cost() {
        let mut m = two_state();
        m.safety_cost[0][0] = -0.1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn absorbing_and_determinism() {
        let m = two_state();
        assert!(m.is_absorbing(1));
        assert!(!m.is_absorbing(0));
        assert!(!m.is_deterministic());
        assert_eq!(m.initial_state(), Some(0));
    }

    #[test]
    fn sampling_matches_probabilities() {
        let m = two_state();
        let mut rng = SimRng::seed_from_u64(3);
        let hits = (0..20_000).filter(|_| m.sample_next(0, 0, &mut rng) == 0).count();
        let freq = hits as f64 / 20_000.0;
        assert!((freq - 0.25).abs() < 0.02, "{freq}");
    }

    #[test]
    fn penalized_adds_weighted_safety() {
        let m = two_state().penalized(2.0);
        assert_eq!(m.task_cost[0][0], 3.0);
    }
}
