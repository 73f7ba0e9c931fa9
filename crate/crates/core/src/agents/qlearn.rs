//! Tabular Q-learning on the augmented state `(s, z node)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, Environment, Policy};
use crate::saute::{BudgetSampling, SauteEnv};
use crate::seed::{self, SimRng, STREAM_TRAIN};
use crate::solver::{FiniteSauteMdp, TabularDecision, ZGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// Linear in the episode index from `start` to `end` over `steps`
    /// episodes, then constant.
    Linear {
        start: f64,
        end: f64,
        steps: usize,
    },
    /// `max(min, visits^-power)` in the visit count of the updated pair.
    Visits {
        power: f64,
        min: f64,
    },
}

impl Schedule {
    pub fn at(&self, episode: usize, visits: u32) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::Linear { start, end, steps } => {
                if steps == 0 || episode >= steps {
                    end
                } else {
                    start + (end - start) * episode as f64 / steps as f64
                }
            }
            Schedule::Visits { power, min } => (visits.max(1) as f64).powf(-power).max(min),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            Schedule::Constant { value } => (0.0..=1.0).contains(&value),
            Schedule::Linear { start, end, .. } => (0.0..=1.0).contains(&start) && (0.0..=1.0).contains(&end),
            Schedule::Visits { power, min } => power > 0.0 && (0.0..=1.0).contains(&min),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("{what} schedule {self:?} leaves [0, 1]")))
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QLearnConfig {
    pub episodes: usize,
    pub alpha: Schedule,
    pub epsilon: Schedule,
    /// Off for the "no state augmentation" ablation: the table is indexed by
    /// the base state only.
    #[serde(default = "yes")]
    pub observe_z: bool,
    /// Off for the "no cost shaping" ablation: updates use the raw task cost.
    #[serde(default = "yes")]
    pub cost_shaping: bool,
    /// Per-episode budget for training; defaults to the model's budget.
    #[serde(default)]
    pub budget: Option<BudgetSampling>,
    #[serde(default)]
    pub q_init: f64,
}

impl Default for QLearnConfig {
    fn default() -> Self {
        QLearnConfig {
            episodes: 20_000,
            alpha: Schedule::Visits { power: 0.6, min: 0.01 },
            epsilon: Schedule::Linear { start: 1.0, end: 0.05, steps: 10_000 },
            observe_z: true,
            cost_shaping: true,
            budget: None,
            q_init: 0.0,
        }
    }
}

/// Greedy policy over a Q-table `q[s][z node][a]`, stored flat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub num_states: usize,
    pub num_actions: usize,
    pub z_grid: ZGrid,
    pub observe_z: bool,
    /// Node used for every lookup when `observe_z` is off.
    pub default_node: usize,
    pub q: Vec<f64>,
}

impl TabularPolicy {
    #[inline]
    fn row(&self, s: usize, zi: usize) -> usize {
        let zi = if self.observe_z { zi } else { self.default_node };
        (s * self.z_grid.len() + zi) * self.num_actions
    }

    pub fn q_values(&self, s: usize, zi: usize) -> &[f64] {
        let r = self.row(s, zi);
        &self.q[r..r + self.num_actions]
    }

    /// Lowest-index argmin.
    pub fn greedy(&self, s: usize, zi: usize) -> usize {
        argmin(self.q_values(s, zi))
    }

    /// Node for a raw safety state: nearest node, never crossing zero.
    pub fn z_node(&self, z_raw: f64) -> usize {
        self.z_grid.nearest(z_raw)
    }

    /// Greedy actions as a `[s][z node]` table.
    pub fn stationary_policy(&self) -> Vec<Vec<usize>> {
        (0..self.num_states).map(|s| (0..self.z_grid.len()).map(|zi| self.greedy(s, zi)).collect()).collect()
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

impl TabularDecision for TabularPolicy {
    fn decide(&self, _t: usize, s: usize, z_node: usize, _rng: &mut SimRng) -> usize {
        self.greedy(s, z_node)
    }
}

/// Acts on a wrapped tabular environment whose observation starts with the
/// state index. The safety state is read in raw units from the wrapper.
impl<E: Environment> Policy<SauteEnv<E>> for TabularPolicy {
    fn act(&mut self, env: &SauteEnv<E>, observation: &[f64]) -> Result<Action> {
        let s = observation[0] as usize;
        if s >= self.num_states {
            return Err(Error::InvalidAction(format!("state {s} outside the table")));
        }
        Ok(Action::Discrete(self.greedy(s, self.z_node(env.raw_safety_state()))))
    }
}

fn sample_successor(succ: &[(u32, f64)], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(y, p) in succ {
        acc += p;
        if u < acc {
            return y as usize;
        }
    }
    succ.last().map(|&(y, _)| y as usize).expect("every pair has a successor")
}

/// Epsilon-greedy Q-learning by sampling the augmented model.
///
/// Episodes run for the base horizon and end early on reaching an absorbing
/// base state with a nonnegative safety state, whose future cost is zero.
pub fn tabular_q_learn(mdp: &FiniteSauteMdp, cfg: &QLearnConfig, seed_value: u64) -> Result<TabularPolicy> {
    cfg.alpha.validate("alpha")?;
    cfg.epsilon.validate("epsilon")?;
    if let Some(b) = &cfg.budget {
        b.validate()?;
    }
    let base = &mdp.base;
    let (ns, na, nz) = (base.num_states, base.num_actions, mdp.nz());
    let gamma = base.gamma_c;
    let budget_node = mdp.budget_node();
    let mut policy = TabularPolicy {
        num_states: ns,
        num_actions: na,
        z_grid: mdp.z_grid.clone(),
        observe_z: cfg.observe_z,
        default_node: budget_node,
        q: vec![cfg.q_init; ns * nz * na],
    };
    let mut visits = vec![0u32; ns * nz * na];
    let mut rng = seed::stream(seed_value, STREAM_TRAIN);

    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon.at(episode, 0);
        let start_node = match &cfg.budget {
            Some(b) => mdp.z_grid.nearest(b.sample(&mut rng)),
            None => budget_node,
        };
        let s0 = base.sample_initial(&mut rng);
        let mut x = mdp.aug_index(s0, start_node);
        for _ in 0..base.horizon {
            let (s, zi) = mdp.split_index(x);
            let row = policy.row(s, zi);
            let a = if rng.random::<f64>() < eps { rng.random_range(0..na) } else { argmin(&policy.q[row..row + na]) };
            let cost = if cfg.cost_shaping { mdp.cost(x, a) } else { base.task_cost[s][a] };
            let y = sample_successor(mdp.successors(x, a), &mut rng);
            let (sn, zn) = mdp.split_index(y);
            let terminal = base.is_absorbing(sn) && mdp.z_grid.node(zn) >= 0.0;
            let next_row = policy.row(sn, zn);
            let bootstrap = if terminal {
                0.0
            } else {
                policy.q[next_row..next_row + na].iter().copied().fold(f64::INFINITY, f64::min)
            };
            visits[row + a] = visits[row + a].saturating_add(1);
            let alpha = cfg.alpha.at(episode, visits[row + a]);
            let q = &mut policy.q[row + a];
            *q += alpha * (cost + gamma * bootstrap - *q);
            if !q.is_finite() {
                return Err(Error::Diverged { context: format!("Q({s}, {zi}, {a}) = {q} in episode {episode}") });
            }
            x = y;
            if terminal {
                break;
            }
        }
    }
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saute::Penalty;
    use crate::solver::{build_saute_mdp, FiniteCmdp, Interpolation};

    #[test]
    fn schedules() {
        let lin = Schedule::Linear { start: 1.0, end: 0.0, steps: 10 };
        assert_eq!(lin.at(0, 0), 1.0);
        assert_eq!(lin.at(5, 0), 0.5);
        assert_eq!(lin.at(50, 0), 0.0);
        let v = Schedule::Visits { power: 1.0, min: 0.1 };
        assert_eq!(v.at(0, 4), 0.25);
        assert_eq!(v.at(0, 100), 0.1);
    }

    #[test]
    fn zero_discount_learns_immediate_cost() {
        let m = FiniteCmdp {
            num_states: 1,
            num_actions: 2,
            transition: vec![vec![vec![1.0], vec![1.0]]],
            task_cost: vec![vec![0.3, 0.7]],
            safety_cost: vec![vec![0.0, 0.0]],
            gamma_c: 1e-300,
            gamma_l: 1.0,
            budget_d: 1.0,
            horizon: 5,
            initial: vec![1.0],
        };
        let mdp = build_saute_mdp(m, ZGrid::integer(1), Penalty::Finite(10.0), Interpolation::Nearest).unwrap();
        let cfg = QLearnConfig {
            episodes: 200,
            alpha: Schedule::Constant { value: 1.0 },
            epsilon: Schedule::Constant { value: 1.0 },
            ..QLearnConfig::default()
        };
        let p = tabular_q_learn(&mdp, &cfg, 0).unwrap();
        let q = p.q_values(0, mdp.budget_node());
        assert!((q[0] - 0.3).abs() < 1e-12 && (q[1] - 0.7).abs() < 1e-12, "{q:?}");
    }
}
