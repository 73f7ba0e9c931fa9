//! Receding-horizon cross-entropy planning with the environment as model.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, ActionSpace, Environment, Policy};
use crate::saute::Mode;
use crate::seed::{self, SimRng, STREAM_POLICY};

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CemPlanConfig {
    pub plan_horizon: usize,
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    pub initial_stddev: f64,
    pub min_stddev: f64,
    /// Number of plan actions executed before replanning.
    pub replan_every: usize,
    /// Start each plan from the previous mean shifted in time.
    #[serde(default = "yes")]
    pub warm_start: bool,
    /// Carry the elites of one iteration into the next candidate pool.
    #[serde(default = "yes")]
    pub keep_elites: bool,
}

impl Default for CemPlanConfig {
    fn default() -> Self {
        CemPlanConfig {
            plan_horizon: 20,
            population: 40,
            elite_fraction: 0.2,
            iterations: 3,
            initial_stddev: 1.0,
            min_stddev: 0.05,
            replan_every: 1,
            warm_start: true,
            keep_elites: true,
        }
    }
}

impl CemPlanConfig {
    pub fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population as f64).ceil() as usize).max(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plan_horizon == 0 || self.iterations == 0 {
            return Err(Error::config("plan_horizon and iterations must be positive"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::config(format!("elite_fraction {} not in (0, 1)", self.elite_fraction)));
        }
        if self.population < self.elite_count() {
            return Err(Error::config(format!(
                "population {} is smaller than the elite count {}",
                self.population,
                self.elite_count()
            )));
        }
        if !(self.initial_stddev > 0.0 && self.min_stddev >= 0.0 && self.min_stddev <= self.initial_stddev) {
            return Err(Error::config("need 0 <= min_stddev <= initial_stddev and initial_stddev > 0"));
        }
        if self.replan_every == 0 || self.replan_every > self.plan_horizon {
            return Err(Error::config("replan_every must lie in 1..=plan_horizon"));
        }
        Ok(())
    }
}

/// Result of one planning call. Sequences are flat, `horizon * dim` long.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub action: Vec<f64>,
    pub sequence: Vec<f64>,
    /// Best objective in the elite set after each iteration.
    pub best_objective: Vec<f64>,
    /// Mean objective of the elite set after each iteration.
    pub elite_objective: Vec<f64>,
}

pub(crate) fn box_bounds(space: &ActionSpace) -> Result<(Vec<f64>, Vec<f64>)> {
    match space {
        ActionSpace::Box { lower, upper } => Ok((lower.clone(), upper.clone())),
        ActionSpace::Discrete { .. } => Err(Error::config("sampling planners need a box action space")),
    }
}

/// Objective of an open-loop sequence: signed sum of emitted costs until the
/// horizon or episode end. Lower is better.
pub(crate) fn sequence_objective<E: Environment + Clone>(model: &E, seq: &[f64], dim: usize, sign: f64) -> Result<f64> {
    let mut sim = model.clone();
    let mut total = 0.0;
    for chunk in seq.chunks(dim) {
        let out = sim.simulate(&Action::continuous(chunk))?;
        total += sign * out.task_cost;
        if out.done {
            break;
        }
    }
    if !total.is_finite() {
        return Err(Error::Diverged { context: format!("simulated objective {total} for sequence {seq:?}") });
    }
    Ok(total)
}

pub(crate) fn score_all<E>(model: &E, candidates: &[Vec<f64>], dim: usize, sign: f64) -> Result<Vec<f64>>
where
    E: Environment + Clone + Sync,
{
    candidates.par_iter().map(|c| sequence_objective(model, c, dim, sign)).collect()
}

/// Indices sorted by objective, ties to the lower index.
pub(crate) fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx
}

/// Plans from the model's current state. `sign` is +1 when the emitted
/// signal is a cost and -1 when it is a reward. `warm` seeds the mean.
pub fn cem_plan<E>(
    model: &E,
    cfg: &CemPlanConfig,
    sign: f64,
    warm: Option<&[f64]>,
    rng: &mut SimRng,
) -> Result<PlanResult>
where
    E: Environment + Clone + Sync,
{
    cfg.validate()?;
    let (lower, upper) = box_bounds(&model.spec().action_space)?;
    let dim = lower.len();
    let len = cfg.plan_horizon * dim;
    let mut mean: Vec<f64> = match warm {
        Some(w) if w.len() == len => w.to_vec(),
        _ => (0..len).map(|i| 0.5 * (lower[i % dim] + upper[i % dim])).collect(),
    };
    let mut std = vec![cfg.initial_stddev; len];
    let k = cfg.elite_count();
    let mut elites: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut best_objective = Vec::with_capacity(cfg.iterations);
    let mut elite_objective = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        let mut pool: Vec<Vec<f64>> = (0..cfg.population)
            .map(|_| {
                (0..len)
                    .map(|i| {
                        let z: f64 = StandardNormal.sample(rng);
                        (mean[i] + std[i] * z).clamp(lower[i % dim], upper[i % dim])
                    })
                    .collect()
            })
            .collect();
        let mut scores = score_all(model, &pool, dim, sign)?;
        if cfg.keep_elites {
            for (seq, score) in elites.drain(..) {
                pool.push(seq);
                scores.push(score);
            }
        }
        let order = ranking(&scores);
        elites = order[..k].iter().map(|&i| (pool[i].clone(), scores[i])).collect();

        for i in 0..len {
            let m = elites.iter().map(|(s, _)| s[i]).sum::<f64>() / k as f64;
            let var = elites.iter().map(|(s, _)| (s[i] - m).powi(2)).sum::<f64>() / k as f64;
            mean[i] = m;
            std[i] = var.sqrt().max(cfg.min_stddev);
        }
        best_objective.push(elites[0].1);
        elite_objective.push(elites.iter().map(|(_, s)| s).sum::<f64>() / k as f64);
    }
    Ok(PlanResult { action: mean[..dim].to_vec(), sequence: mean, best_objective, elite_objective })
}

/// [`cem_plan`] as a policy: replans every `replan_every` steps on a clone
/// of the environment it acts in.
#[derive(Clone, Debug)]
pub struct CemPlanner {
    cfg: CemPlanConfig,
    sign: f64,
    rng: SimRng,
    plan: Vec<f64>,
    cursor: usize,
}

impl CemPlanner {
    /// `objective` is the orientation of the signal the planner receives.
    pub fn new(cfg: CemPlanConfig, objective: Mode) -> Result<Self> {
        cfg.validate()?;
        Ok(CemPlanner {
            cfg,
            sign: objective.cost_sign(),
            rng: seed::stream(0, STREAM_POLICY),
            plan: Vec::new(),
            cursor: 0,
        })
    }

    pub fn config(&self) -> &CemPlanConfig {
        &self.cfg
    }
}

impl<E: Environment + Clone + Sync> Policy<E> for CemPlanner {
    fn reset(&mut self, seed: u64) {
        self.rng = seed::stream(seed, STREAM_POLICY);
        self.plan.clear();
        self.cursor = 0;
    }

    fn act(&mut self, env: &E, _observation: &[f64]) -> Result<Action> {
        let dim = env.spec().action_space.dim();
        if self.plan.is_empty() || self.cursor >= self.cfg.replan_every {
            let warm = if self.cfg.warm_start && !self.plan.is_empty() {
                let (lower, upper) = box_bounds(&env.spec().action_space)?;
                let shift = self.cursor * dim;
                let mut w = self.plan[shift..].to_vec();
                w.extend((0..shift).map(|i| 0.5 * (lower[i % dim] + upper[i % dim])));
                Some(w)
            } else {
                None
            };
            self.plan = cem_plan(env, &self.cfg, self.sign, warm.as_deref(), &mut self.rng)?.sequence;
            self.cursor = 0;
        }
        let a = Action::continuous(&self.plan[self.cursor * dim..(self.cursor + 1) * dim]);
        self.cursor += 1;
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::toy::QuadraticToy;

    fn toy_cfg() -> CemPlanConfig {
        CemPlanConfig {
            plan_horizon: 1,
            population: 50,
            elite_fraction: 0.2,
            iterations: 3,
            initial_stddev: 1.0,
            min_stddev: 0.01,
            replan_every: 1,
            warm_start: false,
            keep_elites: true,
        }
    }

    #[test]
    fn elite_count_floor() {
        let mut c = toy_cfg();
        c.population = 4;
        c.elite_fraction = 0.1;
        assert_eq!(c.elite_count(), 2);
        c.population = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn converges_on_quadratic_toy() {
        let env = QuadraticToy::new(1.0, 0.5).unwrap();
        let mut rng = seed::stream(3, STREAM_POLICY);
        let r = cem_plan(&env, &toy_cfg(), 1.0, None, &mut rng).unwrap();
        assert!((r.action[0] - env.optimal_action()).abs() < 0.05, "{:?}", r.action);
    }

    #[test]
    fn same_seed_same_action() {
        let env = QuadraticToy::new(0.7, 0.1).unwrap();
        let a = cem_plan(&env, &toy_cfg(), 1.0, None, &mut seed::stream(9, 2)).unwrap();
        let b = cem_plan(&env, &toy_cfg(), 1.0, None, &mut seed::stream(9, 2)).unwrap();
        assert_eq!(a, b);
    }
}
