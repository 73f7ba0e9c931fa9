//! Seeded multi-trajectory evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{eval_stats, EvalStats};
use crate::error::{Error, Result};
use crate::mdp::{rollout, Environment, Policy, TrajectoryRecord};
use crate::saute::BudgetSampling;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub n_seeds: usize,
    pub n_trajectories: usize,
    pub master_seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { n_seeds: 5, n_trajectories: 100, master_seed: 0 }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 || self.n_trajectories == 0 {
            return Err(Error::config("n_seeds and n_trajectories must be at least 1"));
        }
        Ok(())
    }

    /// Seed for agent training under seed index `i`.
    pub fn train_seed(&self, i: usize) -> u64 {
        seed::derive(self.master_seed, &[i as u64, seed::STREAM_TRAIN])
    }

    /// Seed of trajectory `j` under seed index `i`.
    pub fn trajectory_seed(&self, i: usize, j: usize) -> u64 {
        seed::derive(self.master_seed, &[i as u64, j as u64])
    }
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub stats: EvalStats,
    /// Ordered by (seed index, trajectory index).
    pub trajectories: Vec<TrajectoryRecord>,
}

/// Runs `n_seeds * n_trajectories` rollouts and summarizes them against
/// the budget `d`.
///
/// `make_policy(i)` builds (and, for learners, trains) the agent of seed
/// index `i`; each trajectory runs on a fresh environment and a clone of
/// that agent. Results do not depend on the number of worker threads.
pub fn evaluate<E, P, FE, FP>(make_env: FE, make_policy: FP, settings: &EvalSettings, d: f64) -> Result<EvalOutcome>
where
    E: Environment,
    P: Policy<E> + Clone + Send + Sync,
    FE: Fn() -> Result<E> + Sync,
    FP: Fn(usize) -> Result<P>,
{
    settings.validate()?;
    let mut trajectories = Vec::with_capacity(settings.n_seeds * settings.n_trajectories);
    for i in 0..settings.n_seeds {
        let policy = make_policy(i).map_err(|e| Error::Evaluation { seed: i, trajectory: 0, source: Box::new(e) })?;
        let batch: Vec<TrajectoryRecord> = (0..settings.n_trajectories)
            .into_par_iter()
            .map(|j| {
                let wrap = |e: Error| Error::Evaluation { seed: i, trajectory: j, source: Box::new(e) };
                let mut env = make_env().map_err(wrap)?;
                let mut agent = policy.clone();
                let horizon = env.spec().horizon;
                rollout(&mut env, &mut agent, horizon, settings.trajectory_seed(i, j)).map_err(wrap)
            })
            .collect::<Result<_>>()?;
        trajectories.extend(batch);
    }
    let stats = eval_stats(&trajectories, d)?;
    Ok(EvalOutcome { stats, trajectories })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    /// `baseline`, `naive` or `meta`.
    pub agent: String,
    pub train_budget: BudgetSampling,
    pub eval_budget: f64,
    pub stats: EvalStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub rows: Vec<GeneralizationRow>,
}

impl GeneralizationReport {
    pub fn get(&self, agent: &str, eval_budget: f64) -> Option<&GeneralizationRow> {
        self.rows.iter().find(|r| r.agent == agent && r.eval_budget == eval_budget)
    }
}

/// Trains a baseline agent at each evaluation budget, a naive agent at
/// `central` and a meta agent on `meta`, then evaluates them. Baselines are
/// evaluated at their own budget, naive and meta agents at every budget.
///
/// `train(budget, seed_index)` returns a trained agent; `make_env(d)` an
/// environment whose episodes start with budget `d`.
pub fn budget_generalization<E, P, FT, FE>(
    train: FT,
    make_env: FE,
    settings: &EvalSettings,
    central: f64,
    meta: BudgetSampling,
    eval_budgets: &[f64],
) -> Result<GeneralizationReport>
where
    E: Environment,
    P: Policy<E> + Clone + Send + Sync,
    FT: Fn(BudgetSampling, usize) -> Result<P>,
    FE: Fn(f64) -> Result<E> + Sync,
{
    if eval_budgets.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::config("evaluation budgets must be positive"));
    }
    meta.validate()?;
    let mut rows = Vec::new();
    let naive_budget = BudgetSampling::Fixed { d: central };
    let naive: Vec<P> = (0..settings.n_seeds).map(|i| train(naive_budget, i)).collect::<Result<_>>()?;
    let meta_agents: Vec<P> = (0..settings.n_seeds).map(|i| train(meta, i)).collect::<Result<_>>()?;
    for &d in eval_budgets {
        let fixed = BudgetSampling::Fixed { d };
        let env_at = || make_env(d);
        let baseline = evaluate(env_at, |i| train(fixed, i), settings, d)?;
        rows.push(GeneralizationRow {
            agent: "baseline".into(),
            train_budget: fixed,
            eval_budget: d,
            stats: baseline.stats,
        });
        let out = evaluate(env_at, |i| Ok(naive[i].clone()), settings, d)?;
        rows.push(GeneralizationRow {
            agent: "naive".into(),
            train_budget: naive_budget,
            eval_budget: d,
            stats: out.stats,
        });
        let out = evaluate(env_at, |i| Ok(meta_agents[i].clone()), settings, d)?;
        rows.push(GeneralizationRow { agent: "meta".into(), train_budget: meta, eval_budget: d, stats: out.stats });
    }
    Ok(GeneralizationReport { rows })
}
