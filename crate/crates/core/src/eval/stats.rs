//! Box-plot summaries and per-episode safety metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TrajectoryRecord;

/// Percentile of sorted data by linear interpolation between closest ranks:
/// position `q * (n - 1)` for `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// `q1 - 1.5 IQR` and `q3 + 1.5 IQR`, clamped to the data range.
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Points strictly outside the whiskers, ascending.
    pub outliers: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::config("cannot summarize an empty sample"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Diverged { context: format!("non-finite metric value {v}") });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let q1 = percentile(&sorted, 0.25);
    let median = percentile(&sorted, 0.5);
    let q3 = percentile(&sorted, 0.75);
    let iqr = q3 - q1;
    let whisker_low = (q1 - 1.5 * iqr).max(min);
    let whisker_high = (q3 + 1.5 * iqr).min(max);
    let outliers = sorted.iter().copied().filter(|&v| v < whisker_low || v > whisker_high).collect();
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(MetricSummary { count: sorted.len(), mean, median, q1, q3, whisker_low, whisker_high, outliers, min, max })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub budget_d: f64,
    pub episodes: usize,
    pub steps: usize,
    /// Undiscounted sum of raw task signals per episode.
    pub task_return: MetricSummary,
    /// Discounted accumulated safety cost per episode.
    pub safety_total: MetricSummary,
    /// Deepest budget overdraft per episode in raw cost units,
    /// `max_t max(0, -z_t)` with `z_0 = d`.
    pub max_step_z_deficit: MetricSummary,
    /// Share of episodes with `safety_total > d`.
    pub violation_fraction: f64,
    pub max_safety_total: f64,
    /// Steps taken with the budget already overdrawn, over all steps.
    pub cost_rate: f64,
}

pub fn violation_fraction(safety_totals: &[f64], d: f64) -> f64 {
    if safety_totals.is_empty() {
        return 0.0;
    }
    safety_totals.iter().filter(|&&t| t > d).count() as f64 / safety_totals.len() as f64
}

/// Raw safety states `z_1..z_T` after each step, starting from `z_0 = d`.
pub fn raw_z_path(traj: &TrajectoryRecord, d: f64) -> Vec<f64> {
    let mut z = d;
    traj.steps
        .iter()
        .map(|s| {
            z = (z - s.safety_cost) / traj.gamma_l;
            z
        })
        .collect()
}

pub fn eval_stats(trajectories: &[TrajectoryRecord], d: f64) -> Result<EvalStats> {
    if trajectories.is_empty() {
        return Err(Error::config("no trajectories to summarize"));
    }
    let mut returns = Vec::with_capacity(trajectories.len());
    let mut totals = Vec::with_capacity(trajectories.len());
    let mut deficits = Vec::with_capacity(trajectories.len());
    let (mut steps, mut overdrawn) = (0usize, 0usize);
    for traj in trajectories {
        returns.push(traj.steps.iter().map(|s| s.task_cost).sum::<f64>());
        totals.push(traj.budget_used);
        let path = raw_z_path(traj, d);
        deficits.push(path.iter().fold(0.0f64, |m, &z| m.max(-z)));
        steps += path.len();
        overdrawn += path.iter().filter(|&&z| z < 0.0).count();
    }
    Ok(EvalStats {
        budget_d: d,
        episodes: trajectories.len(),
        steps,
        task_return: summarize(&returns)?,
        safety_total: summarize(&totals)?,
        max_step_z_deficit: summarize(&deficits)?,
        violation_fraction: violation_fraction(&totals, d),
        max_safety_total: totals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        cost_rate: if steps == 0 { 0.0 } else { overdrawn as f64 / steps as f64 },
    })
}
