//! The `verify` suites: oracle equivalence (t1), penalty monotonicity (t2b)
//! and Monte-Carlo almost-sure safety (t3).

use serde::Serialize;

use saute_core::envs::{make_fixture, tiny_random};
use saute_core::saute::Penalty;
use saute_core::solver::{
    almost_sure_check, build_saute_mdp, compare_with_oracle, finite_horizon, hard_constrained_values, initial_value,
    monotone_convergence_report, FiniteCmdp, Interpolation, MonotoneReport, OracleComparison, UniformRandom, ZGrid,
};
use saute_core::Error;

use crate::config::{T1Config, T2bConfig, T3Config, T3Policy};

/// Integer grid up to the budget; exact when costs are integers and
/// `gamma_l = 1`.
pub fn exact_grid(c: &FiniteCmdp) -> saute_core::Result<ZGrid> {
    let integral = c.safety_cost.iter().flatten().all(|l| l.fract() == 0.0);
    if c.gamma_l != 1.0 || !integral || c.budget_d.fract() != 0.0 {
        return Err(Error::InvalidConfig(
            "no exact z grid: need integer safety costs and budget with gamma_l = 1".into(),
        ));
    }
    Ok(ZGrid::integer(c.budget_d as usize))
}

/// Outcome of one suite: pass/fail, a summary line and, on failure, the
/// offending instances.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub passed: bool,
    pub summary: String,
    pub failures: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, Serialize)]
struct T1Failure<'a> {
    seed: u64,
    penalty: Penalty,
    instance: &'a FiniteCmdp,
    comparison: &'a OracleComparison,
}

pub fn run_t1(cfg: &T1Config) -> saute_core::Result<SuiteReport> {
    let mut failures = Vec::new();
    let mut bad_seeds = std::collections::BTreeSet::new();
    let mut feasible = 0;
    for seed in cfg.first_seed..cfg.first_seed + cfg.instances {
        let c = tiny_random(seed);
        let grid = exact_grid(&c)?;
        let mut penalties = vec![cfg.penalty];
        if cfg.check_infinite && cfg.penalty != Penalty::Infinite {
            penalties.push(Penalty::Infinite);
        }
        for n in penalties {
            let r = compare_with_oracle(&c, &grid, n, cfg.tol)?;
            if n == cfg.penalty {
                feasible += usize::from(r.oracle.cost().is_some());
            }
            if !r.agree {
                bad_seeds.insert(seed);
                failures.push(serde_json::to_value(T1Failure { seed, penalty: n, instance: &c, comparison: &r })?);
            }
        }
    }
    let agreeing = cfg.instances as usize - bad_seeds.len();
    Ok(SuiteReport {
        suite: "t1",
        passed: failures.is_empty(),
        summary: format!("{agreeing}/{} instances agree with the oracle ({feasible} feasible)", cfg.instances),
        failures,
    })
}

pub fn run_t2b(cfg: &T2bConfig) -> saute_core::Result<SuiteReport> {
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for name in &cfg.fixtures {
        let c = make_fixture(name)?;
        let grid = exact_grid(&c)?;
        match monotone_convergence_report(&c, &grid, &cfg.n_values) {
            Ok(MonotoneReport { gaps, gaps_nonincreasing, .. }) if gaps_nonincreasing => {
                lines.push(format!("{name}: gaps {gaps:?}"));
            }
            Ok(r) => failures.push(serde_json::json!({ "fixture": name, "instance": c, "gaps": r.gaps })),
            Err(e @ Error::MonotonicityViolation { .. }) => {
                failures.push(serde_json::json!({ "fixture": name, "instance": c, "error": e.to_string() }))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SuiteReport {
        suite: "t2b",
        passed: failures.is_empty(),
        summary: format!(
            "{}/{} fixtures monotone with nonincreasing gaps; {}",
            cfg.fixtures.len() - failures.len(),
            cfg.fixtures.len(),
            lines.join("; ")
        ),
        failures,
    })
}

pub fn run_t3(cfg: &T3Config) -> saute_core::Result<SuiteReport> {
    if !(cfg.penalty >= 0.0 && cfg.penalty.is_finite()) {
        return Err(Error::InvalidConfig("t3 penalty must be finite and nonnegative".into()));
    }
    let mut failures = Vec::new();
    let mut counts = Vec::new();
    for name in &cfg.fixtures {
        let c = make_fixture(name)?;
        let mdp = build_saute_mdp(c.clone(), exact_grid(&c)?, Penalty::Finite(cfg.penalty), Interpolation::Nearest)?;
        let hard = hard_constrained_values(&mdp, c.horizon);
        if !initial_value(&mdp, &hard).is_finite() {
            return Err(Error::InvalidConfig(format!("fixture '{name}' is infeasible at its budget")));
        }
        let violations = match cfg.policy {
            T3Policy::Greedy => almost_sure_check(&mdp, &finite_horizon(&mdp, c.horizon), cfg.episodes, cfg.seed)?,
            T3Policy::Random => {
                almost_sure_check(&mdp, &UniformRandom { num_actions: c.num_actions }, cfg.episodes, cfg.seed)?
            }
        };
        counts.push(format!("{name}: {violations}/{} violating episodes", cfg.episodes));
        if violations > 0 {
            failures.push(serde_json::json!({
                "fixture": name,
                "policy": cfg.policy,
                "violations": violations,
                "episodes": cfg.episodes,
                "instance": c,
            }));
        }
    }
    Ok(SuiteReport { suite: "t3", passed: failures.is_empty(), summary: counts.join("; "), failures })
}
