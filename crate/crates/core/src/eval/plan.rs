//! Experiment plans: an environment, an agent, a wrapper configuration and
//! the evaluation protocol, expanded into a matrix of evaluated cells.

use serde::{Deserialize, Serialize};

use super::harness::{budget_generalization, evaluate, EvalSettings, GeneralizationReport};
use super::stats::EvalStats;
use crate::agents::{
    tabular_q_learn, train_lagrangian, CemPlanConfig, CemPlanner, LagrangianConfig, QLearnConfig, ShootingPlanner,
};
use crate::envs::{make_fixture, FiniteCmdpEnv, Gridworld, GridworldParams, PendulumEnv, PendulumParams};
use crate::error::{Error, Result};
use crate::mdp::Environment;
use crate::saute::{Blind, BudgetSampling, Penalty, SauteConfig, SauteEnv};
use crate::solver::{build_saute_mdp, FiniteCmdp, FiniteSauteMdp, Interpolation, ZGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Pendulum {
        #[serde(default)]
        params: PendulumParams,
    },
    Gridworld {
        params: GridworldParams,
    },
    Fixture {
        name: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentConfig {
    Cem {
        #[serde(default)]
        config: CemPlanConfig,
    },
    RandomShooting {
        horizon: usize,
        samples: usize,
    },
    QLearning {
        #[serde(default)]
        config: QLearnConfig,
        /// Safety-state grid in raw budget units. Defaults to the integer
        /// grid up to the largest budget in the plan.
        #[serde(default)]
        z_grid: Option<ZGrid>,
    },
    Lagrangian {
        #[serde(default)]
        config: LagrangianConfig,
    },
}

impl AgentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            AgentConfig::Cem { .. } => "cem",
            AgentConfig::RandomShooting { .. } => "random_shooting",
            AgentConfig::QLearning { .. } => "q_learning",
            AgentConfig::Lagrangian { .. } => "lagrangian",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    /// Agent does not see the safety state.
    pub no_sa: bool,
    /// Emitted cost is not reshaped.
    pub no_cs: bool,
    /// One extra cell per penalty value.
    pub n_sweep: Vec<f64>,
}

impl Ablations {
    pub fn any(&self) -> bool {
        self.no_sa || self.no_cs || !self.n_sweep.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralizationPlan {
    pub central_budget: f64,
    pub meta: BudgetSampling,
    pub eval_budgets: Vec<f64>,
}

fn five() -> usize {
    5
}

fn hundred() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "five")]
    pub n_seeds: usize,
    #[serde(default = "hundred")]
    pub n_eval_trajectories: usize,
    /// Replaces `n_eval_trajectories` when set (e.g. 25 for costly planners).
    #[serde(default)]
    pub trajectories_override: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { n_seeds: 5, n_eval_trajectories: 100, trajectories_override: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub environment: EnvConfig,
    pub agent: AgentConfig,
    pub saute: SauteConfig,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub ablations: Ablations,
    #[serde(default)]
    pub generalization: Option<GeneralizationPlan>,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: String,
    pub agent: String,
    pub budget_d: f64,
    pub reshape_n: f64,
    pub stats: EvalStats,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub master_seed: u64,
    pub cells: Vec<CellReport>,
    #[serde(default)]
    pub generalization: Option<GeneralizationReport>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Variant {
    Full,
    NoSa,
    NoCs,
    Penalty(f64),
}

impl Variant {
    fn label(self) -> String {
        match self {
            Variant::Full => "full".into(),
            Variant::NoSa => "no_sa".into(),
            Variant::NoCs => "no_cs".into(),
            Variant::Penalty(n) => format!("n={n}"),
        }
    }

    fn saute(self, base: &SauteConfig) -> SauteConfig {
        let mut cfg = base.clone();
        match self {
            Variant::NoCs => cfg.cost_shaping = false,
            Variant::Penalty(n) => cfg.reshape_n = Penalty::Finite(n),
            Variant::Full | Variant::NoSa => {}
        }
        cfg
    }
}

impl ExperimentPlan {
    pub fn settings(&self) -> EvalSettings {
        EvalSettings {
            n_seeds: self.eval.n_seeds,
            n_trajectories: self.eval.trajectories_override.unwrap_or(self.eval.n_eval_trajectories),
            master_seed: self.master_seed,
        }
    }

    pub fn budget(&self) -> Result<f64> {
        match self.saute.budget {
            BudgetSampling::Fixed { d } => Ok(d),
            BudgetSampling::Uniform { .. } => {
                Err(Error::config("the plan budget must be fixed; use the generalization section for sampled budgets"))
            }
        }
    }

    fn variants(&self) -> Vec<Variant> {
        let mut v = vec![Variant::Full];
        if matches!(self.agent, AgentConfig::Lagrangian { .. }) {
            return v;
        }
        if self.ablations.no_sa {
            v.push(Variant::NoSa);
        }
        if self.ablations.no_cs {
            v.push(Variant::NoCs);
        }
        v.extend(self.ablations.n_sweep.iter().map(|&n| Variant::Penalty(n)));
        v
    }

    pub fn validate(&self) -> Result<()> {
        self.saute.validate()?;
        self.settings().validate()?;
        let d = self.budget()?;
        if self.ablations.n_sweep.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
            return Err(Error::config("n_sweep values must be finite and nonnegative"));
        }
        let continuous = matches!(self.environment, EnvConfig::Pendulum { .. });
        match &self.agent {
            AgentConfig::Cem { config } if continuous => config.validate()?,
            AgentConfig::RandomShooting { horizon, samples } if continuous => {
                if *horizon == 0 || *samples == 0 {
                    return Err(Error::config("random shooting needs a positive horizon and sample count"));
                }
            }
            AgentConfig::QLearning { .. } | AgentConfig::Lagrangian { .. } if !continuous => {}
            agent => return Err(Error::config(format!("agent '{}' does not support this environment", agent.kind()))),
        }
        if let Some(g) = &self.generalization {
            if !matches!(self.agent, AgentConfig::QLearning { .. }) {
                return Err(Error::config("budget generalization is only supported for q_learning agents"));
            }
            g.meta.validate()?;
            if g.eval_budgets.is_empty() || g.eval_budgets.iter().any(|&b| !(b > 0.0)) || !(g.central_budget > 0.0) {
                return Err(Error::config("generalization budgets must be positive and non-empty"));
            }
        }
        if !(d >= 0.0) {
            return Err(Error::config("budget must be nonnegative"));
        }
        Ok(())
    }

    /// Human-readable summary of the cells a run would evaluate.
    pub fn describe(&self) -> String {
        let s = self.settings();
        let mut out = format!(
            "plan '{}': agent {}, {} seeds x {} trajectories, master seed {}\n",
            self.name,
            self.agent.kind(),
            s.n_seeds,
            s.n_trajectories,
            self.master_seed
        );
        for v in self.variants() {
            let cfg = v.saute(&self.saute);
            out.push_str(&format!(
                "  cell {:<10} n={} shaping={} normalize={}\n",
                v.label(),
                cfg.reshape_n.value(),
                cfg.cost_shaping,
                cfg.normalize
            ));
        }
        if let Some(g) = &self.generalization {
            out.push_str(&format!(
                "  generalization: central {} meta {:?} eval {:?}\n",
                g.central_budget, g.meta, g.eval_budgets
            ));
        }
        out
    }
}

/// Runs every cell of the plan.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    run_plan_with(plan, &mut |_| Ok(()))
}

/// Like [`run_plan`], calling `on_cell` as each cell finishes so callers can
/// persist partial results.
pub fn run_plan_with(
    plan: &ExperimentPlan,
    on_cell: &mut dyn FnMut(&CellReport) -> Result<()>,
) -> Result<ExperimentReport> {
    plan.validate()?;
    let mut report = ExperimentReport { name: plan.name.clone(), master_seed: plan.master_seed, ..Default::default() };
    match &plan.environment {
        EnvConfig::Pendulum { params } => {
            let params = params.clone();
            run_planner_cells(plan, move || PendulumEnv::new(params.clone()), &mut report, on_cell)?;
        }
        EnvConfig::Gridworld { params } => {
            run_tabular_cells(plan, Gridworld::new(params.clone())?.to_finite_cmdp(), &mut report, on_cell)?
        }
        EnvConfig::Fixture { name } => run_tabular_cells(plan, make_fixture(name)?, &mut report, on_cell)?,
    }
    Ok(report)
}

/// The ablation matrix of a plan; at least one switch must be active.
pub fn ablation_sweep(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    if !plan.ablations.any() {
        return Err(Error::config("ablation sweep needs no_sa, no_cs or a non-empty n_sweep"));
    }
    run_plan(plan)
}

fn run_planner_cells<E, F>(
    plan: &ExperimentPlan,
    make_inner: F,
    report: &mut ExperimentReport,
    on_cell: &mut dyn FnMut(&CellReport) -> Result<()>,
) -> Result<()>
where
    E: Environment + Clone + Send + Sync,
    F: Fn() -> Result<E> + Sync,
{
    let d = plan.budget()?;
    let settings = plan.settings();
    let mode = plan.saute.mode;
    for v in plan.variants() {
        let cfg = v.saute(&plan.saute);
        let make_env = || SauteEnv::new(make_inner()?, cfg.clone());
        let outcome = match (&plan.agent, v) {
            (AgentConfig::Cem { config }, Variant::NoSa) => {
                evaluate(make_env, |_| Ok(Blind(CemPlanner::new(config.clone(), mode)?)), &settings, d)?
            }
            (AgentConfig::Cem { config }, _) => {
                evaluate(make_env, |_| CemPlanner::new(config.clone(), mode), &settings, d)?
            }
            (AgentConfig::RandomShooting { horizon, samples }, Variant::NoSa) => {
                evaluate(make_env, |_| Ok(Blind(ShootingPlanner::new(*horizon, *samples, mode)?)), &settings, d)?
            }
            (AgentConfig::RandomShooting { horizon, samples }, _) => {
                evaluate(make_env, |_| ShootingPlanner::new(*horizon, *samples, mode), &settings, d)?
            }
            (agent, _) => return Err(Error::config(format!("agent '{}' cannot plan", agent.kind()))),
        };
        report.cells.push(CellReport {
            cell: v.label(),
            agent: plan.agent.kind().into(),
            budget_d: d,
            reshape_n: cfg.reshape_n.value(),
            stats: outcome.stats,
        });
        on_cell(report.cells.last().expect("cell just pushed"))?;
    }
    Ok(())
}

fn default_grid(cmdp: &FiniteCmdp, top: f64) -> Result<ZGrid> {
    let integral = cmdp.safety_cost.iter().flatten().all(|l| l.fract() == 0.0);
    if cmdp.gamma_l != 1.0 || !integral || top.fract() != 0.0 {
        return Err(Error::config(
            "no default z grid: safety costs and budgets must be integers with gamma_l = 1; set agent.z_grid",
        ));
    }
    Ok(ZGrid::integer(top as usize))
}

fn run_tabular_cells(
    plan: &ExperimentPlan,
    cmdp: FiniteCmdp,
    report: &mut ExperimentReport,
    on_cell: &mut dyn FnMut(&CellReport) -> Result<()>,
) -> Result<()> {
    let d = plan.budget()?;
    let settings = plan.settings();
    let mut cmdp = cmdp;
    cmdp.gamma_l = plan.saute.gamma_l;
    cmdp.budget_d = d;
    cmdp.validate()?;

    for v in plan.variants() {
        let cfg = v.saute(&plan.saute);
        let model = cmdp.clone();
        let make_env = || SauteEnv::new(FiniteCmdpEnv::new(model.clone())?, cfg.clone());
        let outcome = match &plan.agent {
            AgentConfig::QLearning { config, z_grid } => {
                let mdp = tabular_mdp(plan, &cmdp, z_grid.as_ref(), cfg.reshape_n)?;
                let mut qcfg = config.clone();
                qcfg.observe_z &= v != Variant::NoSa;
                qcfg.cost_shaping &= v != Variant::NoCs;
                evaluate(make_env, |i| tabular_q_learn(&mdp, &qcfg, settings.train_seed(i)), &settings, d)?
            }
            AgentConfig::Lagrangian { config } => {
                let trained: Vec<_> = (0..settings.n_seeds)
                    .map(|i| train_lagrangian(&cmdp, config, settings.train_seed(i)))
                    .collect::<Result<_>>()?;
                for (i, t) in trained.iter().enumerate() {
                    if t.state.capped {
                        report
                            .notes
                            .push(format!("seed {i}: lagrange multiplier hit the cap; budget likely infeasible"));
                    }
                }
                evaluate(make_env, |i| Ok(trained[i].policy.clone()), &settings, d)?
            }
            agent => return Err(Error::config(format!("agent '{}' needs a continuous environment", agent.kind()))),
        };
        report.cells.push(CellReport {
            cell: if matches!(plan.agent, AgentConfig::Lagrangian { .. }) { "lagrangian".into() } else { v.label() },
            agent: plan.agent.kind().into(),
            budget_d: d,
            reshape_n: cfg.reshape_n.value(),
            stats: outcome.stats,
        });
        on_cell(report.cells.last().expect("cell just pushed"))?;
    }

    if let (Some(g), AgentConfig::QLearning { config, z_grid }) = (&plan.generalization, &plan.agent) {
        let mdp = tabular_mdp(plan, &cmdp, z_grid.as_ref(), plan.saute.reshape_n)?;
        let train = |budget: BudgetSampling, i: usize| {
            let start = match budget {
                BudgetSampling::Fixed { d } => d,
                BudgetSampling::Uniform { .. } => d,
            };
            let mut qcfg = config.clone();
            qcfg.budget = Some(budget);
            tabular_q_learn(&mdp.with_budget(start)?, &qcfg, settings.train_seed(i))
        };
        let make_env = |budget: f64| {
            let mut cfg = plan.saute.clone();
            cfg.budget = BudgetSampling::Fixed { d: budget };
            SauteEnv::new(FiniteCmdpEnv::new(cmdp.with_budget(budget))?, cfg)
        };
        report.generalization =
            Some(budget_generalization(train, make_env, &settings, g.central_budget, g.meta, &g.eval_budgets)?);
    }
    Ok(())
}

fn tabular_mdp(plan: &ExperimentPlan, cmdp: &FiniteCmdp, grid: Option<&ZGrid>, n: Penalty) -> Result<FiniteSauteMdp> {
    let grid = match grid {
        Some(g) => g.clone(),
        None => {
            let mut top = cmdp.budget_d;
            if let Some(g) = &plan.generalization {
                top = top.max(g.central_budget);
                top = g.eval_budgets.iter().copied().fold(top, f64::max);
                if let BudgetSampling::Uniform { upper, .. } = g.meta {
                    top = top.max(upper.ceil());
                }
            }
            default_grid(cmdp, top)?
        }
    };
    build_saute_mdp(cmdp.clone(), grid, n, Interpolation::Nearest)
}
