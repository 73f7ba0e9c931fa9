use proptest::prelude::*;
use saute_core::agents::LagrangianConfig;
use saute_core::envs::{GridworldParams, PendulumEnv, PendulumParams};
use saute_core::eval::{
    csv_header, eval_stats, evaluate, export_results, from_json, percentile, read_report, run_plan, summarize, to_csv,
    to_json, Ablations, AgentConfig, EnvConfig, EvalSection, EvalSettings, ExperimentPlan, ExportFormat, CSV_COLUMNS,
};
use saute_core::mdp::FnPolicy;
use saute_core::saute::Mode;
use saute_core::{Action, SauteConfig, SauteEnv};

// Reference: rank h = (n - 1) q, interpolate between floor(h) and floor(h) + 1.
fn reference_percentile(data: &[f64], q: f64) -> f64 {
    let mut x = data.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (x.len() - 1) as f64 * q;
    let f = h.floor() as usize;
    if f + 1 >= x.len() {
        return x[f];
    }
    x[f] + (h - f as f64) * (x[f + 1] - x[f])
}

proptest! {
    #[test]
    fn percentile_matches_reference(data in prop::collection::vec(-1e3f64..1e3, 1..60), q in 0.0f64..=1.0) {
        let mut sorted = data.clone();
        sorted.sort_by(f64::total_cmp);
        let got = percentile(&sorted, q);
        let want = reference_percentile(&data, q);
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn summary_is_order_independent(mut data in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        let a = summarize(&data).unwrap();
        data.reverse();
        let b = summarize(&data).unwrap();
        prop_assert_eq!(a.median, b.median);
        prop_assert_eq!(a.q1, b.q1);
        prop_assert!(a.whisker_low >= a.min && a.whisker_high <= a.max);
        prop_assert!(a.q1 <= a.median && a.median <= a.q3);
    }
}

#[test]
fn hand_computed_quartiles() {
    let s = summarize(&[7.0, 1.0, 3.0, 9.0, 5.0]).unwrap();
    assert_eq!((s.q1, s.median, s.q3, s.mean), (3.0, 5.0, 7.0, 5.0));
    let s = summarize(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
    // iqr 2: fences at -1 and 7, truncated to the data range
    assert_eq!((s.whisker_low, s.whisker_high), (1.0, 7.0));
    assert_eq!(s.outliers, vec![100.0]);
}

fn pendulum_env(d: f64) -> saute_core::Result<SauteEnv<PendulumEnv>> {
    let mut cfg = SauteConfig::fixed(d, 1.0, 1.0);
    cfg.mode = Mode::MaximizeReward;
    let params = PendulumParams { horizon: 60, ..Default::default() };
    SauteEnv::new(PendulumEnv::new(params)?, cfg)
}

fn bang(obs: &[f64]) -> Action {
    Action::continuous(&[if obs[2] >= 0.0 { 2.0 } else { -2.0 }])
}

#[test]
fn evaluation_is_independent_of_thread_count() {
    let settings = EvalSettings { n_seeds: 2, n_trajectories: 12, master_seed: 4 };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| evaluate(|| pendulum_env(3.0), |_| Ok(FnPolicy(bang)), &settings, 3.0).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.trajectories, b.trajectories);
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.trajectories.len(), 24);
}

#[test]
fn stats_track_violations_and_normalized_totals() {
    let settings = EvalSettings { n_seeds: 1, n_trajectories: 10, master_seed: 0 };
    let out = evaluate(|| pendulum_env(3.0), |_| Ok(FnPolicy(bang)), &settings, 3.0).unwrap();
    let s = &out.stats;
    let manual = out.trajectories.iter().filter(|t| t.budget_used > 3.0).count() as f64 / 10.0;
    assert_eq!(s.violation_fraction, manual);
    // safety totals divided by d: violated exactly when above the line at 1
    for t in &out.trajectories {
        assert_eq!(t.budget_used / 3.0 > 1.0, t.budget_used > 3.0);
    }
    let again = eval_stats(&out.trajectories, 3.0).unwrap();
    assert_eq!(&again, s);
    assert!(s.cost_rate >= 0.0 && s.cost_rate <= 1.0);
    assert_eq!(s.episodes, 10);
}

fn tiny_plan() -> ExperimentPlan {
    ExperimentPlan {
        name: "tiny".into(),
        environment: EnvConfig::Gridworld { params: GridworldParams::two_corridor(0.0) },
        agent: AgentConfig::Lagrangian { config: LagrangianConfig { iterations: 20, ..Default::default() } },
        saute: SauteConfig::fixed(6.0, 1.0, 200.0),
        eval: EvalSection { n_seeds: 2, n_eval_trajectories: 20, trajectories_override: None },
        ablations: Ablations::default(),
        generalization: None,
        master_seed: 3,
    }
}

#[test]
fn report_round_trips_through_json_and_csv() {
    let report = run_plan(&tiny_plan()).unwrap();
    let json = to_json(&report).unwrap();
    assert_eq!(from_json(&json).unwrap(), report);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    export_results(&report, ExportFormat::Json, &path).unwrap();
    assert_eq!(read_report(&path).unwrap(), report);

    let csv = to_csv(&report);
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, csv_header());
    let cols: Vec<&str> = header.split(',').collect();
    assert_eq!(&cols[..8], &CSV_COLUMNS[..8]);
    assert_eq!(cols.len(), 8 + 3 * 9);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), cols.len());
    assert_eq!(row[0], "lagrangian");
    let vf: f64 = row[5].parse().unwrap();
    assert_eq!(vf, report.cells[0].stats.violation_fraction);
}

#[test]
fn plan_runs_are_reproducible() {
    let a = to_csv(&run_plan(&tiny_plan()).unwrap());
    let b = to_csv(&run_plan(&tiny_plan()).unwrap());
    assert_eq!(a, b);
    let mut other = tiny_plan();
    other.master_seed = 4;
    assert_ne!(to_csv(&run_plan(&other).unwrap()), a);
}

#[test]
fn plan_json_rejects_unknown_fields() {
    let mut v = serde_json::to_value(tiny_plan()).unwrap();
    assert!(serde_json::from_value::<ExperimentPlan>(v.clone()).is_ok());
    v["bogus"] = serde_json::json!(1);
    assert!(serde_json::from_value::<ExperimentPlan>(v).is_err());
}

#[test]
fn planner_agents_rejected_on_tabular_env() {
    let mut plan = tiny_plan();
    plan.agent = AgentConfig::RandomShooting { horizon: 3, samples: 3 };
    assert!(run_plan(&plan).is_err());
    let mut plan = tiny_plan();
    plan.environment = EnvConfig::Pendulum { params: PendulumParams::default() };
    assert!(run_plan(&plan).is_err());
}
