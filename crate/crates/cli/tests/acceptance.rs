//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Numeric arguments select
//! criteria, e.g. `cargo test -p saute-cli --test acceptance -- 1 7`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use saute_cli::config::{load, RunConfig, T1Config, T2bConfig, T3Config, T3Policy};
use saute_cli::verify::{run_t1, run_t2b, run_t3};
use saute_core::eval::{run_plan, CellReport, ExperimentPlan, ExperimentReport};
use saute_core::mdp::{
    discounted_sum, prefix_constraint_equivalence, rollout, safety_margin, ActionSpace, CmdpSpec, FnPolicy, Transition,
};
use saute_core::{seed, Action, Environment, Info, SauteConfig, SauteEnv};

type Check = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn plan(name: &str) -> Result<ExperimentPlan, String> {
    let (cfg, _) = load::<RunConfig>(&configs().join(name)).map_err(|e| e.to_string())?;
    Ok(cfg.into_plan())
}

fn run(name: &str) -> Result<ExperimentReport, String> {
    run_plan(&plan(name)?).map_err(|e| e.to_string())
}

fn cell<'a>(report: &'a ExperimentReport, name: &str) -> Result<&'a CellReport, String> {
    report.cells.iter().find(|c| c.cell == name).ok_or_else(|| format!("no '{name}' cell in {}", report.name))
}

fn oracle_equivalence() -> Check {
    let r = run_t1(&T1Config::default()).map_err(|e| e.to_string())?;
    ensure(r.passed, || format!("{}; first failure {}", r.summary, r.failures[0]))?;
    ensure(r.summary.starts_with("20/20"), || r.summary.clone())?;
    Ok(r.summary)
}

fn monotonicity() -> Check {
    let cfg = T2bConfig::default();
    ensure(cfg.fixtures.len() == 3, || "expected three fixtures".into())?;
    let r = run_t2b(&cfg).map_err(|e| e.to_string())?;
    ensure(r.passed, || format!("{}: {:?}", r.summary, r.failures))?;
    Ok(r.summary)
}

fn almost_sure_safety() -> Check {
    let greedy = run_t3(&T3Config::default()).map_err(|e| e.to_string())?;
    ensure(greedy.passed, || greedy.summary.clone())?;
    let control = T3Config { fixtures: vec!["risky-chain".into()], policy: T3Policy::Random, ..Default::default() };
    let random = run_t3(&control).map_err(|e| e.to_string())?;
    ensure(!random.passed, || format!("random policy never violated: {}", random.summary))?;
    Ok(format!("greedy {}; random control {}", greedy.summary, random.summary))
}

fn pendulum_safety() -> Check {
    let report = run("pendulum-saute-cem.json")?;
    let full = cell(&report, "full")?;
    let raw = cell(&report, "no_cs")?;
    let d = full.budget_d;
    ensure(d == 30.0 && full.stats.episodes == 500, || format!("d {d}, {} episodes", full.stats.episodes))?;
    ensure(full.stats.violation_fraction == 0.0 && full.stats.max_safety_total <= d, || {
        format!(
            "sauteed CEM violated: fraction {}, max total {}",
            full.stats.violation_fraction, full.stats.max_safety_total
        )
    })?;
    let raw_violations = (raw.stats.violation_fraction * raw.stats.episodes as f64).round();
    ensure(raw_violations >= 1.0, || "raw-objective CEM never violated".into())?;
    Ok(format!(
        "sauteed 0/500 violations (max total {:.3}); raw objective {raw_violations}/500",
        full.stats.max_safety_total
    ))
}

fn average_vs_almost_sure() -> Check {
    let lag_report = run("gridworld-lagrangian.json")?;
    let lag = cell(&lag_report, "lagrangian")?;
    let d = lag.budget_d;
    ensure(lag_report.notes.is_empty(), || format!("lagrangian did not converge: {:?}", lag_report.notes))?;
    let mean = lag.stats.safety_total.mean;
    ensure(mean <= 1.05 * d, || format!("lagrangian mean safety {mean} > 1.05 d"))?;
    let lag_vf = lag.stats.violation_fraction;
    ensure(lag_vf > 0.05, || format!("lagrangian violation fraction {lag_vf} <= 0.05"))?;

    let saute_report = run("gridworld-saute-q.json")?;
    let saute = cell(&saute_report, "full")?;
    ensure(saute.stats.violation_fraction == 0.0, || {
        format!("sauteed violation fraction {}", saute.stats.violation_fraction)
    })?;
    // returns are negated costs: the Lagrangian q1 return is its q3 cost
    let (ours, bar) = (saute.stats.task_return.median, lag.stats.task_return.q3);
    ensure(ours <= bar, || format!("sauteed median cost {ours} above lagrangian q3 cost {bar}"))?;
    Ok(format!(
        "lagrangian mean safety {mean:.3} (d {d}), violation fraction {lag_vf}; sauteed 0 violations, median cost {ours} <= {bar}"
    ))
}

fn budget_generalization() -> Check {
    let p = plan("gridworld-generalization.json")?;
    let g = p.generalization.clone().ok_or("plan has no generalization section")?;
    let report = run_plan(&p).map_err(|e| e.to_string())?;
    let rows = report.generalization.ok_or("no generalization rows")?;
    let mut parts = Vec::new();
    for &b in &g.eval_budgets {
        let meta = rows.get("meta", b).ok_or(format!("no meta row at {b}"))?;
        let naive = rows.get("naive", b).ok_or(format!("no naive row at {b}"))?;
        let (mv, nv) = (meta.stats.violation_fraction, naive.stats.violation_fraction);
        ensure(mv == 0.0, || format!("meta violation fraction {mv} at budget {b}"))?;
        if b < g.central_budget {
            ensure(nv >= mv, || format!("naive {nv} < meta {mv} at budget {b}"))?;
        }
        parts.push(format!("d={b}: meta {mv}, naive {nv}"));
    }
    Ok(parts.join("; "))
}

/// Replays scripted costs.
struct Scripted {
    task: Vec<f64>,
    safety: Vec<f64>,
    spec: CmdpSpec,
    t: usize,
}

impl Scripted {
    fn new(task: Vec<f64>, safety: Vec<f64>, gamma_l: f64) -> Self {
        let spec = CmdpSpec {
            state_dim: 1,
            action_space: ActionSpace::Discrete { n: 1 },
            gamma_c: 1.0,
            gamma_l,
            budget_d: 1.0,
            horizon: task.len(),
        };
        Scripted { task, safety, spec, t: 0 }
    }
}

impl Environment for Scripted {
    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> saute_core::Result<Vec<f64>> {
        self.t = 0;
        Ok(vec![0.0])
    }

    fn step(&mut self, _action: &Action) -> saute_core::Result<Transition> {
        let t = self.t;
        self.t += 1;
        Ok(Transition {
            observation: vec![t as f64],
            task_cost: self.task[t],
            safety_cost: self.safety[t],
            done: self.t == self.task.len(),
            info: Info::new(),
        })
    }
}

const PENALTY: f64 = 7.0;

/// Safety states and emitted costs of one wrapped replay.
fn wrapped(safety: &[f64], d: f64, gamma_l: f64, normalize: bool) -> (Vec<f64>, Vec<f64>) {
    let task = vec![0.5; safety.len()];
    let mut cfg = SauteConfig::fixed(d, gamma_l, PENALTY);
    cfg.normalize = normalize;
    let mut env = SauteEnv::new(Scripted::new(task, safety.to_vec(), gamma_l), cfg).expect("valid config");
    let traj = rollout(&mut env, &mut FnPolicy(|_: &[f64]| Action::Discrete(0)), safety.len(), 0).expect("replay");
    (traj.steps.iter().map(|s| s.z.unwrap()).collect(), traj.steps.iter().map(|s| s.emitted_cost).collect())
}

fn wrapper_algebra() -> Check {
    const CASES: u64 = 10_000;
    let mut rng = seed::stream(20_240_901, 9);
    let sequence = |rng: &mut seed::SimRng, integer: bool| -> Vec<f64> {
        let len = rng.random_range(1..40);
        (0..len)
            .map(|_| if integer { f64::from(rng.random_range(0u8..4)) } else { rng.random_range(0.0..3.0) })
            .collect()
    };
    for case in 0..CASES {
        let fail = |what: &str| format!("{what} failed on case {case}");
        let safety = sequence(&mut rng, false);
        let d: f64 = rng.random_range(0.5..40.0);
        let gamma_l: f64 = if rng.random_bool(0.3) { 1.0 } else { rng.random_range(0.8..1.0) };

        // telescoping: with gamma_l = 1, z_t = d - sum of costs so far
        let (z, _) = wrapped(&safety, d, 1.0, false);
        let mut spent = 0.0;
        for (t, l) in safety.iter().enumerate() {
            spent += l;
            ensure((z[t] - (d - spent)).abs() <= 1e-12 * (1.0 + d + spent), || fail("telescoping"))?;
        }

        // discount: gamma_l^(t+1) z_{t+1} = d - discounted sum
        let (zu, emitted_u) = wrapped(&safety, d, gamma_l, false);
        for t in 0..safety.len() {
            let w = discounted_sum(&safety[..=t], gamma_l);
            let lhs = zu[t] * gamma_l.powi(t as i32 + 1);
            ensure((lhs - (d - w)).abs() <= 1e-9 * (1.0 + d + w), || fail("discount"))?;
        }

        // normalization: normalized z is raw z over d, same emitted costs
        let (zn, emitted_n) = wrapped(&safety, d, gamma_l, true);
        for (a, b) in zn.iter().zip(&zu) {
            ensure((a - b / d).abs() <= 1e-12 * a.abs().max(1.0), || fail("normalization"))?;
        }
        ensure(emitted_n == emitted_u, || fail("normalization (emitted costs)"))?;

        // sign: some z < 0 iff the constraint is violated, on real and on
        // integer sequences where exact ties at zero occur
        let ints = sequence(&mut rng, true);
        let di = f64::from(rng.random_range(1u8..12));
        for (seq, budget, g) in [(&safety, d, gamma_l), (&ints, di, 1.0)] {
            let (z, emitted) = wrapped(seq, budget, g, true);
            let mut raw = Scripted::new(vec![0.0; seq.len()], seq.to_vec(), g);
            let traj = rollout(&mut raw, &mut FnPolicy(|_: &[f64]| Action::Discrete(0)), seq.len(), 0)
                .map_err(|e| e.to_string())?;
            let violated = safety_margin(&traj, budget, g).map_err(|e| e.to_string())? < 0.0;
            ensure(z.iter().any(|&v| v < 0.0) == violated, || fail("sign"))?;
            for (zt, c) in z.iter().zip(&emitted) {
                ensure((*zt < 0.0) == (*c == PENALTY), || fail("sign (penalty placement)"))?;
            }

            // prefix: every prefix within budget iff the full episode is
            ensure(prefix_constraint_equivalence(&traj, budget, g), || fail("prefix"))?;
        }
    }
    Ok(format!(
        "telescoping, discount, normalization, sign and prefix hold on {CASES} random sequences each \
         (sign and prefix also on {CASES} integer sequences)"
    ))
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("saute-acceptance-{}", std::process::id()));
    let config = configs().join("pendulum-saute-cem.json");
    let mut csvs = Vec::new();
    for (i, jobs) in ["1", "2"].iter().enumerate() {
        let out = dir.join(format!("run{i}"));
        let o = Command::new(env!("CARGO_BIN_EXE_saute"))
            .arg("run")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--jobs", jobs, "--force"])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
        csvs.push(fs::read(out.join("results.csv")).map_err(|e| e.to_string())?);
    }
    let _ = fs::remove_dir_all(&dir);
    ensure(csvs[0] == csvs[1], || "CSV differs between runs".into())?;
    Ok(format!("two runs (--jobs 1 and 2) produced identical {}-byte CSVs", csvs[0].len()))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "oracle equivalence", limit: Duration::from_secs(60), run: oracle_equivalence },
        Criterion { id: 2, name: "penalty monotonicity", limit: Duration::from_secs(30), run: monotonicity },
        Criterion { id: 3, name: "almost-sure safety", limit: Duration::from_secs(30), run: almost_sure_safety },
        Criterion { id: 4, name: "pendulum safety", limit: Duration::from_secs(20 * 60), run: pendulum_safety },
        Criterion {
            id: 5,
            name: "average vs almost-sure",
            limit: Duration::from_secs(600),
            run: average_vs_almost_sure,
        },
        Criterion { id: 6, name: "budget generalization", limit: Duration::from_secs(600), run: budget_generalization },
        Criterion { id: 7, name: "wrapper algebra", limit: Duration::from_secs(10), run: wrapper_algebra },
        Criterion { id: 8, name: "determinism", limit: Duration::from_secs(20 * 60), run: determinism },
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > c.limit => Err(format!("{detail}; exceeded {:?}", c.limit)),
            other => other,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(result.is_err());
        println!("criterion {} {tag} {} ({:.1}s): {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
