use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use saute_core::envs::make_fixture;
use saute_core::eval::{export_results, read_report, run_plan_with, to_csv, to_json, ExperimentReport, ExportFormat};
use saute_core::solver::{build_saute_mdp, finite_horizon, value_iteration, Interpolation, ValueTable};

use crate::config::{self, BridgeConfig, RunConfig, SolveConfig, SolveMethod, VerifyConfig};
use crate::error::{CliError, CliResult};
use crate::verify::{exact_grid, run_t1, run_t2b, run_t3, SuiteReport};

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const MANIFEST: &str = "manifest.json";
pub const FAILED_MARKER: &str = "FAILED";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn check_writable(path: &Path, force: bool) -> CliResult<()> {
    if path.exists() && !force {
        return Err(CliError::Exists { path: path.display().to_string() });
    }
    Ok(())
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Default output path for `solve`: the config path with a `.values.json`
/// suffix in place of its extension.
pub fn default_solve_output(config: &Path) -> PathBuf {
    config.with_extension("values.json")
}

pub fn solve(config_path: &Path, out: &Path, force: bool, log: &mut dyn Write) -> CliResult<ValueTable> {
    let (cfg, _) = config::load::<SolveConfig>(config_path)?;
    check_writable(out, force)?;
    let cmdp = make_fixture(&cfg.fixture)?;
    let grid = match cfg.z_grid {
        Some(g) => g,
        None => exact_grid(&cmdp)?,
    };
    let horizon = cmdp.horizon;
    let mdp = build_saute_mdp(cmdp, grid, cfg.reshape_n, Interpolation::Nearest)?;
    let table = match cfg.method {
        SolveMethod::ValueIteration => value_iteration(&mdp, cfg.tol, cfg.max_iters)?,
        SolveMethod::FiniteHorizon => finite_horizon(&mdp, horizon),
    };
    write_file(out, serde_json::to_string_pretty(&table).map_err(saute_core::Error::from)?.as_bytes())?;
    let _ = writeln!(log, "residual {:e}", table.residual);
    let _ = writeln!(log, "iterations {}", table.iterations);
    let _ = writeln!(log, "wrote {}", out.display());
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    T1,
    T2b,
    T3,
}

pub fn verify(suite: Suite, config_path: &Path, log: &mut dyn Write) -> CliResult<SuiteReport> {
    let (cfg, _) = config::load::<VerifyConfig>(config_path)?;
    let report = match suite {
        Suite::T1 => run_t1(&cfg.t1)?,
        Suite::T2b => run_t2b(&cfg.t2b)?,
        Suite::T3 => run_t3(&cfg.t3)?,
    };
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    let _ = writeln!(log, "{} {verdict}: {}", report.suite, report.summary);
    if !report.passed {
        for f in &report.failures {
            let _ = writeln!(log, "{f}");
        }
        return Err(CliError::Verification(format!("{}: {}", report.suite, report.summary)));
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema_version: String,
    pub name: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub engine_version: String,
    pub cli_version: String,
    pub cells: usize,
    /// File name to sha256 of its contents.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub dry_run: bool,
    pub jobs: Option<usize>,
    pub force: bool,
}

/// Executes a run config into `out`. Results are rewritten after every
/// finished cell; a failure leaves them in place next to a `FAILED` marker.
pub fn run(
    config_path: &Path,
    out: &Path,
    opts: &RunOptions,
    log: &mut (dyn Write + Send),
) -> CliResult<Option<ExperimentReport>> {
    let (cfg, bytes) = config::load::<RunConfig>(config_path)?;
    let plan = cfg.into_plan();
    plan.validate().map_err(|e| CliError::config(config_path, e.to_string()))?;
    if opts.dry_run {
        let _ = write!(log, "{}", plan.describe());
        let _ = writeln!(log, "config sha256 {}", sha256_hex(&bytes));
        return Ok(None);
    }
    for name in [RESULTS_CSV, RESULTS_JSON, MANIFEST, FAILED_MARKER] {
        check_writable(&out.join(name), opts.force)?;
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let marker = out.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| CliError::io(&marker, e))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(config_path, format!("thread pool: {e}")))?;
    let mut partial = ExperimentReport { name: plan.name.clone(), master_seed: plan.master_seed, ..Default::default() };
    let mut flush_error = None;
    let result = pool.install(|| {
        run_plan_with(&plan, &mut |cell| {
            partial.cells.push(cell.clone());
            if let Err(e) = write_results(out, &partial) {
                flush_error = Some(e);
                return Err(saute_core::Error::InvalidConfig("could not write partial results".into()));
            }
            let _ = writeln!(log, "cell {} done: violation fraction {}", cell.cell, cell.stats.violation_fraction);
            Ok(())
        })
    });
    if let Some(e) = flush_error {
        return Err(fail(out, e));
    }
    let report = result.map_err(|e| fail(out, e.into()))?;

    let files = write_results(out, &report)?;
    let manifest = Manifest {
        schema_version: config::SCHEMA_VERSION.into(),
        name: report.name.clone(),
        config_sha256: sha256_hex(&bytes),
        master_seed: report.master_seed,
        engine_version: saute_core::VERSION.into(),
        cli_version: env!("CARGO_PKG_VERSION").into(),
        cells: report.cells.len(),
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(saute_core::Error::from)?;
    write_file(&out.join(MANIFEST), text.as_bytes())?;
    for note in &report.notes {
        let _ = writeln!(log, "note: {note}");
    }
    let _ = writeln!(log, "wrote {}", out.display());
    Ok(Some(report))
}

fn write_results(out: &Path, report: &ExperimentReport) -> CliResult<BTreeMap<String, String>> {
    let csv = to_csv(report);
    let json = to_json(report)?;
    write_file(&out.join(RESULTS_CSV), csv.as_bytes())?;
    write_file(&out.join(RESULTS_JSON), json.as_bytes())?;
    Ok(BTreeMap::from([
        (RESULTS_CSV.into(), sha256_hex(csv.as_bytes())),
        (RESULTS_JSON.into(), sha256_hex(json.as_bytes())),
    ]))
}

fn fail(out: &Path, e: CliError) -> CliError {
    let _ = fs::write(out.join(FAILED_MARKER), format!("{e}\n"));
    e
}

pub fn export(input: &Path, format: ExportFormat, out: &Path, force: bool) -> CliResult<()> {
    let report = read_report(input)?;
    check_writable(out, force)?;
    export_results(&report, format, out)?;
    Ok(())
}

pub fn serve(config_path: &Path) -> CliResult<()> {
    let (cfg, _) = config::load::<BridgeConfig>(config_path)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    crate::bridge::serve_config(&cfg.environment, &cfg.saute, stdin.lock(), stdout.lock())
}
