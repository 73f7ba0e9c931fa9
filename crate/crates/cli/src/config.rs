//! JSON config files. Every file carries `schema_version`; unknown keys are
//! rejected so that typos fail loudly instead of silently taking defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use saute_core::eval::{Ablations, AgentConfig, EnvConfig, EvalSection, ExperimentPlan, GeneralizationPlan};
use saute_core::saute::Penalty;
use saute_core::solver::ZGrid;
use saute_core::SauteConfig;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "1";

/// Anything with a schema version field.
pub trait Versioned {
    fn schema_version(&self) -> &str;
}

/// Reads and parses a config file, checking the schema version.
/// Syntax and schema errors carry line and column.
pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> CliResult<(T, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let cfg = parse::<T>(path, &bytes)?;
    Ok((cfg, bytes))
}

pub fn parse<T: DeserializeOwned + Versioned>(path: &Path, bytes: &[u8]) -> CliResult<T> {
    let cfg: T = serde_json::from_slice(bytes).map_err(|e| CliError::config(path, e.to_string()))?;
    if cfg.schema_version() != SCHEMA_VERSION {
        return Err(CliError::config(
            path,
            format!("schema_version '{}' is not supported (expected '{SCHEMA_VERSION}')", cfg.schema_version()),
        ));
    }
    Ok(cfg)
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn schema_version(&self) -> &str {
                &self.schema_version
            }
        })*
    };
}

versioned!(RunConfig, SolveConfig, VerifyConfig, BridgeConfig);

/// Config for `run`: an experiment plan plus the schema version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
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

impl RunConfig {
    pub fn into_plan(self) -> ExperimentPlan {
        ExperimentPlan {
            name: self.name,
            environment: self.environment,
            agent: self.agent,
            saute: self.saute,
            eval: self.eval,
            ablations: self.ablations,
            generalization: self.generalization,
            master_seed: self.master_seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Discounted infinite-horizon value iteration.
    #[default]
    ValueIteration,
    /// Backward induction over the fixture horizon.
    FiniteHorizon,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_max_iters() -> usize {
    100_000
}

/// Config for `solve`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub schema_version: String,
    pub fixture: String,
    pub reshape_n: Penalty,
    /// Defaults to the integer grid up to the fixture budget.
    #[serde(default)]
    pub z_grid: Option<ZGrid>,
    #[serde(default)]
    pub method: SolveMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T1Config {
    /// Seeds `first_seed .. first_seed + instances` of the tiny-random family.
    pub instances: u64,
    pub first_seed: u64,
    pub penalty: Penalty,
    pub tol: f64,
    /// Also solve every instance with the infinite penalty.
    pub check_infinite: bool,
}

impl Default for T1Config {
    fn default() -> Self {
        T1Config { instances: 20, first_seed: 0, penalty: Penalty::Finite(1e4), tol: 1e-9, check_infinite: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T2bConfig {
    pub fixtures: Vec<String>,
    pub n_values: Vec<f64>,
}

impl Default for T2bConfig {
    fn default() -> Self {
        T2bConfig {
            fixtures: vec!["risky-chain".into(), "det-chain".into(), "two-corridor".into()],
            n_values: vec![0.0, 1.0, 10.0, 100.0, 1000.0],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T3Policy {
    /// Greedy policy of the finite-horizon solve.
    #[default]
    Greedy,
    /// Uniformly random actions; a negative control that should fail.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T3Config {
    pub fixtures: Vec<String>,
    pub penalty: f64,
    pub episodes: usize,
    pub seed: u64,
    pub policy: T3Policy,
}

impl Default for T3Config {
    fn default() -> Self {
        T3Config {
            fixtures: vec!["risky-chain".into(), "two-corridor".into()],
            penalty: 1000.0,
            episodes: 1000,
            seed: 11,
            policy: T3Policy::Greedy,
        }
    }
}

/// Config for `verify`. Each section has defaults, so `{"schema_version": "1"}`
/// runs the standard suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub schema_version: String,
    #[serde(default)]
    pub t1: T1Config,
    #[serde(default)]
    pub t2b: T2bConfig,
    #[serde(default)]
    pub t3: T3Config,
}

/// Config for `serve`: the environment exposed over stdio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeConfig {
    pub schema_version: String,
    pub environment: EnvConfig,
    pub saute: SauteConfig,
}
