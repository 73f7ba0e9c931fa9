//! Exact tabular solvers for Saute MDPs and their brute-force references.

mod augmented;
mod finite;
mod oracle;
mod verify;
mod vi;

pub use augmented::{build_saute_mdp, FiniteSauteMdp, Interpolation, ZGrid};
pub(crate) use finite::sample_index;
pub use finite::FiniteCmdp;
pub use oracle::{brute_force_safe_optimum, SafeOptimum, ENUMERATION_LIMIT};
pub use verify::{
    almost_sure_check, compare_with_oracle, monotone_convergence_report, MonotoneReport, OracleComparison,
    TabularDecision, UniformRandom,
};
pub use vi::{
    bellman_sweep, evaluate_stationary, finite_horizon, hard_constrained_values, initial_value, value_iteration,
    ValueTable,
};
