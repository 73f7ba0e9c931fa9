//! Evaluation protocol: seeded rollouts, summaries, plans and export.

mod export;
mod harness;
mod plan;
mod stats;

pub use export::{csv_header, export_results, from_json, read_report, to_csv, to_json, ExportFormat, CSV_COLUMNS};
pub use harness::{
    budget_generalization, evaluate, EvalOutcome, EvalSettings, GeneralizationReport, GeneralizationRow,
};
pub use plan::{
    ablation_sweep, run_plan, run_plan_with, Ablations, AgentConfig, CellReport, EnvConfig, EvalSection,
    ExperimentPlan, ExperimentReport, GeneralizationPlan,
};
pub use stats::{eval_stats, percentile, raw_z_path, summarize, violation_fraction, EvalStats, MetricSummary};
