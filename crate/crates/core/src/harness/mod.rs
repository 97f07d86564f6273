//! Experiment orchestration: factor analysis, outcome tests, the
//! contamination sweep and the non-adherent-data ablation, with seeded
//! replication and report emission.

mod analysis;
mod config;
mod experiments;
mod report;

pub use analysis::{
    candidate_factors, render_ttest, run_factor_analysis, run_outcome_ttest, Factor, FactorReport, FactorRow,
    OutcomeReport, OutcomeRow, SIGNIFICANCE,
};
pub use config::{derive_seed, CohortSource, ExperimentConfig, ExperimentKind, DEFAULT_SYNTHETIC_N};
pub use experiments::{ablation_condition, ratio_condition, run_ablation, run_vary_ratio};
pub use report::{
    emit_report, mean_sem, metric_names, ExperimentReport, ExperimentRow, GroupMetrics, MetricSummary, ReportFormat,
};
