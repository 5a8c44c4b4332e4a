//! Energy-accuracy metric, leave-one-out protocol, configuration sweep and
//! report assembly.

mod loocv;
mod metric;
mod report;
mod sweep;

pub use loocv::{evaluate_loocv, HomeOutcome, LoocvContext, LoocvOutcome, Ranking};
pub use metric::{energy_accuracy, month_accuracies, profile_score, MetricConfig, MonthSet, Score, ZeroActualRule};
pub use report::{
    monthly_series, pooled_accuracy, ApplianceReport, EvaluationReport, HomeSeries, MonthPoint, MonthlySeries,
    OracleSummary, ReferenceAccuracy, SCHEMA_VERSION,
};
pub use sweep::{
    sensitivity_features, sensitivity_k, sweep, sweep_column, GridCell, KPoint, SubsetPoint, SweepPlan, SweepResult,
};
