//! Confusion matrices, per-class metrics and report emission.

mod confusion;
mod metrics;
mod plot;
mod predlog;
mod report;

pub use confusion::ConfusionMatrix;
pub use metrics::{
    aggregate_folds, overall_accuracy, per_class_metrics, round_half_up_2, ClassMetrics, Metric,
    MetricsReport,
};
pub use plot::render_confusion_png;
pub use predlog::{confusion_from_rows, read_prediction_log, write_prediction_log, PredictionRow};
pub use report::{emit_reports, ReportPaths, REPORT_SCHEMA_VERSION};
