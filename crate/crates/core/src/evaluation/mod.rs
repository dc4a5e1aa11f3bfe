//! Train/test splitting, confusion-matrix metrics, ROC AUC and result
//! tables.

mod metrics;
mod report;
mod split;

use thiserror::Error;

pub use metrics::{
    metrics_multiclass, metrics_two_level, roc_auc, weighted_f1, BinaryMetrics, ConfusionMatrix,
    MetricFlag, MulticlassMetrics,
};
pub use report::{
    best_flags, build_report, evaluate_predictions, EvaluationRecord, EvaluationReport,
    ReportMetric, ReportRow, ReportTable, SchemeMetrics,
};
pub use split::{split_train_test, stratified_split, DEFAULT_TRAIN_RATIO, MIN_SPLIT_ROWS};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("need at least 5 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("AUC undefined: both classes must be present")]
    UndefinedAuc,
    #[error("no evaluations to report")]
    EmptyReport,
    #[error("{0}")]
    Config(String),
}
