//! Correlation analysis and significance-gated feature selection.

mod correlation;
mod refine;
mod select;

use thiserror::Error;

use crate::psychometrics::{Level, Scheme};

pub use correlation::{
    pearson, pearson_pairwise, pearson_pvalue, Correlation, CorrelationEntry, CorrelationReport,
};
pub use refine::{refine_features, SubsetTrainer, REFINE_TRAIN_FRACTION};
pub use select::{
    select_features, target_indicator, SelectedFeature, SelectedFeatureSet, SelectionParams,
    SignRule,
};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 complete pairs, got {0}")]
    InsufficientData(usize),
    #[error("correlation undefined for a constant input")]
    UndefinedCorrelation,
    #[error("labels contain a single class")]
    DegenerateTarget,
    #[error("label {0} is not valid for the {1} scheme")]
    IllegalLabel(Level, Scheme),
    #[error("no candidate features to refine")]
    EmptyCandidates,
}
