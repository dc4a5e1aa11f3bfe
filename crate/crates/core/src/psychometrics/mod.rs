//! Questionnaire scoring, cohort norms, label binning and scale reliability.

mod key;
mod norms;
mod reliability;
mod traits;

use thiserror::Error;

pub use key::{
    read_responses, score_questionnaire, KeyedItem, ResponseRow, ScaleKey, ScoringKey,
    TraitProfile, NEO_ITEMS,
};
pub use norms::{bin_score, compute_norms, Norm, NormTable};
pub use reliability::cronbach_alpha;
pub use traits::{Level, ReferenceStats, Scheme, Trait, TraitLabel};

#[derive(Debug, Error)]
pub enum PsychometricsError {
    #[error("participant `{participant}`: item q{item} answer {value} outside {min}..={max}")]
    AnswerOutOfRange {
        participant: String,
        item: usize,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("item index {index} is not part of a {n_items}-item questionnaire")]
    UnknownItem { index: usize, n_items: usize },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("insufficient data for `{trait_id}`: {n} complete scores, need at least 2")]
    InsufficientData { trait_id: Trait, n: usize },
    #[error("insufficient data for reliability: {0}")]
    InsufficientReliabilityData(String),
    #[error("reliability undefined: total score variance is zero")]
    UndefinedReliability,
}
