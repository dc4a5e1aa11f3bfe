//! End-to-end orchestration: configuration, the synthetic cohort
//! generator, deterministic runs and scoring of new candidates.

mod candidate;
mod config;
mod run;
mod seeds;
mod stages;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

pub use candidate::{score_candidate, CandidateScore, Coverage, Provenance, TraitScore};
pub use config::{CatalogParams, InputPaths, PipelineConfig, SplitParams};
pub use run::{
    model_path, run_pipeline, selected_path, split_path, JobEntry, JobStatus, Manifest, RunSummary, SplitEntry,
    MANIFEST_FILE, MANIFEST_VERSION,
};
pub use seeds::{derive_seed, job_seed, split_seed};
pub use stages::{
    evaluate_on_split, fit_trait_scheme, label_table, load_demographics, load_profiles, load_run_inputs,
    load_snapshots, read_label_csv, select_for_split,
    split_rows, train_for_split, write_label_csv, FittedJob, LabelTable, RunInputs, SplitRecord, TraitSplit,
};
pub use synth::{
    generate_synthetic_cohort, responses_for_scores, GroundTruth, MissingnessRates, PlantedAccount,
    SyntheticCohort, SyntheticCohortSpec, TraitEffect,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed{}: {message}", trait_suffix(.trait_id))]
    Stage {
        stage: &'static str,
        trait_id: Option<crate::psychometrics::Trait>,
        message: String,
    },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("refusing to score: {0}")]
    Incompatible(String),
}

fn trait_suffix(t: &Option<crate::psychometrics::Trait>) -> String {
    t.map(|t| format!(" for `{t}`")).unwrap_or_default()
}

impl PipelineError {
    pub fn stage(stage: &'static str, trait_id: Option<crate::psychometrics::Trait>, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            trait_id,
            message: e.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the inputs or configuration rather than a
    /// failing stage.
    pub fn is_validation(&self) -> bool {
        matches!(self, PipelineError::Config(_) | PipelineError::Incompatible(_))
    }
}
