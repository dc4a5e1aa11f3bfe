pub mod featureset;
pub mod ingestion;
pub mod psychometrics;
pub mod selection;
pub mod learners;
pub mod evaluation;
pub mod pipeline;
