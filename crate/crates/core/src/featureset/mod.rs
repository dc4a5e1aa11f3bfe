//! Popular-account catalog, demographic encodings and the participant x
//! feature matrix.

mod catalog;
mod demographics;
mod matrix;

use thiserror::Error;

pub use catalog::{build_popular_catalog, PopularAccountCatalog, DEFAULT_MIN_PARTICIPANTS};
pub use demographics::{
    demographic_feature_names, encode_demographics, read_demographics, write_demographics,
    Demographics, Education, Gender, Occupation,
};
pub use matrix::{
    assemble_matrix, demographic_cells, feature_catalog, indicator_name, instagram_cells,
    FeatureCatalog, FeatureCategory, FeatureColumn, FeatureMatrix, CATALOG_COUNT_FEATURE,
    FEATURE_CATALOG_VERSION,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("catalog error: {0}")]
    Catalog(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("duplicate participant `{0}`")]
    DuplicateParticipant(String),
    #[error("matrix error: {0}")]
    Matrix(String),
}
