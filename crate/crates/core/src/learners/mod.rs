//! Decision tree baseline and the LR, GLM, RF and MLP model families.

mod forest;
mod linear;
mod mlp;
mod model;
mod preprocess;
mod spec;
mod tree;

use thiserror::Error;

pub use forest::{default_max_features, fit_with_cv, CvEntry, RandomForest};
pub use linear::{binomial_objective, fit_binomial, fit_multinomial, multinomial_objective, softmax, FitTrace, LinearModel};
pub use mlp::{fit_mlp, Layer, Mlp, MlpTrace};
pub use model::{
    train_decision_tree, train_glm, train_logistic_regression, train_mlp, train_model,
    train_random_forest, FittedParams, Prediction, TrainedModel, TrainingMetadata,
    MODEL_FORMAT_VERSION,
};
pub use preprocess::{
    missing_flag_name, standardize_fit_apply, ColumnImputation, Dense, Preprocessor,
    StandardizationParams,
};
pub use spec::{
    ForestConfig, ForestParams, Hyperparameters, LinearParams, MlpParams, ModelFamily, ModelSpec,
    TreeParams, DEFAULT_MLP_SEED,
};
pub use tree::{argmax, DecisionTree, TreeNode, TreeSettings};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("model file error: {0}")]
    Serialization(String),
}
