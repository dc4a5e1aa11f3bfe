use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::forest::{fit_with_cv, CvEntry, RandomForest};
use super::linear::{fit_binomial, fit_multinomial, LinearModel};
use super::mlp::{fit_mlp, Mlp};
use super::tree::{argmax, DecisionTree, TreeSettings};
use super::{Dense, LearnerError, ModelFamily, ModelSpec, Preprocessor};
use crate::featureset::FeatureMatrix;
use crate::psychometrics::{Level, Scheme};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedParams {
    Tree(DecisionTree),
    Linear(LinearModel),
    Forest(RandomForest),
    Mlp(Mlp),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub n_train: usize,
    pub class_counts: Vec<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub loss_history: Vec<f64>,
    pub cv: Vec<CvEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub preprocessing: Preprocessor,
    pub params: FittedParams,
    pub metadata: TrainingMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub level: Level,
    /// Per-class scores in class-index order.
    pub scores: Vec<f64>,
}

fn class_indices(labels: &[Level], scheme: Scheme) -> Result<Vec<usize>, LearnerError> {
    labels
        .iter()
        .map(|&l| {
            scheme
                .class_index(l)
                .ok_or_else(|| LearnerError::Scheme(format!("label {l} is not valid for the {scheme} scheme")))
        })
        .collect()
}

/// Fits imputation, standardization and the spec's learner on `matrix`,
/// whose columns become the model's feature list.
pub fn train_model(spec: &ModelSpec, matrix: &FeatureMatrix, labels: &[Level]) -> Result<TrainedModel, LearnerError> {
    spec.validate()?;
    if labels.len() != matrix.n_rows() {
        return Err(LearnerError::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.n_rows()
        )));
    }
    if labels.is_empty() {
        return Err(LearnerError::Shape("no training rows".into()));
    }
    let y = class_indices(labels, spec.scheme)?;
    let k = spec.scheme.n_classes();
    let preprocessing = Preprocessor::fit(matrix);
    let x = preprocessing.transform(matrix)?;
    let mut metadata = TrainingMetadata {
        n_train: x.rows,
        class_counts: (0..k).map(|c| y.iter().filter(|&&v| v == c).count()).collect(),
        ..TrainingMetadata::default()
    };
    let h = &spec.hyper;
    let params = match spec.family {
        ModelFamily::Dt => FittedParams::Tree(DecisionTree::fit::<rand_chacha::ChaCha8Rng>(
            &x,
            &y,
            k,
            (0..x.rows).collect(),
            TreeSettings {
                max_depth: h.tree.max_depth,
                min_leaf: h.tree.min_leaf,
                max_features: None,
            },
            None,
        )),
        ModelFamily::Lr | ModelFamily::Glm => {
            let (m, trace) = if k == 2 {
                fit_binomial(&x, &y, &h.linear)
            } else {
                fit_multinomial(&x, &y, k, &h.linear)
            };
            metadata.iterations = Some(trace.iterations);
            metadata.converged = Some(trace.converged);
            metadata.loss_history = trace.loss_history;
            FittedParams::Linear(m)
        }
        ModelFamily::Rf => {
            let (forest, cv) = fit_with_cv(&x, &y, k, &h.forest, spec.seed);
            metadata.cv = cv;
            FittedParams::Forest(forest)
        }
        ModelFamily::Mlp => {
            let (net, trace) = fit_mlp(&x, &y, k, &h.mlp, spec.seed);
            metadata.iterations = Some(trace.epochs);
            metadata.loss_history = trace.loss_history;
            FittedParams::Mlp(net)
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        feature_names: matrix.catalog.columns.iter().map(|c| c.name.clone()).collect(),
        preprocessing,
        params,
        metadata,
    })
}

fn train_family(
    family: ModelFamily,
    matrix: &FeatureMatrix,
    labels: &[Level],
    spec: &ModelSpec,
) -> Result<TrainedModel, LearnerError> {
    if spec.family != family {
        return Err(LearnerError::Config(format!(
            "expected a {family} spec, got {}",
            spec.family
        )));
    }
    train_model(spec, matrix, labels)
}

pub fn train_decision_tree(matrix: &FeatureMatrix, labels: &[Level], spec: &ModelSpec) -> Result<TrainedModel, LearnerError> {
    train_family(ModelFamily::Dt, matrix, labels, spec)
}

pub fn train_logistic_regression(
    matrix: &FeatureMatrix,
    labels: &[Level],
    spec: &ModelSpec,
) -> Result<TrainedModel, LearnerError> {
    train_family(ModelFamily::Lr, matrix, labels, spec)
}

pub fn train_glm(matrix: &FeatureMatrix, labels: &[Level], spec: &ModelSpec) -> Result<TrainedModel, LearnerError> {
    train_family(ModelFamily::Glm, matrix, labels, spec)
}

pub fn train_random_forest(matrix: &FeatureMatrix, labels: &[Level], spec: &ModelSpec) -> Result<TrainedModel, LearnerError> {
    train_family(ModelFamily::Rf, matrix, labels, spec)
}

pub fn train_mlp(matrix: &FeatureMatrix, labels: &[Level], spec: &ModelSpec) -> Result<TrainedModel, LearnerError> {
    train_family(ModelFamily::Mlp, matrix, labels, spec)
}

impl TrainedModel {
    /// Scores for an already preprocessed row.
    pub fn scores_dense(&self, x: &[f64]) -> Vec<f64> {
        match &self.params {
            FittedParams::Tree(t) => t.scores(x),
            FittedParams::Linear(m) => m.scores(x),
            FittedParams::Forest(f) => f.scores(x),
            FittedParams::Mlp(n) => n.scores(x),
        }
    }

    fn finish(&self, scores: Vec<f64>) -> Prediction {
        let level = self
            .spec
            .scheme
            .level(argmax(&scores))
            .expect("score vector has one entry per class");
        Prediction { level, scores }
    }

    /// Predicts one participant from named cells; the names must be exactly
    /// the model's feature list (any order).
    pub fn predict(&self, row: &[(String, Option<f64>)]) -> Result<Prediction, LearnerError> {
        let mut by_name: BTreeMap<&str, Option<f64>> = BTreeMap::new();
        for (name, v) in row {
            if by_name.insert(name.as_str(), *v).is_some() {
                return Err(LearnerError::Contract(format!("feature `{name}` given twice")));
            }
        }
        let cells: Vec<Option<f64>> = self
            .feature_names
            .iter()
            .map(|n| {
                by_name
                    .remove(n.as_str())
                    .ok_or_else(|| LearnerError::Contract(format!("missing feature `{n}`")))
            })
            .collect::<Result<_, _>>()?;
        if let Some(extra) = by_name.keys().next() {
            return Err(LearnerError::Contract(format!("unknown feature `{extra}`")));
        }
        let x = self.preprocessing.transform_cells(&cells);
        Ok(self.finish(self.scores_dense(&x)))
    }

    /// Predicts every row; columns are looked up by name and extra columns
    /// are ignored.
    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<Prediction>, LearnerError> {
        let x: Dense = self.preprocessing.transform(matrix)?;
        Ok((0..x.rows).map(|r| self.finish(self.scores_dense(x.row(r)))).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LearnerError> {
        let m: TrainedModel = serde_json::from_str(s).map_err(|e| LearnerError::Serialization(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnerError::Serialization(format!(
                "model format version {} is not supported",
                m.format_version
            )));
        }
        if m.preprocessing.input_names != m.feature_names {
            return Err(LearnerError::Serialization("preprocessing does not match feature list".into()));
        }
        Ok(m)
    }
}
