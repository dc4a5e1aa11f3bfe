use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::psychometrics::Scheme;

pub const DEFAULT_MLP_SEED: u64 = 1992;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Dt,
    Lr,
    Glm,
    Rf,
    Mlp,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::Dt,
        ModelFamily::Lr,
        ModelFamily::Glm,
        ModelFamily::Mlp,
        ModelFamily::Rf,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelFamily::Dt => "dt",
            ModelFamily::Lr => "lr",
            ModelFamily::Glm => "glm",
            ModelFamily::Rf => "rf",
            ModelFamily::Mlp => "mlp",
        }
    }

    /// Column heading used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelFamily::Dt => "DT",
            ModelFamily::Lr => "LR",
            ModelFamily::Glm => "GLM",
            ModelFamily::Rf => "RF",
            ModelFamily::Mlp => "DL",
        }
    }

    pub fn supports(self, scheme: Scheme) -> bool {
        !(self == ModelFamily::Lr && scheme == Scheme::Three)
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelFamily {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dt" => Ok(ModelFamily::Dt),
            "lr" => Ok(ModelFamily::Lr),
            "glm" => Ok(ModelFamily::Glm),
            "rf" => Ok(ModelFamily::Rf),
            "mlp" | "dl" => Ok(ModelFamily::Mlp),
            _ => Err(LearnerError::Config(format!("unknown model family `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 10,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            tolerance: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub grid: Vec<ForestConfig>,
    pub folds: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        let grid = [50, 100, 200]
            .iter()
            .flat_map(|&trees| {
                [4, 8, 16]
                    .iter()
                    .map(move |&max_depth| ForestConfig { trees, max_depth })
            })
            .collect();
        Self {
            grid,
            folds: 3,
            min_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![50],
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.01,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub tree: TreeParams,
    pub linear: LinearParams,
    pub forest: ForestParams,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub scheme: Scheme,
    pub seed: u64,
    #[serde(default)]
    pub hyper: Hyperparameters,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, scheme: Scheme, seed: u64) -> Self {
        Self {
            family,
            scheme,
            seed,
            hyper: Hyperparameters::default(),
        }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let h = &self.hyper;
        if !self.family.supports(self.scheme) {
            return Err(LearnerError::Scheme(format!(
                "{} is a two-level learner, got the {} scheme",
                self.family, self.scheme
            )));
        }
        match self.family {
            ModelFamily::Dt => {
                if h.tree.max_depth == 0 || h.tree.min_leaf == 0 {
                    return Err(LearnerError::Config("tree depth and leaf size must be positive".into()));
                }
            }
            ModelFamily::Lr | ModelFamily::Glm => {
                let l = &h.linear;
                if !(l.lambda > 0.0 && l.lambda.is_finite()) || !(l.tolerance > 0.0) || l.max_iter == 0 {
                    return Err(LearnerError::Config(
                        "linear models need lambda > 0, tolerance > 0 and max_iter > 0".into(),
                    ));
                }
            }
            ModelFamily::Rf => {
                let f = &h.forest;
                if f.grid.is_empty() {
                    return Err(LearnerError::Config("random forest grid is empty".into()));
                }
                if let Some(c) = f.grid.iter().find(|c| c.trees == 0 || c.max_depth == 0) {
                    return Err(LearnerError::Config(format!(
                        "random forest grid entry with {} trees and depth {}",
                        c.trees, c.max_depth
                    )));
                }
                if f.folds < 2 || f.min_leaf == 0 || f.max_features == Some(0) {
                    return Err(LearnerError::Config(
                        "random forest needs at least 2 folds, min_leaf > 0 and max_features > 0".into(),
                    ));
                }
            }
            ModelFamily::Mlp => {
                let m = &h.mlp;
                if m.epochs == 0 {
                    return Err(LearnerError::Config("MLP needs at least one epoch".into()));
                }
                if m.batch_size == 0 || m.hidden.iter().any(|&u| u == 0) || !(m.learning_rate > 0.0) || m.l2 < 0.0 {
                    return Err(LearnerError::Config("invalid MLP hyperparameters".into()));
                }
            }
        }
        Ok(())
    }
}
