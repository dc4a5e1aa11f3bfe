use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::SyntheticCohortSpec;
use super::PipelineError;
use crate::featureset::DEFAULT_MIN_PARTICIPANTS;
use crate::ingestion::POPULAR_FOLLOWER_THRESHOLD;
use crate::learners::{Hyperparameters, ModelFamily, ModelSpec};
use crate::psychometrics::{Scheme, Trait};
use crate::selection::SelectionParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    /// `participant_id,q1..qN` answers.
    pub questionnaire: Option<PathBuf>,
    /// Scoring key JSON; the built-in key when absent.
    pub scoring_key: Option<PathBuf>,
    /// One export directory per participant.
    pub snapshots: Option<PathBuf>,
    pub demographics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogParams {
    pub min_followers: u64,
    pub min_participants: usize,
}

impl Default for CatalogParams {
    fn default() -> Self {
        Self {
            min_followers: POPULAR_FOLLOWER_THRESHOLD,
            min_participants: DEFAULT_MIN_PARTICIPANTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub train_ratio: f64,
    /// Stratify on the two-level label of each trait.
    pub stratified: bool,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            train_ratio: crate::evaluation::DEFAULT_TRAIN_RATIO,
            stratified: false,
        }
    }
}

fn all_traits() -> Vec<Trait> {
    Trait::ALL.to_vec()
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn all_families() -> Vec<ModelFamily> {
    ModelFamily::ALL.to_vec()
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub inputs: InputPaths,
    /// Generate the cohort instead of reading `inputs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticCohortSpec>,
    #[serde(default = "all_traits")]
    pub traits: Vec<Trait>,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "all_families")]
    pub families: Vec<ModelFamily>,
    #[serde(default)]
    pub selection: SelectionParams,
    #[serde(default)]
    pub catalog: CatalogParams,
    #[serde(default)]
    pub split: SplitParams,
    /// Greedy refinement of each selected subset with a GLM on an inner
    /// split of the training partition.
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub hyper: Hyperparameters,
    #[serde(default = "one")]
    pub norms_version: u32,
}

impl PipelineConfig {
    /// Config for a generated cohort with every other setting at its default.
    pub fn synthetic(base_seed: u64, spec: SyntheticCohortSpec) -> Self {
        Self {
            base_seed,
            output_dir: None,
            inputs: InputPaths::default(),
            synthetic: Some(spec),
            traits: all_traits(),
            schemes: all_schemes(),
            families: all_families(),
            selection: SelectionParams::default(),
            catalog: CatalogParams::default(),
            split: SplitParams::default(),
            refine: false,
            hyper: Hyperparameters::default(),
            norms_version: 1,
        }
    }

    /// Parses a config document, or the `config` block of a run manifest.
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(format!("config: {e}")))?;
        let value = match value.get("config") {
            Some(inner) if value.get("jobs").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| PipelineError::Config(format!("config: {e}")))
    }

    /// Reads a config file; relative paths resolve against its directory,
    /// made absolute.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let parent = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let base = fs::canonicalize(parent).map_err(|e| PipelineError::io(parent, e))?;
        config.resolve_paths(&base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.inputs.questionnaire);
        fix(&mut self.inputs.scoring_key);
        fix(&mut self.inputs.snapshots);
        fix(&mut self.inputs.demographics);
        fix(&mut self.output_dir);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(m));
        match (&self.inputs.questionnaire, &self.synthetic) {
            (Some(_), Some(_)) => return err("give either a questionnaire or a synthetic spec, not both".into()),
            (None, None) => return err("no questionnaire path and no synthetic spec".into()),
            (None, Some(spec)) => {
                spec.validate()?;
                let i = &self.inputs;
                if i.snapshots.is_some() || i.demographics.is_some() || i.scoring_key.is_some() {
                    return err("synthetic runs take no input paths".into());
                }
            }
            (Some(_), None) => {}
        }
        let i = &self.inputs;
        for (what, p) in [
            ("questionnaire", &i.questionnaire),
            ("scoring key", &i.scoring_key),
            ("demographics", &i.demographics),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return err(format!("{what} file {} does not exist", p.display()));
                }
            }
        }
        if let Some(p) = &i.snapshots {
            if !p.is_dir() {
                return err(format!("snapshot directory {} does not exist", p.display()));
            }
        }
        check_unique("traits", &self.traits)?;
        check_unique("schemes", &self.schemes)?;
        check_unique("families", &self.families)?;
        let s = &self.selection;
        if !(s.p_max > 0.0 && s.p_max <= 1.0) || !(0.0..=1.0).contains(&s.r_min) {
            return err(format!("selection thresholds r_min {} / p_max {} out of range", s.r_min, s.p_max));
        }
        if self.catalog.min_participants == 0 {
            return err("catalog min_participants must be positive".into());
        }
        let r = self.split.train_ratio;
        if !(r > 0.0 && r < 1.0) {
            return err(format!("train ratio {r} outside (0, 1)"));
        }
        for &family in &self.families {
            for &scheme in &self.schemes {
                if family.supports(scheme) {
                    let spec = ModelSpec {
                        family,
                        scheme,
                        seed: 0,
                        hyper: self.hyper.clone(),
                    };
                    spec.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
                }
            }
        }
        Ok(())
    }
}

fn check_unique<T: Ord + std::fmt::Debug>(what: &str, items: &[T]) -> Result<(), PipelineError> {
    if items.is_empty() {
        return Err(PipelineError::Config(format!("no {what} requested")));
    }
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item) {
            return Err(PipelineError::Config(format!("{what}: {item:?} listed twice")));
        }
    }
    Ok(())
}
