use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Level, PsychometricsError, Scheme, Trait, TraitLabel, TraitProfile};

/// Sample mean and sample (n-1) standard deviation of one trait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Norm {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n < 2 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Some(Norm {
            mean,
            sd: (ss / (n - 1) as f64).sqrt(),
            n,
        })
    }

    pub fn upper_cutoff(&self) -> f64 {
        self.mean + self.sd
    }

    pub fn lower_cutoff(&self) -> f64 {
        self.mean - self.sd
    }
}

/// Cohort norms, frozen per `version`. Updating norms means producing a
/// new table with a higher version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub version: u32,
    pub entries: BTreeMap<Trait, Norm>,
}

impl NormTable {
    pub fn get(&self, t: Trait) -> Option<&Norm> {
        self.entries.get(&t)
    }

    pub fn from_json(text: &str) -> Result<Self, PsychometricsError> {
        let table: NormTable = serde_json::from_str(text)
            .map_err(|e| PsychometricsError::Schema(format!("norm table: {e}")))?;
        for (t, norm) in &table.entries {
            if !(norm.sd >= 0.0) || norm.n < 2 || !norm.mean.is_finite() {
                return Err(PsychometricsError::Validation(format!(
                    "norm for `{t}` violates sd >= 0, n >= 2"
                )));
            }
        }
        Ok(table)
    }
}

/// Per-trait norms over the complete scores in `profiles`.
pub fn compute_norms(
    profiles: &[TraitProfile],
    version: u32,
) -> Result<NormTable, PsychometricsError> {
    let mut entries = BTreeMap::new();
    for t in Trait::ALL {
        let values: Vec<f64> = profiles
            .iter()
            .filter(|p| p.is_complete(t))
            .filter_map(|p| p.score(t))
            .collect();
        let norm = Norm::from_values(&values).ok_or(PsychometricsError::InsufficientData {
            trait_id: t,
            n: values.len(),
        })?;
        entries.insert(t, norm);
    }
    Ok(NormTable { version, entries })
}

/// Maps a score to a level. Scores exactly on a cutoff fall into the less
/// extreme class.
pub fn bin_score(score: f64, norm: &Norm, scheme: Scheme) -> TraitLabel {
    let level = match scheme {
        Scheme::Two => {
            if score > norm.mean {
                Level::High
            } else {
                Level::Low
            }
        }
        Scheme::Three => {
            if score > norm.upper_cutoff() {
                Level::High
            } else if score < norm.lower_cutoff() {
                Level::Low
            } else {
                Level::Medium
            }
        }
    };
    TraitLabel::new(scheme, level).expect("level chosen from scheme")
}
