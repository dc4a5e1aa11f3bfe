use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::{JobStatus, Manifest};
use super::PipelineError;
use crate::evaluation::{EvaluationRecord, ReportMetric};
use crate::featureset::{
    demographic_cells, instagram_cells, Demographics, FeatureCatalog, PopularAccountCatalog, FEATURE_CATALOG_VERSION,
};
use crate::ingestion::ProfileSnapshot;
use crate::learners::{ModelFamily, TrainedModel, MODEL_FORMAT_VERSION};
use crate::psychometrics::{Level, Scheme, Trait};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// Public profile: following indicators and post metrics available.
    Full,
    /// Private or uncrawled profile: at most the profile counts and
    /// demographics.
    LowCoverage,
    /// The run itself had no Instagram features.
    DemographicsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitScore {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub level: Level,
    /// Class scores in class-index order.
    pub scores: Vec<f64>,
    pub family: ModelFamily,
    pub model_file: String,
    pub model_seed: u64,
    pub model_sha256: String,
    /// Held-out accuracy that chose this family.
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub base_seed: u64,
    pub catalog_fingerprint: Option<String>,
    pub feature_catalog_version: u32,
    pub model_format_version: u32,
    pub norms_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub scheme: Scheme,
    pub coverage: Coverage,
    pub notes: Vec<String>,
    pub traits: Vec<TraitScore>,
    pub provenance: Provenance,
}

fn read(run_dir: &Path, rel: &str) -> Result<String, PipelineError> {
    let path = run_dir.join(rel);
    fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))
}

/// Scores one candidate with the models of a completed run. For every trait
/// the family with the best held-out accuracy is used; ties go to the
/// earlier family in table order.
pub fn score_candidate(
    run_dir: &Path,
    snapshot: Option<&ProfileSnapshot>,
    demographics: Option<&Demographics>,
    scheme: Scheme,
) -> Result<CandidateScore, PipelineError> {
    let manifest = Manifest::read(run_dir)?;
    if !manifest.complete {
        return Err(PipelineError::Incompatible(format!("run in {} is incomplete", run_dir.display())));
    }
    let catalog: FeatureCatalog = serde_json::from_str(&read(run_dir, "features.catalog.json")?)
        .map_err(|e| PipelineError::Incompatible(format!("feature catalog: {e}")))?;
    if catalog.version != FEATURE_CATALOG_VERSION {
        return Err(PipelineError::Incompatible(format!(
            "feature catalog version {} does not match this build ({FEATURE_CATALOG_VERSION})",
            catalog.version
        )));
    }
    let mut notes = Vec::new();
    let cells = match &catalog.popular_accounts {
        Some(stored) => {
            let popular = PopularAccountCatalog::from_json(&read(run_dir, "catalog.json")?)
                .map_err(|e| PipelineError::Incompatible(e.to_string()))?;
            if &popular != stored || manifest.catalog_fingerprint.as_deref() != Some(popular.fingerprint.as_str()) {
                return Err(PipelineError::Incompatible(
                    "popular-account catalog does not match the one the models were trained on".into(),
                ));
            }
            let mut cells = instagram_cells(snapshot, &popular);
            cells.extend(demographic_cells(demographics));
            cells
        }
        None => {
            if snapshot.is_some() {
                notes.push("the run has no Instagram features; the snapshot is ignored".into());
            }
            demographic_cells(demographics)
        }
    };
    if cells.len() != catalog.columns.len() {
        return Err(PipelineError::Incompatible(format!(
            "assembled {} cells for a {}-column catalog",
            cells.len(),
            catalog.columns.len()
        )));
    }
    let coverage = match (&catalog.popular_accounts, snapshot) {
        (None, _) => Coverage::DemographicsOnly,
        (Some(_), Some(s)) if !s.is_private => Coverage::Full,
        (Some(_), Some(_)) => {
            notes.push("private profile: scored from profile counts and demographics only".into());
            Coverage::LowCoverage
        }
        (Some(_), None) => {
            notes.push("no snapshot: scored from demographics only".into());
            Coverage::LowCoverage
        }
    };
    if demographics.is_none() {
        notes.push("no demographics: demographic columns imputed".into());
    }
    let row: Vec<(String, Option<f64>)> = catalog.columns.iter().map(|c| c.name.clone()).zip(cells).collect();
    let records: Vec<EvaluationRecord> = serde_json::from_str(&read(run_dir, "evaluations.json")?)
        .map_err(|e| PipelineError::Incompatible(format!("evaluations: {e}")))?;

    let mut traits = Vec::new();
    for &t in &manifest.config.traits {
        let accuracy = |f: ModelFamily| {
            records
                .iter()
                .find(|r| r.trait_id == t && r.scheme == scheme && r.family == f)
                .and_then(|r| r.metric(ReportMetric::Accuracy))
        };
        let mut best: Option<(ModelFamily, Option<f64>)> = None;
        for f in ModelFamily::ALL {
            let trained = manifest
                .trained()
                .any(|j| j.trait_id == t && j.scheme == scheme && j.family == f);
            if !trained {
                continue;
            }
            let acc = accuracy(f);
            let better = match best {
                None => true,
                Some((_, b)) => acc.unwrap_or(f64::NEG_INFINITY) > b.unwrap_or(f64::NEG_INFINITY),
            };
            if better {
                best = Some((f, acc));
            }
        }
        let Some((family, test_accuracy)) = best else {
            return Err(PipelineError::Incompatible(format!("no trained {scheme}-level model for `{t}`")));
        };
        let job = manifest
            .jobs
            .iter()
            .find(|j| j.trait_id == t && j.scheme == scheme && j.family == family && j.status == JobStatus::Trained)
            .expect("chosen from trained jobs");
        let rel = job.model_file.clone().expect("trained jobs name their file");
        let text = read(run_dir, &rel)?;
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        if manifest.outputs.get(&rel) != Some(&digest) {
            return Err(PipelineError::Incompatible(format!("{rel} changed since the run")));
        }
        let model = TrainedModel::from_json(&text).map_err(|e| PipelineError::Incompatible(e.to_string()))?;
        let input: Vec<(String, Option<f64>)> = model
            .feature_names
            .iter()
            .map(|name| {
                row.iter()
                    .find(|(n, _)| n == name)
                    .cloned()
                    .ok_or_else(|| PipelineError::Incompatible(format!("{rel} uses `{name}`, absent from the catalog")))
            })
            .collect::<Result<_, _>>()?;
        let prediction = model
            .predict(&input)
            .map_err(|e| PipelineError::stage("score", Some(t), e))?;
        traits.push(TraitScore {
            trait_id: t,
            level: prediction.level,
            scores: prediction.scores,
            family,
            model_file: rel,
            model_seed: model.spec.seed,
            model_sha256: digest,
            test_accuracy,
        });
    }
    Ok(CandidateScore {
        scheme,
        coverage,
        notes,
        traits,
        provenance: Provenance {
            base_seed: manifest.base_seed,
            catalog_fingerprint: manifest.catalog_fingerprint.clone(),
            feature_catalog_version: catalog.version,
            model_format_version: MODEL_FORMAT_VERSION,
            norms_version: manifest.norms_version,
        },
    })
}
