use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::seeds::job_seed;
use super::stages::{
    fit_trait_scheme, label_table, load_run_inputs, split_rows, write_label_csv, FittedJob, SplitRecord, TraitSplit,
};
use super::synth::GroundTruth;
use super::{PipelineConfig, PipelineError};
use crate::evaluation::{build_report, EvaluationRecord, EvaluationReport};
use crate::featureset::{assemble_matrix, build_popular_catalog, FeatureMatrix, PopularAccountCatalog};
use crate::learners::ModelFamily;
use crate::psychometrics::{compute_norms, PsychometricsError, Scheme, Trait};
use crate::selection::{CorrelationReport, SelectedFeatureSet};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pending,
    Trained,
    /// The family has no model for the scheme (LR with three levels).
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobEntry {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub scheme: Scheme,
    pub family: ModelFamily,
    pub seed: u64,
    pub status: JobStatus,
    #[serde(default)]
    pub model_file: Option<String>,
    #[serde(default)]
    pub n_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Everything needed to reproduce a run: the resolved config, every seed,
/// and a digest of every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub complete: bool,
    #[serde(default)]
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub config: PipelineConfig,
    pub base_seed: u64,
    pub norms_version: u32,
    pub catalog_fingerprint: Option<String>,
    pub n_participants: usize,
    pub n_features: usize,
    pub splits: BTreeMap<Trait, SplitEntry>,
    pub jobs: Vec<JobEntry>,
    /// Relative path to hex SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(run_dir: &Path) -> Result<Self, PipelineError> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("manifest: {e}")))
    }

    pub fn trained(&self) -> impl Iterator<Item = &JobEntry> {
        self.jobs.iter().filter(|j| j.status == JobStatus::Trained)
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub report: EvaluationReport,
    pub selected: Vec<SelectedFeatureSet>,
    pub ground_truth: Option<GroundTruth>,
}

pub fn model_path(t: Trait, scheme: Scheme, family: ModelFamily) -> String {
    format!("models/{}/{}/{}.json", t.id(), scheme.id(), family.id())
}

pub fn split_path(t: Trait) -> String {
    format!("splits/{}.json", t.id())
}

pub fn selected_path(t: Trait, scheme: Scheme) -> String {
    format!("selected/{}/{}.json", t.id(), scheme.id())
}

struct Outputs<'a> {
    dir: &'a Path,
    digests: BTreeMap<String, String>,
}

impl Outputs<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        self.digests.insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(value).expect("output serializes") + "\n";
        self.write(rel, text.as_bytes())
    }
}

/// Empties `dir` when it holds an earlier run; refuses any other non-empty
/// directory.
fn prepare_dir(dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
        if entries.next().is_some() {
            if !dir.join(MANIFEST_FILE).is_file() {
                return Err(PipelineError::Config(format!(
                    "output directory {} is not empty and holds no run manifest",
                    dir.display()
                )));
            }
            fs::remove_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))
}

fn planned_jobs(config: &PipelineConfig) -> Vec<JobEntry> {
    let mut jobs = Vec::new();
    for &t in &config.traits {
        for &scheme in &config.schemes {
            for &family in &config.families {
                jobs.push(JobEntry {
                    trait_id: t,
                    scheme,
                    family,
                    seed: job_seed(config.base_seed, t, scheme, family),
                    status: if family.supports(scheme) {
                        JobStatus::Pending
                    } else {
                        JobStatus::NotApplicable
                    },
                    model_file: None,
                    n_features: None,
                });
            }
        }
    }
    jobs
}

/// Runs score, norm, bin, ingest, catalog, matrix, select, train, evaluate
/// and report into `out_dir`. On failure the manifest is left with
/// `complete: false` and the error.
pub fn run_pipeline(config: &PipelineConfig, out_dir: &Path) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    prepare_dir(out_dir)?;
    let mut recorded = config.clone();
    recorded.output_dir = None;
    let mut manifest = Manifest {
        format_version: MANIFEST_VERSION,
        complete: false,
        error: None,
        warnings: Vec::new(),
        config: recorded,
        base_seed: config.base_seed,
        norms_version: config.norms_version,
        catalog_fingerprint: None,
        n_participants: 0,
        n_features: 0,
        splits: BTreeMap::new(),
        jobs: planned_jobs(config),
        outputs: BTreeMap::new(),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest.to_json()).map_err(|e| PipelineError::io(&manifest_path, e))?;
    let mut out = Outputs {
        dir: out_dir,
        digests: BTreeMap::new(),
    };
    let result = execute(config, &mut manifest, &mut out);
    manifest.outputs = out.digests;
    match result {
        Ok((report, selected, ground_truth)) => {
            manifest.complete = true;
            fs::write(&manifest_path, manifest.to_json()).map_err(|e| PipelineError::io(&manifest_path, e))?;
            Ok(RunSummary {
                out_dir: out_dir.to_path_buf(),
                manifest,
                report,
                selected,
                ground_truth,
            })
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            fs::write(&manifest_path, manifest.to_json()).map_err(|e| PipelineError::io(&manifest_path, e))?;
            Err(e)
        }
    }
}

type Executed = (EvaluationReport, Vec<SelectedFeatureSet>, Option<GroundTruth>);

fn execute(config: &PipelineConfig, manifest: &mut Manifest, out: &mut Outputs) -> Result<Executed, PipelineError> {
    let inputs = load_run_inputs(config)?;
    manifest.warnings.extend(inputs.warnings.iter().cloned());
    if let Some(truth) = &inputs.ground_truth {
        out.json("ground_truth.json", truth)?;
    }

    // score
    for p in &inputs.profiles {
        p.validate(&inputs.key).map_err(|e| PipelineError::stage("score", None, e))?;
    }
    manifest.n_participants = inputs.profiles.len();
    out.json("profiles.json", &inputs.profiles)?;

    // norm
    let norms = compute_norms(&inputs.profiles, config.norms_version).map_err(|e| match e {
        PsychometricsError::InsufficientData { trait_id, .. } => PipelineError::stage("norm", Some(trait_id), e),
        other => PipelineError::stage("norm", None, other),
    })?;
    out.json("norms.json", &norms)?;

    // bin
    let labels = label_table(&inputs.profiles, &norms, &config.traits, &config.schemes)?;
    let mut buf = Vec::new();
    write_label_csv(&labels, &mut buf)?;
    out.write("labels.csv", &buf)?;

    // ingest + catalog
    let popular = match &inputs.snapshots {
        Some(snaps) => {
            out.json("ingest_issues.json", &inputs.ingest_issues)?;
            let c = build_popular_catalog(snaps, config.catalog.min_followers, config.catalog.min_participants)
                .map_err(|e| PipelineError::stage("catalog", None, e))?;
            out.json("catalog.json", &c)?;
            manifest.catalog_fingerprint = Some(c.fingerprint.clone());
            c
        }
        None => PopularAccountCatalog::empty(),
    };

    // matrix
    let ids: Vec<String> = inputs.profiles.iter().map(|p| p.participant_id.clone()).collect();
    let matrix = assemble_matrix(&ids, inputs.snapshots.as_deref(), &popular, &inputs.demographics)
        .map_err(|e| PipelineError::stage("features", None, e))?;
    manifest.n_features = matrix.n_cols();
    write_matrix(&matrix, out)?;
    let targets: Vec<(Trait, Vec<Option<f64>>)> =
        config.traits.iter().map(|&t| (t, labels.scores_for(&ids, t))).collect();
    let mut buf = Vec::new();
    CorrelationReport::compute(&matrix, &targets)
        .write_csv(&mut buf)
        .map_err(|e| PipelineError::stage("select", None, e))?;
    out.write("correlations.csv", &buf)?;

    // split, select, train, evaluate
    let per_trait: Vec<Result<(TraitSplit, Vec<FittedJob>), PipelineError>> = config
        .traits
        .par_iter()
        .map(|&t| {
            let split = split_rows(&labels.labels_for(&ids, t, config.schemes[0]), t, config.base_seed, config)?;
            let jobs = config
                .schemes
                .iter()
                .map(|&s| fit_trait_scheme(&matrix, &labels.labels_for(&ids, t, s), &split, s, config))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((split, jobs))
        })
        .collect();
    let mut records: Vec<EvaluationRecord> = Vec::new();
    let mut selected = Vec::new();
    for result in per_trait {
        let (split, jobs) = result?;
        let t = split.trait_id;
        manifest.splits.insert(
            t,
            SplitEntry {
                seed: split.seed,
                n_train: split.train.len(),
                n_test: split.test.len(),
            },
        );
        out.json(&split_path(t), &SplitRecord::from_split(&split, &ids))?;
        for job in jobs {
            out.json(&selected_path(t, job.scheme), &job.selected)?;
            for model in &job.models {
                let rel = model_path(t, job.scheme, model.spec.family);
                out.write(&rel, (model.to_json() + "\n").as_bytes())?;
                if let Some(entry) = manifest
                    .jobs
                    .iter_mut()
                    .find(|j| j.trait_id == t && j.scheme == job.scheme && j.family == model.spec.family)
                {
                    entry.status = JobStatus::Trained;
                    entry.model_file = Some(rel);
                    entry.n_features = Some(model.feature_names.len());
                }
            }
            records.extend(job.records);
            selected.push(job.selected);
        }
    }

    // report
    out.json("evaluations.json", &records)?;
    let mut report = build_report(records).map_err(|e| PipelineError::stage("report", None, e))?;
    if config.synthetic.is_some() {
        report.notes.push(
            "figures come from a generated cohort with planted signal, not from the private questionnaire and Instagram data"
                .into(),
        );
    }
    let mut buf = Vec::new();
    report
        .write_csv(&mut buf)
        .map_err(|e| PipelineError::stage("report", None, e))?;
    out.write("report/report.csv", &buf)?;
    out.write("report/report.json", (report.to_json() + "\n").as_bytes())?;
    out.write("report/report.txt", report.render_text().as_bytes())?;
    Ok((report, selected, inputs.ground_truth))
}

fn write_matrix(matrix: &FeatureMatrix, out: &mut Outputs) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    matrix
        .write_csv(&mut buf)
        .map_err(|e| PipelineError::stage("features", None, e))?;
    out.write("features.csv", &buf)?;
    out.json("features.catalog.json", &matrix.catalog)
}
