use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seeds::{derive_seed, job_seed, split_seed};
use super::synth::{generate_synthetic_cohort, GroundTruth};
use super::{PipelineConfig, PipelineError};
use crate::evaluation::{evaluate_predictions, split_train_test, stratified_split, EvaluationRecord};
use crate::featureset::{read_demographics, Demographics, FeatureMatrix};
use crate::ingestion::{parse_snapshot_tree, ParseIssue, ProfileSnapshot};
use crate::learners::{train_model, ModelFamily, ModelSpec, TrainedModel};
use crate::psychometrics::{
    bin_score, read_responses, score_questionnaire, Level, NormTable, Scheme, ScoringKey, Trait, TraitProfile,
};
use crate::selection::{refine_features, select_features, SelectedFeatureSet};

/// Everything a run reads before the first stage.
#[derive(Debug, Clone)]
pub struct RunInputs {
    pub key: ScoringKey,
    /// Sorted by participant id.
    pub profiles: Vec<TraitProfile>,
    /// `None` when the run has no Instagram inputs.
    pub snapshots: Option<Vec<ProfileSnapshot>>,
    pub ingest_issues: Vec<ParseIssue>,
    pub demographics: BTreeMap<String, Demographics>,
    pub ground_truth: Option<GroundTruth>,
    pub warnings: Vec<String>,
}

pub fn load_run_inputs(config: &PipelineConfig) -> Result<RunInputs, PipelineError> {
    if let Some(spec) = &config.synthetic {
        let cohort = generate_synthetic_cohort(spec)?;
        let mut profiles = cohort.profiles;
        profiles.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
        return Ok(RunInputs {
            key: cohort.key,
            profiles,
            snapshots: Some(cohort.snapshots),
            ingest_issues: Vec::new(),
            demographics: cohort.demographics,
            ground_truth: Some(cohort.truth),
            warnings: Vec::new(),
        });
    }
    let (key, profiles) = load_profiles(config)?;
    let (snapshots, ingest_issues) = load_snapshots(config)?;
    let demographics = load_demographics(config)?;
    let mut warnings = Vec::new();
    if snapshots.is_none() {
        warnings.push("no Instagram inputs: the feature matrix holds demographic columns only".to_string());
        if demographics.is_empty() {
            warnings.push("no demographics either: every feature column is missing".to_string());
        }
    }
    Ok(RunInputs {
        key,
        profiles,
        snapshots,
        ingest_issues,
        demographics,
        ground_truth: None,
        warnings,
    })
}

/// Scoring key and scored questionnaires, sorted by participant id.
pub fn load_profiles(config: &PipelineConfig) -> Result<(ScoringKey, Vec<TraitProfile>), PipelineError> {
    if config.synthetic.is_some() {
        let inputs = load_run_inputs(config)?;
        return Ok((inputs.key, inputs.profiles));
    }
    let inputs = &config.inputs;
    let key = match &inputs.scoring_key {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
            ScoringKey::from_json(&text).map_err(|e| PipelineError::Config(e.to_string()))?
        }
        None => ScoringKey::default_key(),
    };
    let q = inputs
        .questionnaire
        .as_ref()
        .ok_or_else(|| PipelineError::Config("no questionnaire path".into()))?;
    let file = fs::File::open(q).map_err(|e| PipelineError::io(q, e))?;
    let rows = read_responses(file).map_err(|e| PipelineError::stage("score", None, e))?;
    let mut profiles = rows
        .iter()
        .map(|r| score_questionnaire(r, &key))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::stage("score", None, e))?;
    profiles.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    Ok((key, profiles))
}

/// Parsed exports and their parse issues; `None` without Instagram inputs.
pub fn load_snapshots(config: &PipelineConfig) -> Result<(Option<Vec<ProfileSnapshot>>, Vec<ParseIssue>), PipelineError> {
    if config.synthetic.is_some() {
        let inputs = load_run_inputs(config)?;
        return Ok((inputs.snapshots, inputs.ingest_issues));
    }
    match &config.inputs.snapshots {
        Some(dir) => {
            let parsed = parse_snapshot_tree(dir).map_err(|e| PipelineError::stage("ingest", None, e))?;
            let issues = parsed.iter().flat_map(|p| p.issues.iter().cloned()).collect();
            Ok((Some(parsed.into_iter().map(|p| p.snapshot).collect()), issues))
        }
        None => Ok((None, Vec::new())),
    }
}

pub fn load_demographics(config: &PipelineConfig) -> Result<BTreeMap<String, Demographics>, PipelineError> {
    if config.synthetic.is_some() {
        return Ok(load_run_inputs(config)?.demographics);
    }
    match &config.inputs.demographics {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| PipelineError::io(p, e))?;
            read_demographics(file).map_err(|e| PipelineError::stage("features", None, e))
        }
        None => Ok(BTreeMap::new()),
    }
}

/// Scores and levels per (trait, scheme), keyed by participant id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    pub entries: BTreeMap<(Trait, Scheme), BTreeMap<String, (f64, Level)>>,
}

impl LabelTable {
    /// Levels aligned with `ids`; participants without a complete score get
    /// `None`.
    pub fn labels_for(&self, ids: &[String], t: Trait, scheme: Scheme) -> Vec<Option<Level>> {
        let entry = self.entries.get(&(t, scheme));
        ids.iter()
            .map(|id| entry.and_then(|m| m.get(id)).map(|(_, l)| *l))
            .collect()
    }

    pub fn scores_for(&self, ids: &[String], t: Trait) -> Vec<Option<f64>> {
        let entry = self.entries.iter().find(|((tt, _), _)| *tt == t).map(|(_, m)| m);
        ids.iter()
            .map(|id| entry.and_then(|m| m.get(id)).map(|(s, _)| *s))
            .collect()
    }
}

/// Bins every complete score with the cohort norms.
pub fn label_table(profiles: &[TraitProfile], norms: &NormTable, traits: &[Trait], schemes: &[Scheme]) -> Result<LabelTable, PipelineError> {
    let mut table = LabelTable::default();
    for &t in traits {
        let norm = norms
            .get(t)
            .ok_or_else(|| PipelineError::stage("bin", Some(t), "no norm for trait"))?;
        for &s in schemes {
            let map = table.entries.entry((t, s)).or_default();
            for p in profiles.iter().filter(|p| p.is_complete(t)) {
                let score = p.score(t).expect("complete");
                map.insert(p.participant_id.clone(), (score, bin_score(score, norm, s).level()));
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    participant_id: String,
    #[serde(rename = "trait")]
    trait_id: Trait,
    scheme: Scheme,
    score: f64,
    level: Level,
}

/// Long format `participant_id,trait,scheme,score,level`.
pub fn write_label_csv<W: Write>(table: &LabelTable, writer: W) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| PipelineError::stage("bin", None, e);
    for ((t, s), rows) in &table.entries {
        for (id, (score, level)) in rows {
            w.serialize(LabelRow {
                participant_id: id.clone(),
                trait_id: *t,
                scheme: *s,
                score: *score,
                level: *level,
            })
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| PipelineError::stage("bin", None, e))
}

pub fn read_label_csv<R: Read>(reader: R) -> Result<LabelTable, PipelineError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut table = LabelTable::default();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row.map_err(|e| PipelineError::Config(format!("labels: {e}")))?;
        if row.scheme.class_index(row.level).is_none() {
            return Err(PipelineError::Config(format!(
                "labels: `{}` has level {} under the {} scheme",
                row.participant_id, row.level, row.scheme
            )));
        }
        let map = table.entries.entry((row.trait_id, row.scheme)).or_default();
        if map.insert(row.participant_id.clone(), (row.score, row.level)).is_some() {
            return Err(PipelineError::Config(format!(
                "labels: `{}` listed twice for {} / {}",
                row.participant_id, row.trait_id, row.scheme
            )));
        }
    }
    Ok(table)
}

/// Train/test rows (matrix row indices, ascending) of one trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitSplit {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits the rows that carry a label. The seed depends on the base seed
/// and the trait only.
pub fn split_rows(
    labels: &[Option<Level>],
    t: Trait,
    base_seed: u64,
    config: &PipelineConfig,
) -> Result<TraitSplit, PipelineError> {
    let seed = split_seed(base_seed, t);
    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    let ratio = config.split.train_ratio;
    let (mut train, mut test) = if config.split.stratified {
        let levels: Vec<Level> = rows.iter().map(|&i| labels[i].expect("filtered")).collect();
        let (tr, te) = stratified_split(&levels, ratio, seed).map_err(|e| PipelineError::stage("split", Some(t), e))?;
        (tr.into_iter().map(|k| rows[k]).collect(), te.into_iter().map(|k| rows[k]).collect())
    } else {
        split_train_test(&rows, ratio, seed).map_err(|e| PipelineError::stage("split", Some(t), e))?
    };
    train.sort_unstable();
    test.sort_unstable();
    Ok(TraitSplit {
        trait_id: t,
        seed,
        train,
        test,
    })
}

/// On-disk form of a [`TraitSplit`], naming participants instead of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitRecord {
    pub fn from_split(split: &TraitSplit, ids: &[String]) -> Self {
        let named = |rows: &[usize]| rows.iter().map(|&i| ids[i].clone()).collect();
        Self {
            trait_id: split.trait_id,
            seed: split.seed,
            train: named(&split.train),
            test: named(&split.test),
        }
    }

    /// Row indices of `matrix`, sorted; every participant must be present.
    pub fn to_split(&self, matrix: &FeatureMatrix) -> Result<TraitSplit, PipelineError> {
        let rows = |ids: &[String]| -> Result<Vec<usize>, PipelineError> {
            let mut rows = ids
                .iter()
                .map(|id| {
                    matrix.row_index(id).ok_or_else(|| {
                        PipelineError::stage("split", Some(self.trait_id), format!("participant `{id}` is not in the matrix"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.sort_unstable();
            Ok(rows)
        };
        Ok(TraitSplit {
            trait_id: self.trait_id,
            seed: self.seed,
            train: rows(&self.train)?,
            test: rows(&self.test)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedJob {
    pub trait_id: Trait,
    pub scheme: Scheme,
    pub selected: SelectedFeatureSet,
    /// In the order of the configured families; unsupported families are
    /// absent.
    pub models: Vec<TrainedModel>,
    pub records: Vec<EvaluationRecord>,
}

fn labels_at(labels: &[Option<Level>], rows: &[usize], stage: &'static str, t: Trait) -> Result<Vec<Level>, PipelineError> {
    rows.iter()
        .map(|&i| {
            labels
                .get(i)
                .copied()
                .flatten()
                .ok_or_else(|| PipelineError::stage(stage, Some(t), format!("unlabelled {stage} row")))
        })
        .collect()
}

fn check_rows(matrix: &FeatureMatrix, labels: &[Option<Level>], stage: &'static str, t: Trait) -> Result<(), PipelineError> {
    if labels.len() != matrix.n_rows() {
        return Err(PipelineError::stage(stage, Some(t), "labels do not match the matrix rows"));
    }
    Ok(())
}

/// Selects features on the training rows only, refining the set when the
/// configuration asks for it.
pub fn select_for_split(
    matrix: &FeatureMatrix,
    labels: &[Option<Level>],
    split: &TraitSplit,
    scheme: Scheme,
    config: &PipelineConfig,
) -> Result<SelectedFeatureSet, PipelineError> {
    let t = split.trait_id;
    check_rows(matrix, labels, "select", t)?;
    let train_labels = labels_at(labels, &split.train, "select", t)?;
    let train = matrix.select_rows(&split.train);
    let optional: Vec<Option<Level>> = train_labels.iter().copied().map(Some).collect();
    let mut selected = select_features(&train, &optional, t, scheme, config.selection)
        .map_err(|e| PipelineError::stage("select", Some(t), e))?;
    if config.refine && !selected.is_empty() {
        let seed = derive_seed(config.base_seed, &[t.id(), scheme.id(), "refine"]);
        let spec = ModelSpec {
            family: ModelFamily::Glm,
            scheme,
            seed,
            hyper: config.hyper.clone(),
        };
        let trainer = |tr: &FeatureMatrix, y: &[Level], va: &FeatureMatrix| -> Result<Vec<Level>, String> {
            let m = train_model(&spec, tr, y).map_err(|e| e.to_string())?;
            let preds = m.predict_matrix(va).map_err(|e| e.to_string())?;
            Ok(preds.into_iter().map(|p| p.level).collect())
        };
        selected = refine_features(&train, &optional, &selected, &trainer, seed)
            .map_err(|e| PipelineError::stage("select", Some(t), e))?;
    }
    Ok(selected)
}

/// Trains every configured family that supports `scheme` on the training
/// rows restricted to the selected columns.
pub fn train_for_split(
    matrix: &FeatureMatrix,
    labels: &[Option<Level>],
    split: &TraitSplit,
    selected: &SelectedFeatureSet,
    config: &PipelineConfig,
) -> Result<Vec<TrainedModel>, PipelineError> {
    let t = split.trait_id;
    let scheme = selected.scheme;
    check_rows(matrix, labels, "train", t)?;
    let train_labels = labels_at(labels, &split.train, "train", t)?;
    let train = matrix.select_rows(&split.train);
    let cols: Vec<usize> = selected
        .features
        .iter()
        .map(|f| {
            train
                .catalog
                .index_of(&f.name)
                .ok_or_else(|| PipelineError::stage("train", Some(t), format!("unknown feature `{}`", f.name)))
        })
        .collect::<Result<_, _>>()?;
    let x = train
        .select_columns(&cols)
        .map_err(|e| PipelineError::stage("train", Some(t), e))?;
    config
        .families
        .par_iter()
        .filter(|f| f.supports(scheme))
        .map(|&family| {
            let spec = ModelSpec {
                family,
                scheme,
                seed: job_seed(config.base_seed, t, scheme, family),
                hyper: config.hyper.clone(),
            };
            train_model(&spec, &x, &train_labels).map_err(|e| PipelineError::stage("train", Some(t), format!("{family}: {e}")))
        })
        .collect()
}

/// Scores each model on the test rows.
pub fn evaluate_on_split(
    matrix: &FeatureMatrix,
    labels: &[Option<Level>],
    split: &TraitSplit,
    scheme: Scheme,
    models: &[TrainedModel],
) -> Result<Vec<EvaluationRecord>, PipelineError> {
    let t = split.trait_id;
    check_rows(matrix, labels, "evaluate", t)?;
    let test_labels = labels_at(labels, &split.test, "evaluate", t)?;
    let test = matrix.select_rows(&split.test);
    models
        .iter()
        .map(|m| {
            let preds = m
                .predict_matrix(&test)
                .map_err(|e| PipelineError::stage("evaluate", Some(t), e))?;
            let mut record = evaluate_predictions(t, m.spec.family, scheme, &test_labels, &preds, split.seed, split.train.len())
                .map_err(|e| PipelineError::stage("evaluate", Some(t), e))?;
            if m.feature_names.is_empty() {
                record.notes.push("no feature passed selection; the model sees no columns".into());
            }
            Ok(record)
        })
        .collect()
}

/// Selects features on the training rows, trains every configured family on
/// them and evaluates on the test rows. Test labels are read only by the
/// evaluation step.
pub fn fit_trait_scheme(
    matrix: &FeatureMatrix,
    labels: &[Option<Level>],
    split: &TraitSplit,
    scheme: Scheme,
    config: &PipelineConfig,
) -> Result<FittedJob, PipelineError> {
    let selected = select_for_split(matrix, labels, split, scheme, config)?;
    let models = train_for_split(matrix, labels, split, &selected, config)?;
    let records = evaluate_on_split(matrix, labels, split, scheme, &models)?;
    Ok(FittedJob {
        trait_id: split.trait_id,
        scheme,
        selected,
        models,
        records,
    })
}
