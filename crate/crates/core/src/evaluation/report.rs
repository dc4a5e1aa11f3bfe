use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{metrics_multiclass, metrics_two_level, roc_auc, ConfusionMatrix, EvaluationError, MetricFlag};
use crate::learners::{ModelFamily, Prediction};
use crate::psychometrics::{Level, Scheme, Trait};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeMetrics {
    Two {
        accuracy: f64,
        auc: Option<f64>,
        precision: f64,
        recall: f64,
        f1: f64,
        flags: Vec<MetricFlag>,
    },
    Three {
        accuracy: f64,
        weighted_f1: f64,
        per_class_f1: Vec<f64>,
        class_sizes: Vec<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub family: ModelFamily,
    pub scheme: Scheme,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: SchemeMetrics,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl EvaluationRecord {
    pub fn metric(&self, metric: ReportMetric) -> Option<f64> {
        match (&self.metrics, metric) {
            (SchemeMetrics::Two { accuracy, .. }, ReportMetric::Accuracy) => Some(*accuracy),
            (SchemeMetrics::Two { auc, .. }, ReportMetric::Auc) => *auc,
            (SchemeMetrics::Two { precision, .. }, ReportMetric::Precision) => Some(*precision),
            (SchemeMetrics::Three { accuracy, .. }, ReportMetric::Accuracy) => Some(*accuracy),
            (SchemeMetrics::Three { weighted_f1, .. }, ReportMetric::WeightedF1) => Some(*weighted_f1),
            _ => None,
        }
    }
}

/// Scores held-out predictions; for two levels High is the positive class
/// and its score feeds the AUC.
pub fn evaluate_predictions(
    trait_id: Trait,
    family: ModelFamily,
    scheme: Scheme,
    actual: &[Level],
    predictions: &[Prediction],
    split_seed: u64,
    n_train: usize,
) -> Result<EvaluationRecord, EvaluationError> {
    let predicted: Vec<Level> = predictions.iter().map(|p| p.level).collect();
    let confusion = ConfusionMatrix::from_labels(actual, &predicted, scheme)?;
    let mut notes = Vec::new();
    let metrics = match scheme {
        Scheme::Two => {
            let m = metrics_two_level(&confusion)?;
            let scores: Vec<f64> = predictions.iter().map(|p| p.scores[1]).collect();
            let positive: Vec<bool> = actual.iter().map(|l| *l == Level::High).collect();
            let auc = match roc_auc(&scores, &positive) {
                Ok(a) => Some(a),
                Err(e) => {
                    notes.push(format!("AUC not reported: {e}"));
                    None
                }
            };
            SchemeMetrics::Two {
                accuracy: m.accuracy,
                auc,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                flags: m.flags,
            }
        }
        Scheme::Three => {
            let m = metrics_multiclass(&confusion)?;
            SchemeMetrics::Three {
                accuracy: m.accuracy,
                weighted_f1: m.weighted_f1,
                per_class_f1: m.per_class_f1,
                class_sizes: m.class_sizes,
            }
        }
    };
    Ok(EvaluationRecord {
        trait_id,
        family,
        scheme,
        split_seed,
        n_train,
        n_test: actual.len(),
        confusion,
        metrics,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMetric {
    Accuracy,
    Auc,
    Precision,
    WeightedF1,
}

impl ReportMetric {
    pub fn for_scheme(scheme: Scheme) -> &'static [ReportMetric] {
        match scheme {
            Scheme::Two => &[ReportMetric::Accuracy, ReportMetric::Auc, ReportMetric::Precision],
            Scheme::Three => &[ReportMetric::Accuracy, ReportMetric::WeightedF1],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReportMetric::Accuracy => "Accuracy",
            ReportMetric::Auc => "AUC",
            ReportMetric::Precision => "Precision",
            ReportMetric::WeightedF1 => "Weighted F1 Score",
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            ReportMetric::Accuracy => "accuracy",
            ReportMetric::Auc => "auc",
            ReportMetric::Precision => "precision",
            ReportMetric::WeightedF1 => "weighted_f1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub metric: ReportMetric,
    /// One entry per table family.
    pub values: Vec<Option<f64>>,
    /// Best-in-row markers; ties are all marked.
    pub best: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub scheme: Scheme,
    pub families: Vec<ModelFamily>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub records: Vec<EvaluationRecord>,
    pub tables: Vec<ReportTable>,
    pub notes: Vec<String>,
}

pub fn best_flags(values: &[Option<f64>]) -> Vec<bool> {
    let best = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| *v == Some(best)).collect()
}

pub fn build_report(mut records: Vec<EvaluationRecord>) -> Result<EvaluationReport, EvaluationError> {
    if records.is_empty() {
        return Err(EvaluationError::EmptyReport);
    }
    records.sort_by_key(|r| (r.scheme, r.trait_id, r.family));
    for w in records.windows(2) {
        if (w[0].scheme, w[0].trait_id, w[0].family) == (w[1].scheme, w[1].trait_id, w[1].family) {
            return Err(EvaluationError::Config(format!(
                "duplicate evaluation for {} / {} / {}",
                w[0].trait_id, w[0].family, w[0].scheme
            )));
        }
    }
    let mut notes = Vec::new();
    let mut tables = Vec::new();
    for scheme in Scheme::ALL {
        let in_scheme: Vec<&EvaluationRecord> = records.iter().filter(|r| r.scheme == scheme).collect();
        if in_scheme.is_empty() {
            continue;
        }
        let mut families = Vec::new();
        for f in ModelFamily::ALL.iter().filter(|f| f.supports(scheme)) {
            if in_scheme.iter().any(|r| r.family == *f) {
                families.push(*f);
            } else {
                notes.push(format!("{scheme}-level table: no results for {}, column omitted", f.label()));
            }
        }
        let mut by_trait: BTreeMap<Trait, Vec<&EvaluationRecord>> = BTreeMap::new();
        for r in &in_scheme {
            by_trait.entry(r.trait_id).or_default().push(r);
        }
        let mut rows = Vec::new();
        for (trait_id, recs) in by_trait {
            for &metric in ReportMetric::for_scheme(scheme) {
                let values: Vec<Option<f64>> = families
                    .iter()
                    .map(|f| recs.iter().find(|r| r.family == *f).and_then(|r| r.metric(metric)))
                    .collect();
                rows.push(ReportRow {
                    trait_id,
                    metric,
                    best: best_flags(&values),
                    values,
                });
            }
        }
        tables.push(ReportTable { scheme, families, rows });
    }
    Ok(EvaluationReport { records, tables, notes })
}

impl EvaluationReport {
    pub fn table(&self, scheme: Scheme) -> Option<&ReportTable> {
        self.tables.iter().find(|t| t.scheme == scheme)
    }

    /// Mean of one metric over traits for a family, skipping gaps.
    pub fn mean_metric(&self, scheme: Scheme, family: ModelFamily, metric: ReportMetric) -> Option<f64> {
        let v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.scheme == scheme && r.family == family)
            .filter_map(|r| r.metric(metric))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Long-format CSV: `scheme,trait,metric,family,value,best`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scheme", "trait", "metric", "family", "value", "best"])?;
        for t in &self.tables {
            for row in &t.rows {
                for ((f, v), b) in t.families.iter().zip(&row.values).zip(&row.best) {
                    w.write_record([
                        t.scheme.id(),
                        row.trait_id.id(),
                        row.metric.id(),
                        f.label(),
                        &v.map(|x| x.to_string()).unwrap_or_default(),
                        if *b { "true" } else { "false" },
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text tables with a trailing column naming the best families.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            let title = match t.scheme {
                Scheme::Two => "Two-level classification",
                Scheme::Three => "Three-level classification",
            };
            let _ = writeln!(out, "{title}");
            let _ = write!(out, "{:<34}{:<19}", "Trait", "Performance");
            for f in &t.families {
                let _ = write!(out, "{:>8}", f.label());
            }
            let _ = writeln!(out, "  Best");
            let mut last = None;
            for row in &t.rows {
                let name = if last == Some(row.trait_id) { "" } else { row.trait_id.display_name() };
                last = Some(row.trait_id);
                let _ = write!(out, "{:<34}{:<19}", name, row.metric.label());
                for v in &row.values {
                    match v {
                        Some(x) => {
                            let _ = write!(out, "{x:>8.3}");
                        }
                        None => {
                            let _ = write!(out, "{:>8}", "-");
                        }
                    }
                }
                let winners: Vec<&str> = t
                    .families
                    .iter()
                    .zip(&row.best)
                    .filter(|(_, b)| **b)
                    .map(|(f, _)| f.label())
                    .collect();
                let _ = writeln!(out, "  {}", winners.join(","));
            }
            let _ = writeln!(out);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}
