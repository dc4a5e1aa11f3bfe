use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::psychometrics::{Level, Scheme};

/// Counts indexed `[actual][predicted]` in class-index order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub scheme: Scheme,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(scheme: Scheme) -> Self {
        let k = scheme.n_classes();
        Self {
            scheme,
            counts: vec![vec![0; k]; k],
        }
    }

    /// Two-level matrix with High as the positive class.
    pub fn two_level(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self {
            scheme: Scheme::Two,
            counts: vec![vec![tn, fp], vec![fn_, tp]],
        }
    }

    pub fn from_labels(actual: &[Level], predicted: &[Level], scheme: Scheme) -> Result<Self, EvaluationError> {
        if actual.len() != predicted.len() {
            return Err(EvaluationError::LengthMismatch(actual.len(), predicted.len()));
        }
        let mut cm = Self::new(scheme);
        for (a, p) in actual.iter().zip(predicted) {
            let (Some(i), Some(j)) = (scheme.class_index(*a), scheme.class_index(*p)) else {
                return Err(EvaluationError::Config(format!("label outside the {scheme} scheme")));
            };
            cm.counts[i][j] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// One-vs-rest `(tp, fp, fn, tn)` for class `c`.
    pub fn one_vs_rest(&self, c: usize) -> (u64, u64, u64, u64) {
        let k = self.counts.len();
        let tp = self.counts[c][c];
        let fp: u64 = (0..k).filter(|&i| i != c).map(|i| self.counts[i][c]).sum();
        let fn_: u64 = (0..k).filter(|&j| j != c).map(|j| self.counts[c][j]).sum();
        (tp, fp, fn_, self.total() - tp - fp - fn_)
    }

    pub fn accuracy(&self) -> Result<f64, EvaluationError> {
        let n = self.total();
        if n == 0 {
            return Err(EvaluationError::EmptyConfusion);
        }
        Ok(self.trace() as f64 / n as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFlag {
    /// No predicted positives; precision reported as 0.
    PrecisionUndefined,
    /// No actual positives; recall reported as 0.
    RecallUndefined,
    /// Precision + recall is 0; F1 reported as 0.
    F1Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: Vec<MetricFlag>,
}

fn binary_from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Result<BinaryMetrics, EvaluationError> {
    let total = tp + fp + fn_ + tn;
    if total == 0 {
        return Err(EvaluationError::EmptyConfusion);
    }
    let mut flags = Vec::new();
    let accuracy = (tp + tn) as f64 / total as f64;
    let precision = if tp + fp == 0 {
        flags.push(MetricFlag::PrecisionUndefined);
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        flags.push(MetricFlag::RecallUndefined);
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        flags.push(MetricFlag::F1Undefined);
        0.0
    } else {
        (2.0 * precision * recall) / (precision + recall)
    };
    Ok(BinaryMetrics {
        accuracy,
        precision,
        recall,
        f1,
        flags,
    })
}

pub fn metrics_two_level(cm: &ConfusionMatrix) -> Result<BinaryMetrics, EvaluationError> {
    if cm.scheme != Scheme::Two {
        return Err(EvaluationError::Config("two-level metrics need a two-level matrix".into()));
    }
    let (tp, fp, fn_, tn) = cm.one_vs_rest(1);
    binary_from_counts(tp, fp, fn_, tn)
}

/// `sum(N_i * F1_i) / sum(N_i)`.
pub fn weighted_f1(per_class_f1: &[f64], class_sizes: &[u64]) -> Result<f64, EvaluationError> {
    if per_class_f1.len() != class_sizes.len() {
        return Err(EvaluationError::LengthMismatch(per_class_f1.len(), class_sizes.len()));
    }
    let total: u64 = class_sizes.iter().sum();
    if total == 0 {
        return Err(EvaluationError::Config("weighted F1 needs a non-empty class".into()));
    }
    let num: f64 = per_class_f1.iter().zip(class_sizes).map(|(f, &n)| f * n as f64).sum();
    Ok(num / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassMetrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// Actual class sizes `N_i`.
    pub class_sizes: Vec<u64>,
}

pub fn metrics_multiclass(cm: &ConfusionMatrix) -> Result<MulticlassMetrics, EvaluationError> {
    let accuracy = cm.accuracy()?;
    let k = cm.counts.len();
    let mut per_class_f1 = Vec::with_capacity(k);
    let mut class_sizes = Vec::with_capacity(k);
    for c in 0..k {
        let (tp, fp, fn_, tn) = cm.one_vs_rest(c);
        per_class_f1.push(binary_from_counts(tp, fp, fn_, tn)?.f1);
        class_sizes.push(tp + fn_);
    }
    Ok(MulticlassMetrics {
        accuracy,
        weighted_f1: weighted_f1(&per_class_f1, &class_sizes)?,
        per_class_f1,
        class_sizes,
    })
}

/// Mann-Whitney form of the ROC area using midranks; ties count one half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64, EvaluationError> {
    if scores.len() != positive.len() {
        return Err(EvaluationError::LengthMismatch(scores.len(), positive.len()));
    }
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvaluationError::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&r| positive[r]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formula_examples() {
        let m = metrics_two_level(&ConfusionMatrix::two_level(3, 2, 1, 4)).unwrap();
        assert_eq!(m.accuracy, 0.7);
        assert_eq!(m.precision, 0.6);
        assert_eq!(m.recall, 0.75);
        assert!(m.flags.is_empty());
        let same = metrics_two_level(&ConfusionMatrix::two_level(2, 2, 2, 0)).unwrap();
        assert_eq!(same.f1, 0.5);
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = metrics_two_level(&ConfusionMatrix::two_level(0, 0, 3, 5)).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.flags, vec![MetricFlag::PrecisionUndefined, MetricFlag::F1Undefined]);
        assert!(matches!(
            metrics_two_level(&ConfusionMatrix::two_level(0, 0, 0, 0)),
            Err(EvaluationError::EmptyConfusion)
        ));
    }

    #[test]
    fn weighted_f1_examples() {
        assert!((weighted_f1(&[0.8, 0.4], &[3, 1]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(weighted_f1(&[0.42], &[7]).unwrap(), 0.42);
        assert!((weighted_f1(&[0.2, 0.4, 0.9], &[5, 5, 5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(weighted_f1(&[0.5, 0.5], &[0, 0]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.9], &[false, false, true]).unwrap(), 1.0);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(EvaluationError::UndefinedAuc)));
    }

    #[test]
    fn multiclass_accuracy_is_trace_over_total() {
        let cm = ConfusionMatrix {
            scheme: Scheme::Three,
            counts: vec![vec![3, 1, 0], vec![2, 10, 1], vec![0, 2, 4]],
        };
        let m = metrics_multiclass(&cm).unwrap();
        assert_eq!(m.accuracy, 17.0 / 23.0);
        assert_eq!(m.class_sizes, vec![4, 13, 6]);
        let lo = m.per_class_f1.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = m.per_class_f1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= m.weighted_f1 && m.weighted_f1 <= hi);
    }

    proptest! {
        #[test]
        fn auc_complement_symmetry(scores in proptest::collection::vec(0u8..6, 2..40), seed in any::<u64>()) {
            let labels: Vec<bool> = (0..scores.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            if let (Ok(a), Ok(b)) = (roc_auc(&s, &labels), roc_auc(&s, &flipped)) {
                prop_assert!((a + b - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn weighted_f1_is_bounded(f in proptest::collection::vec(0.0f64..1.0, 1..6), n in proptest::collection::vec(1u64..50, 6)) {
            let sizes = &n[..f.len()];
            let w = weighted_f1(&f, sizes).unwrap();
            let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - 1e-12 <= w && w <= hi + 1e-12);
        }
    }
}
