use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SelectedFeatureSet, SelectionError};
use crate::featureset::FeatureMatrix;
use crate::psychometrics::Level;

/// Fits on the first matrix/labels and predicts the rows of the second.
pub trait SubsetTrainer {
    fn fit_predict(
        &self,
        train: &FeatureMatrix,
        labels: &[Level],
        valid: &FeatureMatrix,
    ) -> Result<Vec<Level>, String>;
}

impl<F> SubsetTrainer for F
where
    F: Fn(&FeatureMatrix, &[Level], &FeatureMatrix) -> Result<Vec<Level>, String>,
{
    fn fit_predict(
        &self,
        train: &FeatureMatrix,
        labels: &[Level],
        valid: &FeatureMatrix,
    ) -> Result<Vec<Level>, String> {
        self(train, labels, valid)
    }
}

pub const REFINE_TRAIN_FRACTION: f64 = 0.8;

struct Split {
    train: Vec<usize>,
    valid: Vec<usize>,
}

/// Greedy backward elimination from the weakest candidate up, then a forward
/// pass re-adding dropped candidates in `|r|` order. A removal is accepted
/// when validation accuracy does not drop; an addition only when it rises.
pub fn refine_features<T: SubsetTrainer + ?Sized>(
    matrix: &FeatureMatrix,
    labels: &[Option<Level>],
    initial: &SelectedFeatureSet,
    trainer: &T,
    seed: u64,
) -> Result<SelectedFeatureSet, SelectionError> {
    if initial.features.is_empty() {
        return Err(SelectionError::EmptyCandidates);
    }
    if labels.len() != matrix.n_rows() {
        return Err(SelectionError::LengthMismatch(matrix.n_rows(), labels.len()));
    }
    let labelled: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    if labelled.len() < 5 {
        return Err(SelectionError::InsufficientData(labelled.len()));
    }
    let split = seeded_split(&labelled, seed);
    let mut notes = initial.notes.clone();
    let mut out = initial.clone();
    if initial.features.len() == 1 {
        return Ok(out);
    }

    let score = |keep: &[bool], notes: &mut Vec<String>| -> Option<f64> {
        let names: Vec<&str> = initial
            .features
            .iter()
            .zip(keep)
            .filter(|(_, k)| **k)
            .map(|(f, _)| f.name.as_str())
            .collect();
        let sub = project(matrix, &names)?;
        let train = sub.select_rows(&split.train);
        let valid = sub.select_rows(&split.valid);
        let y: Vec<Level> = split.train.iter().map(|&i| labels[i].unwrap()).collect();
        match trainer.fit_predict(&train, &y, &valid) {
            Ok(pred) if pred.len() == split.valid.len() => {
                let hits = pred
                    .iter()
                    .zip(&split.valid)
                    .filter(|(p, &i)| Some(**p) == labels[i])
                    .count();
                Some(hits as f64 / split.valid.len() as f64)
            }
            Ok(pred) => {
                notes.push(format!(
                    "refinement skipped subset {names:?}: {} predictions for {} rows",
                    pred.len(),
                    split.valid.len()
                ));
                None
            }
            Err(e) => {
                notes.push(format!("refinement skipped subset {names:?}: {e}"));
                None
            }
        }
    };

    let d = initial.features.len();
    let mut keep = vec![true; d];
    let mut best = score(&keep, &mut notes).unwrap_or(f64::NEG_INFINITY);

    for j in (0..d).rev() {
        if keep.iter().filter(|k| **k).count() == 1 {
            break;
        }
        keep[j] = false;
        match score(&keep, &mut notes) {
            Some(s) if s >= best => best = s,
            _ => keep[j] = true,
        }
    }
    for j in 0..d {
        if keep[j] {
            continue;
        }
        keep[j] = true;
        match score(&keep, &mut notes) {
            Some(s) if s > best => best = s,
            _ => keep[j] = false,
        }
    }

    out.features = initial
        .features
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(f, _)| f.clone())
        .collect();
    if best.is_finite() {
        notes.push(format!("refined validation accuracy {best:.4}"));
    }
    out.notes = notes;
    Ok(out)
}

fn seeded_split(rows: &[usize], seed: u64) -> Split {
    let mut shuffled = rows.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((rows.len() as f64 * REFINE_TRAIN_FRACTION).floor() as usize).clamp(1, rows.len() - 1);
    let valid = shuffled.split_off(n_train);
    Split { train: shuffled, valid }
}

fn project(matrix: &FeatureMatrix, names: &[&str]) -> Option<FeatureMatrix> {
    let idx: Vec<usize> = names
        .iter()
        .map(|n| matrix.catalog.index_of(n))
        .collect::<Option<_>>()?;
    matrix.select_columns(&idx).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featureset::{FeatureCatalog, FeatureCategory, FeatureColumn};
    use crate::psychometrics::{Scheme, Trait};
    use crate::selection::{select_features, SelectionParams};
    use rand::Rng;

    fn matrix(cols: &[(&str, Vec<f64>)]) -> FeatureMatrix {
        let n = cols[0].1.len();
        let catalog = FeatureCatalog {
            version: 1,
            columns: cols
                .iter()
                .map(|(name, _)| FeatureColumn {
                    name: name.to_string(),
                    category: FeatureCategory::PostProfile,
                })
                .collect(),
            popular_accounts: None,
        };
        let values = (0..n).flat_map(|r| cols.iter().map(move |(_, c)| Some(c[r]))).collect();
        FeatureMatrix::new((0..n).map(|i| format!("p{i}")).collect(), catalog, values).unwrap()
    }

    /// Nearest class centroid on unscaled features.
    fn centroid(train: &FeatureMatrix, y: &[Level], valid: &FeatureMatrix) -> Result<Vec<Level>, String> {
        let classes = [Level::Low, Level::High];
        let d = train.n_cols();
        let mut cents = vec![vec![0.0; d]; 2];
        let mut counts = [0usize; 2];
        for (r, l) in y.iter().enumerate() {
            let c = usize::from(*l == Level::High);
            counts[c] += 1;
            for j in 0..d {
                cents[c][j] += train.get(r, j).unwrap_or(0.0);
            }
        }
        if counts.contains(&0) {
            return Err("one class in training split".into());
        }
        for c in 0..2 {
            cents[c].iter_mut().for_each(|v| *v /= counts[c] as f64);
        }
        Ok((0..valid.n_rows())
            .map(|r| {
                let dist = |c: usize| {
                    (0..d)
                        .map(|j| (valid.get(r, j).unwrap_or(0.0) - cents[c][j]).powi(2))
                        .sum::<f64>()
                };
                classes[usize::from(dist(1) < dist(0))]
            })
            .collect())
    }

    fn planted(seed: u64, n: usize) -> (Vec<Option<Level>>, Vec<(String, Vec<f64>)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<Level> = (0..n).map(|_| if rng.gen_bool(0.5) { Level::High } else { Level::Low }).collect();
        let signal = |rng: &mut ChaCha8Rng, l: Level| if l == Level::High { 1.0 } else { 0.0 } + rng.gen::<f64>() * 2.0;
        let mut cols = Vec::new();
        for k in 0..3 {
            cols.push((format!("signal{k}"), labels.iter().map(|l| signal(&mut rng, *l)).collect()));
        }
        for k in 0..4 {
            cols.push((format!("weak{k}"), labels.iter().map(|l| {
                let shift = if *l == Level::High { 0.15 } else { 0.0 };
                shift + rng.gen::<f64>() * 3.0
            }).collect()));
        }
        (labels.into_iter().map(Some).collect(), cols)
    }

    fn as_refs(cols: &[(String, Vec<f64>)]) -> Vec<(&str, Vec<f64>)> {
        cols.iter().map(|(n, c)| (n.as_str(), c.clone())).collect()
    }

    #[test]
    fn duplicate_feature_is_dropped() {
        let (labels, mut cols) = planted(3, 200);
        cols.truncate(2);
        let dup = cols[0].1.clone();
        cols.push(("signal0_copy".to_string(), dup));
        let m = matrix(&as_refs(&cols));
        let sel = select_features(&m, &labels, Trait::PlanningAndOrganizing, Scheme::Two, SelectionParams::default()).unwrap();
        assert_eq!(sel.features.len(), 3);
        let refined = refine_features(&m, &labels, &sel, &centroid, 11).unwrap();
        let names = refined.names();
        assert!(
            !(names.contains(&"signal0".to_string()) && names.contains(&"signal0_copy".to_string())),
            "{names:?}"
        );
    }

    #[test]
    fn single_candidate_is_returned() {
        let (labels, cols) = planted(5, 100);
        let m = matrix(&as_refs(&cols[..1]));
        let sel = select_features(&m, &labels, Trait::PlanningAndOrganizing, Scheme::Two, SelectionParams::default()).unwrap();
        let refined = refine_features(&m, &labels, &sel, &centroid, 1).unwrap();
        assert_eq!(refined.names(), vec!["signal0".to_string()]);
    }

    #[test]
    fn empty_candidates_rejected() {
        let (labels, cols) = planted(5, 100);
        let m = matrix(&as_refs(&cols));
        let mut sel = select_features(&m, &labels, Trait::PlanningAndOrganizing, Scheme::Two, SelectionParams::default()).unwrap();
        sel.features.clear();
        assert!(matches!(
            refine_features(&m, &labels, &sel, &centroid, 1),
            Err(SelectionError::EmptyCandidates)
        ));
    }

    #[test]
    fn failing_trainer_is_noted_and_set_kept() {
        let (labels, cols) = planted(8, 100);
        let m = matrix(&as_refs(&cols));
        let sel = select_features(&m, &labels, Trait::PlanningAndOrganizing, Scheme::Two, SelectionParams::default()).unwrap();
        let broken = |_: &FeatureMatrix, _: &[Level], _: &FeatureMatrix| -> Result<Vec<Level>, String> {
            Err("boom".into())
        };
        let refined = refine_features(&m, &labels, &sel, &broken, 1).unwrap();
        assert_eq!(refined.names(), sel.names());
        assert!(refined.notes.iter().any(|n| n.contains("boom")));
    }

    #[test]
    fn deterministic_and_keeps_planted_signal() {
        let mut recalled = 0;
        for seed in 0..10 {
            let (labels, cols) = planted(100 + seed, 500);
            let m = matrix(&as_refs(&cols));
            let sel = select_features(&m, &labels, Trait::PlanningAndOrganizing, Scheme::Two, SelectionParams::default()).unwrap();
            let a = refine_features(&m, &labels, &sel, &centroid, seed).unwrap();
            let b = refine_features(&m, &labels, &sel, &centroid, seed).unwrap();
            assert_eq!(a, b);
            recalled += (0..3).filter(|k| a.names().contains(&format!("signal{k}"))).count();
        }
        assert!(recalled as f64 / 30.0 >= 0.8, "recall {}", recalled as f64 / 30.0);
    }
}
