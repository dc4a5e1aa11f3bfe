use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvaluationError;
use crate::psychometrics::Level;

pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;
pub const MIN_SPLIT_ROWS: usize = 5;

fn train_count(n: usize, ratio: f64) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

fn check(n: usize, ratio: f64) -> Result<(), EvaluationError> {
    if n < MIN_SPLIT_ROWS {
        return Err(EvaluationError::TooFewRows(n));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvaluationError::Config(format!("train ratio {ratio} outside (0, 1)")));
    }
    let k = train_count(n, ratio);
    if k == 0 || k == n {
        return Err(EvaluationError::Config(format!(
            "train ratio {ratio} leaves an empty partition for {n} rows"
        )));
    }
    Ok(())
}

/// Seeded shuffle, then the first `floor(ratio * n)` rows train.
pub fn split_train_test<T: Clone>(rows: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), EvaluationError> {
    check(rows.len(), ratio)?;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = train_count(rows.len(), ratio);
    let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..k]), pick(&order[k..])))
}

/// Per-class seeded split; every class contributes `floor(ratio * n_c)`
/// training rows, so the training share can fall slightly below
/// `floor(ratio * n)`. Returns row indices in ascending order.
pub fn stratified_split(labels: &[Level], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvaluationError> {
    check(labels.len(), ratio)?;
    let mut by_class: BTreeMap<Level, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(*l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for rows in by_class.values_mut() {
        rows.shuffle(&mut rng);
        let k = train_count(rows.len(), ratio);
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(EvaluationError::Config("stratified split left an empty partition".into()));
    }
    Ok((train, test))
}
