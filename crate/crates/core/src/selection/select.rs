use serde::{Deserialize, Serialize};

use super::{pearson_pairwise, pearson_pvalue, SelectionError};
use crate::featureset::FeatureMatrix;
use crate::psychometrics::{Level, Scheme, Trait};

/// Which sign of correlation with the target indicator qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignRule {
    /// `|r| >= r_min`
    Absolute,
    /// `r >= r_min`
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionParams {
    pub r_min: f64,
    pub p_max: f64,
    pub sign: SignRule,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            r_min: 0.01,
            p_max: 0.05,
            sign: SignRule::Absolute,
        }
    }
}

impl SelectionParams {
    pub fn admits(&self, r: f64, p: f64) -> bool {
        let strength = match self.sign {
            SignRule::Absolute => r.abs(),
            SignRule::Positive => r,
        };
        strength >= self.r_min && p <= self.p_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub name: String,
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeatureSet {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub scheme: Scheme,
    pub target_class: Level,
    pub params: SelectionParams,
    pub features: Vec<SelectedFeature>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl SelectedFeatureSet {
    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Indicator of the most frequent class (ties go to the higher class).
/// Missing labels give missing indicator cells.
pub fn target_indicator(
    labels: &[Option<Level>],
    scheme: Scheme,
) -> Result<(Vec<Option<f64>>, Level), SelectionError> {
    let mut counts = vec![0usize; scheme.n_classes()];
    for level in labels.iter().flatten() {
        let idx = scheme
            .class_index(*level)
            .ok_or(SelectionError::IllegalLabel(*level, scheme))?;
        counts[idx] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(SelectionError::DegenerateTarget);
    }
    // max_by_key returns the last of equal maxima, i.e. the higher class.
    let best = (0..counts.len())
        .max_by_key(|&i| counts[i])
        .expect("at least two classes");
    let class = scheme.level(best).expect("index from scheme");
    let indicator = labels
        .iter()
        .map(|l| l.map(|l| if l == class { 1.0 } else { 0.0 }))
        .collect();
    Ok((indicator, class))
}

/// Correlates every column with the target-class indicator and keeps those
/// admitted by `params`, ordered by descending `|r|` then name.
pub fn select_features(
    matrix: &FeatureMatrix,
    labels: &[Option<Level>],
    trait_id: Trait,
    scheme: Scheme,
    params: SelectionParams,
) -> Result<SelectedFeatureSet, SelectionError> {
    if labels.len() != matrix.n_rows() {
        return Err(SelectionError::LengthMismatch(matrix.n_rows(), labels.len()));
    }
    let (target, class) = target_indicator(labels, scheme)?;
    let mut features = Vec::new();
    let mut notes = Vec::new();
    for (j, col) in matrix.catalog.columns.iter().enumerate() {
        match pearson_pairwise(&matrix.column(j), &target) {
            Ok(c) => {
                let p = pearson_pvalue(c.r, c.n);
                if params.admits(c.r, p) {
                    features.push(SelectedFeature {
                        name: col.name.clone(),
                        r: c.r,
                        p,
                        n: c.n,
                    });
                }
            }
            Err(e) => notes.push(format!("skipped `{}`: {e}", col.name)),
        }
    }
    features.sort_by(|a, b| b.r.abs().total_cmp(&a.r.abs()).then(a.name.cmp(&b.name)));
    Ok(SelectedFeatureSet {
        trait_id,
        scheme,
        target_class: class,
        params,
        features,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featureset::{FeatureCatalog, FeatureCategory, FeatureColumn};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    pub(crate) fn matrix_from_columns(cols: &[(&str, Vec<Option<f64>>)]) -> FeatureMatrix {
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
        let mut values = Vec::new();
        for r in 0..n {
            for (_, c) in cols {
                values.push(c[r]);
            }
        }
        FeatureMatrix::new((0..n).map(|i| format!("p{i:04}")).collect(), catalog, values).unwrap()
    }

    use Level::{High as H, Low as L, Medium as M};

    #[test]
    fn modal_class_indicator() {
        let (v, c) = target_indicator(&[Some(H), Some(H), Some(H), Some(L)], Scheme::Two).unwrap();
        assert_eq!(c, H);
        assert_eq!(v, vec![Some(1.0), Some(1.0), Some(1.0), Some(0.0)]);
    }

    #[test]
    fn medium_modal_in_three_level() {
        let labels = [Some(M), Some(M), Some(L), Some(H), Some(M)];
        assert_eq!(target_indicator(&labels, Scheme::Three).unwrap().1, M);
    }

    #[test]
    fn ties_go_to_higher_class() {
        assert_eq!(
            target_indicator(&[Some(L), Some(H), Some(H), Some(L)], Scheme::Two).unwrap().1,
            H
        );
        assert_eq!(
            target_indicator(&[Some(L), Some(M), Some(M), Some(L), Some(H)], Scheme::Three)
                .unwrap()
                .1,
            M
        );
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(
            target_indicator(&[Some(H), Some(H), None], Scheme::Two),
            Err(SelectionError::DegenerateTarget)
        ));
        assert!(target_indicator(&[Some(M), Some(H)], Scheme::Two).is_err());
    }

    #[test]
    fn planted_copy_of_indicator_comes_first_and_constant_is_noted() {
        let labels: Vec<Option<Level>> = (0..50).map(|i| Some(if i % 3 == 0 { L } else { H })).collect();
        let indicator: Vec<Option<f64>> = labels.iter().map(|l| Some(if *l == Some(H) { 1.0 } else { 0.0 })).collect();
        let noisy: Vec<Option<f64>> = indicator
            .iter()
            .enumerate()
            .map(|(i, v)| Some(v.unwrap() + if i % 4 == 0 { 0.9 } else { 0.0 }))
            .collect();
        let m = matrix_from_columns(&[
            ("constant", vec![Some(2.0); 50]),
            ("noisy", noisy),
            ("copy", indicator),
        ]);
        let sel = select_features(&m, &labels, Trait::Energy, Scheme::Two, SelectionParams::default()).unwrap();
        assert_eq!(sel.features[0].name, "copy");
        assert!((sel.features[0].r - 1.0).abs() < 1e-12);
        assert_eq!(sel.target_class, H);
        assert!(sel.notes.iter().any(|n| n.contains("constant")));
        assert!(!sel.names().contains(&"constant".to_string()));
    }

    #[test]
    fn noise_selection_rate_tracks_significance_level() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut two_sided_hits = 0usize;
        let mut selected = 0usize;
        let mut total = 0usize;
        for _ in 0..10 {
            let labels: Vec<Option<Level>> = (0..400).map(|_| Some(if rng.gen_bool(0.5) { H } else { L })).collect();
            let cols: Vec<(String, Vec<Option<f64>>)> = (0..100)
                .map(|j| (format!("noise{j:03}"), (0..400).map(|_| Some(rng.gen::<f64>())).collect()))
                .collect();
            let named: Vec<(&str, Vec<Option<f64>>)> = cols.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
            let m = matrix_from_columns(&named);
            let sel = select_features(&m, &labels, Trait::Energy, Scheme::Two, SelectionParams::default()).unwrap();
            selected += sel.features.len();
            let (target, _) = target_indicator(&labels, Scheme::Two).unwrap();
            for j in 0..m.n_cols() {
                let c = pearson_pairwise(&m.column(j), &target).unwrap();
                if pearson_pvalue(c.r, c.n) <= 0.05 {
                    two_sided_hits += 1;
                }
            }
            total += m.n_cols();
        }
        let rate = selected as f64 / total as f64;
        assert!((0.025..=0.08).contains(&rate), "selection rate {rate}");
        assert_eq!(selected, two_sided_hits);
    }

    proptest! {
        #[test]
        fn row_permutation_and_tightening(seed in 0u64..500, p_tight in 0.001f64..0.05) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 60;
            let labels: Vec<Option<Level>> = (0..n).map(|_| Some(if rng.gen_bool(0.5) { H } else { L })).collect();
            let cols: Vec<(String, Vec<Option<f64>>)> = (0..12).map(|j| {
                (format!("f{j}"), labels.iter().map(|l| {
                    let base = if *l == Some(H) { j as f64 * 0.05 } else { 0.0 };
                    if rng.gen_bool(0.05) { None } else { Some(base + rng.gen::<f64>()) }
                }).collect())
            }).collect();
            let named: Vec<(&str, Vec<Option<f64>>)> = cols.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
            let m = matrix_from_columns(&named);
            let params = SelectionParams::default();
            let base = select_features(&m, &labels, Trait::Energy, Scheme::Two, params).unwrap();

            let mut order: Vec<usize> = (0..n).collect();
            order.reverse();
            order.rotate_left((seed as usize) % n);
            let permuted = m.select_rows(&order);
            let permuted_labels: Vec<Option<Level>> = order.iter().map(|&i| labels[i]).collect();
            let again = select_features(&permuted, &permuted_labels, Trait::Energy, Scheme::Two, params).unwrap();
            prop_assert_eq!(base.names(), again.names());

            let tight = select_features(&m, &labels, Trait::Energy, Scheme::Two, SelectionParams { p_max: p_tight, ..params }).unwrap();
            for name in tight.names() {
                prop_assert!(base.names().contains(&name));
            }
        }
    }
}
