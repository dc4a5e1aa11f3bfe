use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{argmax, DecisionTree, TreeSettings};
use super::{Dense, ForestConfig, ForestParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_classes: usize,
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub trees: usize,
    pub max_depth: usize,
    pub accuracy: f64,
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn default_max_features(d: usize) -> usize {
    ((d as f64).sqrt().ceil() as usize).max(1)
}

/// Tree `t` depends only on `(seed, t)`, so a forest of `n` trees is the
/// prefix of any larger forest grown with the same seed and depth.
fn grow(
    x: &Dense,
    y: &[usize],
    k: usize,
    rows: &[usize],
    n_trees: usize,
    settings: TreeSettings,
    seed: u64,
) -> Vec<DecisionTree> {
    (0..n_trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, t as u64 + 1));
            let boot: Vec<usize> = (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect();
            DecisionTree::fit(x, y, k, boot, settings, Some(&mut rng))
        })
        .collect()
}

impl RandomForest {
    pub fn fit(x: &Dense, y: &[usize], k: usize, config: ForestConfig, params: &ForestParams, seed: u64) -> Self {
        let settings = TreeSettings {
            max_depth: config.max_depth,
            min_leaf: params.min_leaf,
            max_features: Some(params.max_features.unwrap_or_else(|| default_max_features(x.cols))),
        };
        let rows: Vec<usize> = (0..x.rows).collect();
        RandomForest {
            n_classes: k,
            config,
            trees: grow(x, y, k, &rows, config.trees, settings, seed),
        }
    }

    /// Fraction of trees voting for each class.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.predict_class(x)] += 1.0;
        }
        let n = self.trees.len().max(1) as f64;
        votes.into_iter().map(|v| v / n).collect()
    }
}

/// Seeded k-fold CV over the grid, then a refit on all rows with the best
/// entry (first entry wins ties).
pub fn fit_with_cv(x: &Dense, y: &[usize], k: usize, params: &ForestParams, seed: u64) -> (RandomForest, Vec<CvEntry>) {
    let n = x.rows;
    let folds = params.folds.min(n).max(2);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, 0)));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            f[row] = pos % folds;
        }
        f
    };
    let mtry = params.max_features.unwrap_or_else(|| default_max_features(x.cols));

    let mut depths: Vec<usize> = params.grid.iter().map(|c| c.max_depth).collect();
    depths.sort_unstable();
    depths.dedup();
    // accuracy[(depth, trees)] averaged over folds
    let mut acc = std::collections::BTreeMap::<(usize, usize), f64>::new();
    for &depth in &depths {
        let sizes: Vec<usize> = params
            .grid
            .iter()
            .filter(|c| c.max_depth == depth)
            .map(|c| c.trees)
            .collect();
        let max_trees = *sizes.iter().max().expect("non-empty");
        let settings = TreeSettings {
            max_depth: depth,
            min_leaf: params.min_leaf,
            max_features: Some(mtry),
        };
        for fold in 0..folds {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
            let valid: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
            if valid.is_empty() || train.is_empty() {
                continue;
            }
            let trees = grow(x, y, k, &train, max_trees, settings, mix(seed, fold as u64 + 1));
            let mut votes = vec![vec![0.0; k]; valid.len()];
            for (t, tree) in trees.iter().enumerate() {
                for (v, &row) in valid.iter().enumerate() {
                    votes[v][tree.predict_class(x.row(row))] += 1.0;
                }
                if sizes.contains(&(t + 1)) {
                    let hits = valid
                        .iter()
                        .enumerate()
                        .filter(|(v, &row)| argmax(&votes[*v]) == y[row])
                        .count();
                    *acc.entry((depth, t + 1)).or_default() += hits as f64 / valid.len() as f64 / folds as f64;
                }
            }
        }
    }
    let table: Vec<CvEntry> = params
        .grid
        .iter()
        .map(|c| CvEntry {
            trees: c.trees,
            max_depth: c.max_depth,
            accuracy: acc.get(&(c.max_depth, c.trees)).copied().unwrap_or(0.0),
        })
        .collect();
    let mut best = 0;
    for (i, e) in table.iter().enumerate() {
        if e.accuracy > table[best].accuracy + 1e-12 {
            best = i;
        }
    }
    let forest = RandomForest::fit(x, y, k, params.grid[best], params, seed);
    (forest, table)
}
