use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dense;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: Vec<u32>,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_for(&self, x: &[f64]) -> &[u32] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_classes: usize,
    pub root: TreeNode,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeSettings {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; all when `None`.
    pub max_features: Option<usize>,
}

fn gini(counts: &[u32], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a, R> {
    x: &'a Dense,
    y: &'a [usize],
    k: usize,
    settings: TreeSettings,
    rng: Option<&'a mut R>,
}

impl<R: Rng> Builder<'_, R> {
    fn counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.k];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    fn features(&mut self) -> Vec<usize> {
        let d = self.x.cols;
        match (self.settings.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.counts(&rows);
        let n = rows.len() as u32;
        let parent = gini(&counts, n);
        let min_leaf = self.settings.min_leaf;
        if depth >= self.settings.max_depth || parent == 0.0 || rows.len() < 2 * min_leaf {
            return TreeNode::Leaf { counts };
        }
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for f in self.features() {
            pairs.clear();
            pairs.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0u32; self.k];
            for i in 0..pairs.len() - 1 {
                left[pairs[i].1] += 1;
                let nl = i + 1;
                let nr = pairs.len() - nl;
                if pairs[i].0 == pairs[i + 1].0 || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right: Vec<u32> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let score = (nl as f64 * gini(&left, nl as u32) + nr as f64 * gini(&right, nr as u32))
                    / pairs.len() as f64;
                if best.map_or(true, |(s, _, _)| score < s) {
                    let (a, b) = (pairs[i].0, pairs[i + 1].0);
                    let mut t = a + (b - a) / 2.0;
                    if t >= b {
                        t = a;
                    }
                    best = Some((score, f, t));
                }
            }
        }
        match best {
            Some((score, feature, threshold)) if score < parent - 1e-12 => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&row| self.x.get(row, feature) <= threshold);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(l, depth + 1)),
                    right: Box::new(self.build(r, depth + 1)),
                }
            }
            _ => TreeNode::Leaf { counts },
        }
    }
}

impl DecisionTree {
    /// Grows a Gini tree on `rows` (repeats allowed, as in a bootstrap
    /// sample). `rng` drives per-split feature sampling.
    pub fn fit<R: Rng>(
        x: &Dense,
        y: &[usize],
        n_classes: usize,
        rows: Vec<usize>,
        settings: TreeSettings,
        rng: Option<&mut R>,
    ) -> Self {
        let mut b = Builder {
            x,
            y,
            k: n_classes,
            settings,
            rng,
        };
        DecisionTree {
            n_classes,
            root: b.build(rows, 0),
        }
    }

    /// Class frequencies in the reached leaf.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let counts = self.root.leaf_for(x);
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return vec![1.0 / self.n_classes as f64; self.n_classes];
        }
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn predict_class(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

/// Index of the first maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
