use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SelectionError;
use crate::featureset::FeatureMatrix;
use crate::psychometrics::Trait;

/// Product-moment correlation with the number of pairs it was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, SelectionError> {
    if x.len() != y.len() {
        return Err(SelectionError::LengthMismatch(x.len(), y.len()));
    }
    pearson_complete(x.iter().copied().zip(y.iter().copied()), x.len())
}

/// Pearson over pairwise-complete observations.
pub fn pearson_pairwise(
    x: &[Option<f64>],
    y: &[Option<f64>],
) -> Result<Correlation, SelectionError> {
    if x.len() != y.len() {
        return Err(SelectionError::LengthMismatch(x.len(), y.len()));
    }
    let pairs = || x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?)));
    let n = pairs().count();
    let r = pearson_complete(pairs(), n)?;
    Ok(Correlation { r, n })
}

fn pearson_complete(
    pairs: impl Iterator<Item = (f64, f64)> + Clone,
    n: usize,
) -> Result<f64, SelectionError> {
    if n < 3 {
        return Err(SelectionError::InsufficientData(n));
    }
    let nf = n as f64;
    let (sx, sy) = pairs.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / nf, sy / nf);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(SelectionError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `r` under the null of zero correlation, from the
/// Student-t statistic with `n - 2` degrees of freedom.
pub fn pearson_pvalue(r: f64, n: usize) -> f64 {
    assert!(n >= 3, "p-value needs at least 3 observations");
    let r2 = r * r;
    if r2 >= 1.0 {
        return 0.0;
    }
    if r == 0.0 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    // P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2) and df/(df+t^2) = 1 - r^2.
    statrs::function::beta::beta_reg(df / 2.0, 0.5, 1.0 - r2).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub feature: String,
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

/// Feature-by-trait correlations against numeric trait scores. Pairs with
/// undefined correlation are left out.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationReport {
    pub fn compute(matrix: &FeatureMatrix, targets: &[(Trait, Vec<Option<f64>>)]) -> Self {
        let columns: Vec<Vec<Option<f64>>> = (0..matrix.n_cols()).map(|j| matrix.column(j)).collect();
        let entries = targets
            .iter()
            .flat_map(|(t, scores)| {
                columns
                    .par_iter()
                    .enumerate()
                    .filter_map(|(j, col)| {
                        let c = pearson_pairwise(col, scores).ok()?;
                        Some(CorrelationEntry {
                            feature: matrix.catalog.columns[j].name.clone(),
                            trait_id: *t,
                            r: c.r,
                            p: pearson_pvalue(c.r, c.n),
                            n: c.n,
                        })
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        CorrelationReport { entries }
    }

    /// Entries with `p < alpha`, strongest first per trait.
    pub fn significant(&self, alpha: f64) -> Vec<&CorrelationEntry> {
        let mut out: Vec<&CorrelationEntry> = self.entries.iter().filter(|e| e.p < alpha).collect();
        out.sort_by(|a, b| {
            a.trait_id
                .cmp(&b.trait_id)
                .then(b.r.abs().total_cmp(&a.r.abs()))
                .then(a.feature.cmp(&b.feature))
        });
        out
    }

    /// CSV columns `feature,trait,r,p,n`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "trait", "r", "p", "n"])?;
        for e in &self.entries {
            w.write_record([
                e.feature.clone(),
                e.trait_id.id().to_string(),
                e.r.to_string(),
                e.p.to_string(),
                e.n.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
