use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::featureset::{FeatureCategory, FeatureMatrix};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense shape");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dense {
        let data = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        Dense::new(rows.len(), self.cols, data)
    }
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl StandardizationParams {
    pub fn fit(x: &Dense) -> Self {
        let n = x.rows as f64;
        let mut means = vec![0.0; x.cols];
        let mut sds = vec![0.0; x.cols];
        let mut constant = vec![true; x.cols];
        for j in 0..x.cols {
            if x.rows == 0 {
                continue;
            }
            let mean = (0..x.rows).map(|r| x.get(r, j)).sum::<f64>() / n;
            let var = (0..x.rows).map(|r| (x.get(r, j) - mean).powi(2)).sum::<f64>() / n;
            means[j] = mean;
            let first = x.get(0, j);
            if (0..x.rows).any(|r| x.get(r, j) != first) && var > 0.0 {
                sds[j] = var.sqrt();
                constant[j] = false;
            }
        }
        Self { means, sds, constant }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if self.constant[j] {
                0.0
            } else {
                (*v - self.means[j]) / self.sds[j]
            };
        }
    }

    pub fn apply(&self, x: &Dense) -> Dense {
        let mut out = x.clone();
        for r in 0..out.rows {
            let cols = out.cols;
            self.apply_row(&mut out.data[r * cols..(r + 1) * cols]);
        }
        out
    }

    /// Inverse transform; constant columns come back as their mean.
    pub fn invert(&self, z: &Dense) -> Dense {
        let mut out = z.clone();
        for r in 0..out.rows {
            for j in 0..out.cols {
                let v = &mut out.data[r * z.cols + j];
                *v = if self.constant[j] {
                    self.means[j]
                } else {
                    *v * self.sds[j] + self.means[j]
                };
            }
        }
        out
    }
}

pub fn standardize_fit_apply(x: &Dense) -> (Dense, StandardizationParams) {
    let params = StandardizationParams::fit(x);
    (params.apply(x), params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnImputation {
    /// Missing cells take the training median.
    Median { value: f64 },
    /// Missing cells become 0; `flag` is set when a was-missing column
    /// was appended.
    Indicator { flag: bool },
}

/// Imputation and standardization fitted on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub input_names: Vec<String>,
    pub imputation: Vec<ColumnImputation>,
    pub output_names: Vec<String>,
    pub standardization: StandardizationParams,
}

pub fn missing_flag_name(name: &str) -> String {
    format!("{name}__missing")
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

impl Preprocessor {
    pub fn fit(matrix: &FeatureMatrix) -> Self {
        let mut imputation = Vec::with_capacity(matrix.n_cols());
        let mut flags = Vec::new();
        for (j, col) in matrix.catalog.columns.iter().enumerate() {
            let cells = matrix.column(j);
            let any_missing = cells.iter().any(Option::is_none);
            if col.category == FeatureCategory::FollowingIndicator {
                if any_missing {
                    flags.push(missing_flag_name(&col.name));
                }
                imputation.push(ColumnImputation::Indicator { flag: any_missing });
            } else {
                let value = median(cells.into_iter().flatten().collect()).unwrap_or(0.0);
                imputation.push(ColumnImputation::Median { value });
            }
        }
        let input_names: Vec<String> = matrix.catalog.columns.iter().map(|c| c.name.clone()).collect();
        let mut output_names = input_names.clone();
        output_names.extend(flags);
        let mut pre = Self {
            input_names,
            imputation,
            output_names,
            standardization: StandardizationParams {
                means: vec![],
                sds: vec![],
                constant: vec![],
            },
        };
        let raw = pre.impute_matrix(matrix);
        pre.standardization = StandardizationParams::fit(&raw);
        pre
    }

    fn impute_row(&self, cells: &[Option<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.output_names.len());
        let mut flags = Vec::new();
        for (cell, imp) in cells.iter().zip(&self.imputation) {
            match imp {
                ColumnImputation::Median { value } => out.push(cell.unwrap_or(*value)),
                ColumnImputation::Indicator { flag } => {
                    out.push(cell.unwrap_or(0.0));
                    if *flag {
                        flags.push(if cell.is_none() { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        out.extend(flags);
        out
    }

    fn impute_matrix(&self, matrix: &FeatureMatrix) -> Dense {
        let data = (0..matrix.n_rows())
            .flat_map(|r| self.impute_row(matrix.row(r)))
            .collect();
        Dense::new(matrix.n_rows(), self.output_names.len(), data)
    }

    /// Imputes and standardizes cells given in `input_names` order.
    pub fn transform_cells(&self, cells: &[Option<f64>]) -> Vec<f64> {
        let mut row = self.impute_row(cells);
        self.standardization.apply_row(&mut row);
        row
    }

    /// Looks columns up by name; extra matrix columns are ignored.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<Dense, LearnerError> {
        let idx: Vec<usize> = self
            .input_names
            .iter()
            .map(|n| {
                matrix
                    .catalog
                    .index_of(n)
                    .ok_or_else(|| LearnerError::Contract(format!("matrix lacks feature `{n}`")))
            })
            .collect::<Result<_, _>>()?;
        let data = (0..matrix.n_rows())
            .flat_map(|r| {
                let cells: Vec<Option<f64>> = idx.iter().map(|&j| matrix.get(r, j)).collect();
                self.transform_cells(&cells)
            })
            .collect();
        Ok(Dense::new(matrix.n_rows(), self.output_names.len(), data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featureset::{FeatureCatalog, FeatureColumn};
    use proptest::prelude::*;

    #[test]
    fn two_point_column() {
        let (z, p) = standardize_fit_apply(&Dense::from_rows(&[vec![0.0], vec![2.0]]));
        assert_eq!(z.data, vec![-1.0, 1.0]);
        assert!(!p.constant[0]);
    }

    #[test]
    fn constant_column_is_zeroed_and_flagged() {
        let (z, p) = standardize_fit_apply(&Dense::from_rows(&[vec![5.0], vec![5.0], vec![5.0]]));
        assert_eq!(z.data, vec![0.0; 3]);
        assert!(p.constant[0]);
    }

    proptest! {
        #[test]
        fn moments_and_inverse(cols in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 2..30), 1..5)) {
            let n = cols.iter().map(Vec::len).min().unwrap();
            let rows: Vec<Vec<f64>> = (0..n).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
            let x = Dense::from_rows(&rows);
            let (z, p) = standardize_fit_apply(&x);
            for j in 0..x.cols {
                if p.constant[j] { continue; }
                let m = (0..n).map(|r| z.get(r, j)).sum::<f64>() / n as f64;
                let sd = ((0..n).map(|r| (z.get(r, j) - m).powi(2)).sum::<f64>() / n as f64).sqrt();
                prop_assert!(m.abs() < 1e-9);
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
            let back = p.invert(&z);
            for (a, b) in back.data.iter().zip(&x.data) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn imputation_policy() {
        let catalog = FeatureCatalog {
            version: 1,
            columns: vec![
                FeatureColumn { name: "follows:a".into(), category: FeatureCategory::FollowingIndicator },
                FeatureColumn { name: "follows:b".into(), category: FeatureCategory::FollowingIndicator },
                FeatureColumn { name: "ig:x".into(), category: FeatureCategory::PostProfile },
            ],
            popular_accounts: None,
        };
        let m = FeatureMatrix::new(
            vec!["p1".into(), "p2".into(), "p3".into()],
            catalog,
            vec![
                Some(1.0), Some(0.0), Some(1.0),
                None, Some(1.0), None,
                Some(0.0), Some(1.0), Some(5.0),
            ],
        )
        .unwrap();
        let pre = Preprocessor::fit(&m);
        assert_eq!(pre.output_names, vec!["follows:a", "follows:b", "ig:x", "follows:a__missing"]);
        assert_eq!(pre.imputation[2], ColumnImputation::Median { value: 3.0 });
        assert_eq!(pre.impute_row(&[None, None, None]), vec![0.0, 0.0, 3.0, 1.0]);
        let z = pre.transform(&m).unwrap();
        assert_eq!((z.rows, z.cols), (3, 4));
    }
}
