use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{demographic_feature_names, encode_demographics, Demographics, FeatureError, PopularAccountCatalog};
use crate::ingestion::{derive_post_features, PostFeatureSet, ProfileSnapshot};

pub const FEATURE_CATALOG_VERSION: u32 = 1;
pub const CATALOG_COUNT_FEATURE: &str = "ig:number_of_following_popular_accounts";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureCategory {
    FollowingIndicator,
    PostProfile,
    Demographic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub category: FeatureCategory,
}

/// Ordered column descriptions, serialized as the JSON sidecar of a
/// feature CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub version: u32,
    pub columns: Vec<FeatureColumn>,
    pub popular_accounts: Option<PopularAccountCatalog>,
}

impl FeatureCatalog {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    fn validate(&self) -> Result<(), FeatureError> {
        let mut names = BTreeSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return Err(FeatureError::Matrix(format!("duplicate column `{}`", c.name)));
            }
        }
        Ok(())
    }
}

pub fn indicator_name(handle: &str) -> String {
    format!("follows:{handle}")
}

/// Participants x features with explicit missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub catalog: FeatureCatalog,
    values: Vec<Option<f64>>,
}

impl FeatureMatrix {
    pub fn new(
        row_ids: Vec<String>,
        catalog: FeatureCatalog,
        values: Vec<Option<f64>>,
    ) -> Result<Self, FeatureError> {
        catalog.validate()?;
        let n_cols = catalog.columns.len();
        if values.len() != row_ids.len() * n_cols {
            return Err(FeatureError::Matrix(format!(
                "{} cells for {} rows x {} columns",
                values.len(),
                row_ids.len(),
                n_cols
            )));
        }
        let mut ids = BTreeSet::new();
        for id in &row_ids {
            if !ids.insert(id.as_str()) {
                return Err(FeatureError::DuplicateParticipant(id.clone()));
            }
        }
        for (j, col) in catalog.columns.iter().enumerate() {
            if col.category != FeatureCategory::FollowingIndicator {
                continue;
            }
            for r in 0..row_ids.len() {
                if let Some(v) = values[r * n_cols + j] {
                    if v != 0.0 && v != 1.0 {
                        return Err(FeatureError::Matrix(format!(
                            "indicator `{}` has value {v} for `{}`",
                            col.name, row_ids[r]
                        )));
                    }
                }
            }
        }
        Ok(Self {
            row_ids,
            catalog,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.catalog.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        let n = self.n_cols();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<Option<f64>>> {
        self.catalog.index_of(name).map(|j| self.column(j))
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.row_ids.iter().position(|r| r == id)
    }

    /// Named cells of one row.
    pub fn named_row(&self, row: usize) -> Vec<(String, Option<f64>)> {
        self.catalog
            .columns
            .iter()
            .zip(self.row(row))
            .map(|(c, v)| (c.name.clone(), *v))
            .collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
            catalog: self.catalog.clone(),
            values,
        }
    }

    /// Keeps the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<FeatureMatrix, FeatureError> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.n_cols()) {
            return Err(FeatureError::Matrix(format!("column index {bad} out of range")));
        }
        let mut catalog = self.catalog.clone();
        catalog.columns = cols.iter().map(|&j| self.catalog.columns[j].clone()).collect();
        let values = (0..self.n_rows())
            .flat_map(|r| cols.iter().map(move |&j| self.get(r, j)))
            .collect();
        FeatureMatrix::new(self.row_ids.clone(), catalog, values)
    }

    /// Appends a column (used by tests and diagnostics).
    pub fn with_column(
        &self,
        column: FeatureColumn,
        cells: &[Option<f64>],
    ) -> Result<FeatureMatrix, FeatureError> {
        if cells.len() != self.n_rows() {
            return Err(FeatureError::Matrix("column length mismatch".into()));
        }
        let mut catalog = self.catalog.clone();
        catalog.columns.push(column);
        let mut values = Vec::with_capacity(self.values.len() + cells.len());
        for (r, cell) in cells.iter().enumerate() {
            values.extend_from_slice(self.row(r));
            values.push(*cell);
        }
        FeatureMatrix::new(self.row_ids.clone(), catalog, values)
    }

    /// CSV with a `participant_id` column; missing cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| FeatureError::Matrix(e.to_string());
        let mut header = vec!["participant_id".to_string()];
        header.extend(self.catalog.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header).map_err(err)?;
        for r in 0..self.n_rows() {
            let mut record = vec![self.row_ids[r].clone()];
            record.extend(
                self.row(r)
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&record).map_err(err)?;
        }
        w.flush().map_err(|e| FeatureError::Matrix(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R, catalog: FeatureCatalog) -> Result<Self, FeatureError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let err = |e: csv::Error| FeatureError::Matrix(e.to_string());
        let header = rdr.headers().map_err(err)?.clone();
        let expected: Vec<&str> = std::iter::once("participant_id")
            .chain(catalog.columns.iter().map(|c| c.name.as_str()))
            .collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(FeatureError::Matrix(
                "feature CSV header does not match its catalog".into(),
            ));
        }
        let mut row_ids = Vec::new();
        let mut values = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(err)?;
            row_ids.push(record.get(0).unwrap_or_default().to_string());
            for cell in record.iter().skip(1) {
                values.push(if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse::<f64>().map_err(|_| {
                        FeatureError::Matrix(format!("non-numeric cell `{cell}`"))
                    })?)
                });
            }
        }
        FeatureMatrix::new(row_ids, catalog, values)
    }
}

/// Builds the column list for a matrix with or without Instagram columns.
pub fn feature_catalog(popular: Option<&PopularAccountCatalog>) -> FeatureCatalog {
    let mut columns = Vec::new();
    if let Some(cat) = popular {
        columns.extend(cat.handles.iter().map(|h| FeatureColumn {
            name: indicator_name(h),
            category: FeatureCategory::FollowingIndicator,
        }));
        columns.extend(
            PostFeatureSet::NAMES
                .iter()
                .map(|n| format!("ig:{n}"))
                .chain(std::iter::once(CATALOG_COUNT_FEATURE.to_string()))
                .map(|name| FeatureColumn {
                    name,
                    category: FeatureCategory::PostProfile,
                }),
        );
    }
    columns.extend(demographic_feature_names().into_iter().map(|name| FeatureColumn {
        name,
        category: FeatureCategory::Demographic,
    }));
    FeatureCatalog {
        version: FEATURE_CATALOG_VERSION,
        columns,
        popular_accounts: popular.cloned(),
    }
}

/// Instagram cells (indicator block, post metrics, catalog count) for one
/// participant; `None` snapshot means nothing was crawled.
pub fn instagram_cells(
    snapshot: Option<&ProfileSnapshot>,
    popular: &PopularAccountCatalog,
) -> Vec<Option<f64>> {
    let mut cells = Vec::with_capacity(popular.len() + PostFeatureSet::NAMES.len() + 1);
    match snapshot {
        None => {
            cells.resize(popular.len() + PostFeatureSet::NAMES.len() + 1, None);
        }
        Some(s) => {
            let followed: BTreeSet<&str> =
                s.following.iter().map(|a| a.account_handle.as_str()).collect();
            let indicators: Vec<Option<f64>> = popular
                .handles
                .iter()
                .map(|h| (!s.is_private).then(|| if followed.contains(h.as_str()) { 1.0 } else { 0.0 }))
                .collect();
            let catalog_count = (!s.is_private)
                .then(|| indicators.iter().flatten().sum::<f64>());
            cells.extend(indicators);
            cells.extend(derive_post_features(s).values());
            cells.push(catalog_count);
        }
    }
    cells
}

pub fn demographic_cells(d: Option<&Demographics>) -> Vec<Option<f64>> {
    match d {
        Some(d) => encode_demographics(d).into_iter().map(|(_, v)| v).collect(),
        None => vec![None; demographic_feature_names().len()],
    }
}

/// One row per participant in `row_ids` order. With `snapshots = None` the
/// matrix holds demographic columns only.
pub fn assemble_matrix(
    row_ids: &[String],
    snapshots: Option<&[ProfileSnapshot]>,
    popular: &PopularAccountCatalog,
    demographics: &BTreeMap<String, Demographics>,
) -> Result<FeatureMatrix, FeatureError> {
    let by_id: Option<BTreeMap<&str, &ProfileSnapshot>> = match snapshots {
        None => None,
        Some(list) => {
            let mut map = BTreeMap::new();
            for s in list {
                if map.insert(s.participant_id.as_str(), s).is_some() {
                    return Err(FeatureError::DuplicateParticipant(s.participant_id.clone()));
                }
            }
            Some(map)
        }
    };
    let catalog = feature_catalog(by_id.as_ref().map(|_| popular));
    let rows: Vec<Vec<Option<f64>>> = row_ids
        .par_iter()
        .map(|id| {
            let mut cells = Vec::with_capacity(catalog.columns.len());
            if let Some(map) = &by_id {
                cells.extend(instagram_cells(map.get(id.as_str()).copied(), popular));
            }
            cells.extend(demographic_cells(demographics.get(id)));
            cells
        })
        .collect();
    FeatureMatrix::new(row_ids.to_vec(), catalog, rows.concat())
}
