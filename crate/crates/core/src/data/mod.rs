//! Dataset ingestion, min-max normalization and the half split used by the
//! two-model experiment protocol.

mod load;
mod schema;

pub use load::load_dataset;
pub use schema::{FeatureSchema, Role, SchemaFile};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("data file not found: {0}")]
    DataNotFound(String),
    #[error("schema not found: {0}")]
    SchemaNotFound(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("schema references column '{0}' which is not in the data header")]
    UnknownColumn(String),
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("row {row}: label '{value}' does not map to 0 or 1")]
    LabelOutOfRange { row: usize, value: String },
    #[error("dataset has {rows} rows and {cols} columns but the schema describes {expected}")]
    Shape { rows: usize, cols: usize, expected: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("need at least {need} rows, have {have}")]
    TooFewRows { need: usize, have: usize },
}

/// Per-column `(min, max)` recorded when a dataset is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParam {
    pub min: f64,
    pub max: f64,
}

impl NormParam {
    pub fn scale(&self, v: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            (v - self.min) / range
        } else {
            0.0
        }
    }

    pub fn unscale(&self, v: f64) -> f64 {
        self.min + v * (self.max - self.min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Row-major feature matrix, `n` rows of `p` values.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub schema: FeatureSchema,
    pub norm_params: Option<Vec<NormParam>>,
    /// Position of each row in the originally loaded file.
    pub row_ids: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<u8>, schema: FeatureSchema) -> Result<Self, DataError> {
        if x.is_empty() {
            return Err(DataError::Empty);
        }
        let p = schema.n_features();
        if x.len() != y.len() || x.iter().any(|r| r.len() != p) {
            return Err(DataError::Shape {
                rows: x.len(),
                cols: x.iter().map(Vec::len).max().unwrap_or(0),
                expected: p,
            });
        }
        if let Some(row) = y.iter().position(|&v| v > 1) {
            return Err(DataError::LabelOutOfRange { row, value: y[row].to_string() });
        }
        schema.validate()?;
        let row_ids = (0..x.len()).collect();
        Ok(Dataset { x, y, schema, norm_params: None, row_ids })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.schema.n_features()
    }

    pub fn controls(&self, row: usize) -> Vec<f64> {
        gather(&self.x[row], &self.schema.control_idx)
    }

    pub fn indirect(&self, row: usize) -> Vec<f64> {
        gather(&self.x[row], &self.schema.indirect_idx)
    }

    pub fn treatments(&self, row: usize) -> Vec<f64> {
        gather(&self.x[row], &self.schema.treatment_idx)
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[j]).collect()
    }

    /// Rows at the given positions (not original row ids), sharing schema and norm params.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            schema: self.schema.clone(),
            norm_params: self.norm_params.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Maps normalized values back to the original scale.
    pub fn denormalized(&self) -> Option<Vec<Vec<f64>>> {
        let params = self.norm_params.as_ref()?;
        Some(self.x.iter().map(|r| r.iter().zip(params).map(|(&v, p)| p.unscale(v)).collect()).collect())
    }
}

pub fn gather(row: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&j| row[j]).collect()
}

/// Per-column min-max scaling to `[0, 1]`; constant columns map to 0.
pub fn normalize(ds: &Dataset) -> Dataset {
    let p = ds.p();
    let mut params = vec![NormParam { min: f64::INFINITY, max: f64::NEG_INFINITY }; p];
    for row in &ds.x {
        for (param, &v) in params.iter_mut().zip(row) {
            param.min = param.min.min(v);
            param.max = param.max.max(v);
        }
    }
    let x = ds.x.iter().map(|r| r.iter().zip(&params).map(|(&v, param)| param.scale(v)).collect()).collect();
    Dataset { x, y: ds.y.clone(), schema: ds.schema.clone(), norm_params: Some(params), row_ids: ds.row_ids.clone() }
}

/// Random half split: the first part gets `ceil(n/2)` rows, the second `floor(n/2)`.
/// Rows keep their relative order inside each half.
pub fn split_half(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    let n = ds.n();
    if n < 2 {
        return Err(DataError::TooFewRows { need: 2, have: n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed));
    let (a, b) = perm.split_at(n.div_ceil(2));
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    Ok((ds.subset(&a), ds.subset(&b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(values: Vec<Vec<f64>>) -> Dataset {
        let p = values[0].len();
        let names = (0..p).map(|j| format!("c{j}")).collect();
        let schema = FeatureSchema::new(
            names,
            (0..p - 1).collect(),
            vec![],
            vec![p - 1],
            vec![1.0],
            vec![1.0],
            vec![0.0],
            vec![1.0],
            vec![],
        )
        .unwrap();
        let y = vec![0; values.len()];
        Dataset::new(values, y, schema).unwrap()
    }

    #[test]
    fn min_max_examples() {
        let ds = toy(vec![vec![0.0, 3.0, 0.0], vec![5.0, 3.0, 0.5], vec![10.0, 3.0, 1.0]]);
        let nd = normalize(&ds);
        assert_eq!(nd.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(nd.column(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(nd.column(2), vec![0.0, 0.5, 1.0]);
        let params = nd.norm_params.as_ref().unwrap();
        assert_eq!(params[1], NormParam { min: 3.0, max: 3.0 });
    }

    #[test]
    fn denormalize_recovers_values() {
        let ds = toy(vec![vec![-2.5, 1e3, 0.1], vec![7.25, -4.0, 0.9], vec![1.0, 12.0, 0.3]]);
        let back = normalize(&ds).denormalized().unwrap();
        for (orig, rec) in ds.x.iter().zip(&back) {
            for (a, b) in orig.iter().zip(rec) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let rows = (0..649).map(|i| vec![i as f64, 0.0]).collect();
        let ds = toy(rows);
        let (a, b) = split_half(&ds, 7).unwrap();
        assert_eq!((a.n(), b.n()), (325, 324));
        let mut all: Vec<usize> = a.row_ids.iter().chain(&b.row_ids).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..649).collect::<Vec<_>>());
        let (a2, _) = split_half(&ds, 7).unwrap();
        assert_eq!(a.row_ids, a2.row_ids);
        let (a3, _) = split_half(&ds, 8).unwrap();
        assert_ne!(a.row_ids, a3.row_ids);
    }

    #[test]
    fn split_rejects_single_row() {
        let ds = toy(vec![vec![1.0, 0.0]]);
        assert!(matches!(split_half(&ds, 0), Err(DataError::TooFewRows { .. })));
    }
}
