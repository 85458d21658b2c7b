use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Column roles of the expanded feature matrix plus per-treatment costs and bounds.
///
/// `cost_up`, `cost_down`, `lower` and `upper` are aligned with `treatment_idx`.
/// Bounds are expressed on the normalized `[0, 1]` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub feature_names: Vec<String>,
    pub control_idx: Vec<usize>,
    pub indirect_idx: Vec<usize>,
    pub treatment_idx: Vec<usize>,
    pub cost_up: Vec<f64>,
    pub cost_down: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Source columns that were one-hot binarized.
    pub categorical_cols: Vec<String>,
}

impl FeatureSchema {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        feature_names: Vec<String>,
        control_idx: Vec<usize>,
        indirect_idx: Vec<usize>,
        treatment_idx: Vec<usize>,
        cost_up: Vec<f64>,
        cost_down: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        categorical_cols: Vec<String>,
    ) -> Result<Self, DataError> {
        let schema = FeatureSchema {
            feature_names,
            control_idx,
            indirect_idx,
            treatment_idx,
            cost_up,
            cost_down,
            lower,
            upper,
            categorical_cols,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let p = self.feature_names.len();
        let mut seen = vec![false; p];
        for &j in self.control_idx.iter().chain(&self.indirect_idx).chain(&self.treatment_idx) {
            if j >= p {
                return Err(DataError::InvalidSchema(format!("column index {j} out of range (p = {p})")));
            }
            if seen[j] {
                return Err(DataError::InvalidSchema(format!(
                    "column '{}' is assigned to more than one role",
                    self.feature_names[j]
                )));
            }
            seen[j] = true;
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(DataError::InvalidSchema(format!("column '{}' has no role", self.feature_names[j])));
        }
        let k = self.treatment_idx.len();
        for (name, v) in
            [("cost_up", &self.cost_up), ("cost_down", &self.cost_down), ("lower", &self.lower), ("upper", &self.upper)]
        {
            if v.len() != k {
                return Err(DataError::InvalidSchema(format!(
                    "{name} has {} entries, expected one per treatment ({k})",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(DataError::InvalidSchema(format!("{name} contains a non-finite value")));
            }
        }
        if self.cost_up.iter().chain(&self.cost_down).any(|&c| c < 0.0) {
            return Err(DataError::InvalidSchema("treatment costs must be nonnegative".into()));
        }
        for t in 0..k {
            if self.lower[t] > self.upper[t] {
                return Err(DataError::InvalidSchema(format!(
                    "treatment '{}' has lower bound {} above upper bound {}",
                    self.feature_names[self.treatment_idx[t]], self.lower[t], self.upper[t]
                )));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_treatments(&self) -> usize {
        self.treatment_idx.len()
    }

    pub fn treatment_names(&self) -> Vec<String> {
        self.treatment_idx.iter().map(|&j| self.feature_names[j].clone()).collect()
    }
}

/// On-disk schema document. Unknown keys (e.g. an `optimization` block) are ignored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub label: String,
    /// Raw label values mapped to class 1. When absent the label column must already hold 0/1.
    #[serde(default)]
    pub positive_label_values: Option<Vec<serde_json::Value>>,
    #[serde(default)]
    pub control: Vec<String>,
    #[serde(default)]
    pub indirect: Vec<String>,
    pub treatment: Vec<String>,
    pub cost_up: Vec<f64>,
    pub cost_down: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub categorical: Vec<String>,
}

impl SchemaFile {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(DataError::SchemaNotFound(path.display().to_string()));
        }
        let text =
            fs::read_to_string(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|e| DataError::InvalidSchema(e.to_string()))
    }

    pub fn role_of(&self, column: &str) -> Option<Role> {
        if self.control.iter().any(|c| c == column) {
            Some(Role::Control)
        } else if self.indirect.iter().any(|c| c == column) {
            Some(Role::Indirect)
        } else if self.treatment.iter().any(|c| c == column) {
            Some(Role::Treatment)
        } else {
            None
        }
    }

    pub(crate) fn check_shape(&self) -> Result<(), DataError> {
        let k = self.treatment.len();
        for (name, len) in [
            ("cost_up", self.cost_up.len()),
            ("cost_down", self.cost_down.len()),
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
        ] {
            if len != k {
                return Err(DataError::InvalidSchema(format!(
                    "{name} has {len} entries, expected one per treatment ({k})"
                )));
            }
        }
        let mut all: Vec<&String> = self.control.iter().chain(&self.indirect).chain(&self.treatment).collect();
        all.push(&self.label);
        all.sort();
        if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
            return Err(DataError::InvalidSchema(format!("column '{}' listed more than once", w[0])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Control,
    Indirect,
    Treatment,
}
