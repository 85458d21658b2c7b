//! The outcome classifier `f` (or its APS-weighted variant `f′`), the
//! indirect-feature estimator `H`, and their composition used as the
//! inverse-classification objective.

mod classifier;
mod indirect;
pub mod mlp;

pub use classifier::{
    classifier_inputs, default_arch_grid, train_classifier, ArchScore, ClassifierConfig, MlpClassifier, TrainingMeta,
};
pub use indirect::{train_indirect, train_indirect_with, IndirectEstimator};
pub use mlp::{Mlp, OutputActivation, TrainConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FeatureSchema;
use crate::gp::{ApsResult, GpError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("architecture grid is empty")]
    EmptyArchGrid,
    #[error("fold count {folds} must be in [2, {n}]")]
    InvalidFolds { folds: usize, n: usize },
    #[error("a weighted classifier needs one fitted GP per treatment")]
    MissingGps,
    #[error("the schema has no indirectly changeable features")]
    NoIndirectFeatures,
    #[error("classifier was trained weighted but no APS was supplied")]
    MissingAps,
    #[error("APS has {got} entries, expected {expected}")]
    ApsLength { expected: usize, got: usize },
    #[error("input has {got} values, expected {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("unsupported model document format '{0}'")]
    Format(String),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Which treatment values `H` consumes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndirectInput {
    /// Raw `x_T`, as in `H(x_C, x_T)`.
    #[default]
    Raw,
    /// APS-weighted `Φ ⊙ x_T` (only differs from `Raw` for weighted classifiers).
    Weighted,
}

/// `x_T ↦ f(x_C, H(x_C, ·), ·)` for a fixed instance layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalModel {
    pub classifier: MlpClassifier,
    pub indirect: IndirectEstimator,
    pub indirect_input: IndirectInput,
    pub control_idx: Vec<usize>,
    pub indirect_idx: Vec<usize>,
    pub treatment_idx: Vec<usize>,
}

impl CausalModel {
    pub fn new(
        classifier: MlpClassifier,
        indirect: IndirectEstimator,
        indirect_input: IndirectInput,
        schema: &FeatureSchema,
    ) -> Result<Self, ModelError> {
        let p = schema.n_features();
        if classifier.net.n_inputs() != p {
            return Err(ModelError::InputLength { expected: p, got: classifier.net.n_inputs() });
        }
        if indirect.n_outputs() != schema.indirect_idx.len() {
            return Err(ModelError::InputLength { expected: schema.indirect_idx.len(), got: indirect.n_outputs() });
        }
        Ok(CausalModel {
            classifier,
            indirect,
            indirect_input,
            control_idx: schema.control_idx.clone(),
            indirect_idx: schema.indirect_idx.clone(),
            treatment_idx: schema.treatment_idx.clone(),
        })
    }

    pub fn weighted(&self) -> bool {
        self.classifier.weighted
    }

    fn p(&self) -> usize {
        self.control_idx.len() + self.indirect_idx.len() + self.treatment_idx.len()
    }

    fn weights<'a>(&self, x_t: &[f64], aps: Option<&'a ApsResult>) -> Result<Option<&'a ApsResult>, ModelError> {
        if x_t.len() != self.treatment_idx.len() {
            return Err(ModelError::InputLength { expected: self.treatment_idx.len(), got: x_t.len() });
        }
        if !self.weighted() {
            return Ok(None);
        }
        let aps = aps.ok_or(ModelError::MissingAps)?;
        if aps.len() != x_t.len() {
            return Err(ModelError::ApsLength { expected: x_t.len(), got: aps.len() });
        }
        Ok(Some(aps))
    }

    fn h_weighted(&self) -> bool {
        self.weighted() && self.indirect_input == IndirectInput::Weighted
    }

    /// Builds the classifier's feature vector; returns it with `H`'s input.
    fn assemble(&self, x_c: &[f64], x_t: &[f64], aps: Option<&ApsResult>) -> (Vec<f64>, Vec<f64>) {
        let direct: Vec<f64> = match aps {
            Some(a) => x_t.iter().zip(&a.density).map(|(x, w)| x * w).collect(),
            None => x_t.to_vec(),
        };
        let mut h_in = x_c.to_vec();
        h_in.extend_from_slice(if self.h_weighted() { &direct } else { x_t });
        let x_i = self.indirect.predict(&h_in);
        let mut full = vec![0.0; self.p()];
        for (&j, &v) in self.control_idx.iter().zip(x_c) {
            full[j] = v;
        }
        for (&j, &v) in self.indirect_idx.iter().zip(&x_i) {
            full[j] = v;
        }
        for (&j, &v) in self.treatment_idx.iter().zip(&direct) {
            full[j] = v;
        }
        (full, h_in)
    }

    /// `f(x_C, H(x_C, x_T), x_T)`, or `f(x_C, H(..), Φ ⊙ x_T)` for a weighted classifier.
    /// `aps` is ignored by an unweighted classifier.
    pub fn predict_proba(&self, x_c: &[f64], x_t: &[f64], aps: Option<&ApsResult>) -> Result<f64, ModelError> {
        if x_c.len() != self.control_idx.len() {
            return Err(ModelError::InputLength { expected: self.control_idx.len(), got: x_c.len() });
        }
        let aps = self.weights(x_t, aps)?;
        let (full, _) = self.assemble(x_c, x_t, aps);
        Ok(self.classifier.predict(&full))
    }

    /// Total derivative of [`predict_proba`](Self::predict_proba) w.r.t. `x_T`,
    /// through both the direct treatment inputs and `H`.
    ///
    /// For a weighted classifier the treatment Jacobian is `diag(Φ)` with the
    /// APS held fixed, or `diag(Φ + ∇Φ ⊙ x_T)` when `include_aps_chain` is set.
    pub fn grad_wrt_treatments(
        &self,
        x_c: &[f64],
        x_t: &[f64],
        aps: Option<&ApsResult>,
        include_aps_chain: bool,
    ) -> Result<Vec<f64>, ModelError> {
        if x_c.len() != self.control_idx.len() {
            return Err(ModelError::InputLength { expected: self.control_idx.len(), got: x_c.len() });
        }
        let aps = self.weights(x_t, aps)?;
        let (full, h_in) = self.assemble(x_c, x_t, aps);
        let g_full = self.classifier.net.input_gradient(&full, 0);

        let g_indirect: Vec<f64> = self.indirect_idx.iter().map(|&j| g_full[j]).collect();
        let g_h_in = self.indirect.vjp(&h_in, &g_indirect);
        let g_h_t = &g_h_in[self.control_idx.len()..];

        let factor: Vec<f64> = match aps {
            None => vec![1.0; x_t.len()],
            Some(a) if include_aps_chain => {
                a.density.iter().zip(&a.density_grad).zip(x_t).map(|((p, dp), x)| p + dp * x).collect()
            }
            Some(a) => a.density.clone(),
        };
        let h_weighted = self.h_weighted();
        Ok(self
            .treatment_idx
            .iter()
            .enumerate()
            .map(|(t, &j)| {
                let through_h = if h_weighted { g_h_t[t] * factor[t] } else { g_h_t[t] };
                g_full[j] * factor[t] + through_h
            })
            .collect())
    }
}

pub const CLASSIFIER_FORMAT: &str = "mlp-classifier/1";
pub const INDIRECT_FORMAT: &str = "indirect-estimator/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierDocument {
    pub format: String,
    #[serde(flatten)]
    pub classifier: MlpClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndirectDocument {
    pub format: String,
    pub estimator: IndirectEstimator,
}

impl MlpClassifier {
    pub fn to_document(&self) -> ClassifierDocument {
        ClassifierDocument { format: CLASSIFIER_FORMAT.into(), classifier: self.clone() }
    }

    pub fn from_document(doc: ClassifierDocument) -> Result<Self, ModelError> {
        if doc.format != CLASSIFIER_FORMAT {
            return Err(ModelError::Format(doc.format));
        }
        Ok(doc.classifier)
    }
}

impl IndirectEstimator {
    pub fn to_document(&self) -> IndirectDocument {
        IndirectDocument { format: INDIRECT_FORMAT.into(), estimator: self.clone() }
    }

    pub fn from_document(doc: IndirectDocument) -> Result<Self, ModelError> {
        if doc.format != INDIRECT_FORMAT {
            return Err(ModelError::Format(doc.format));
        }
        Ok(doc.estimator)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::ApsResult;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(
            ["c0", "c1", "i0", "t0", "t1"].map(String::from).to_vec(),
            vec![0, 1],
            vec![2],
            vec![3, 4],
            vec![1.0; 2],
            vec![1.0; 2],
            vec![0.0; 2],
            vec![1.0; 2],
            vec![],
        )
        .unwrap()
    }

    fn model(weighted: bool, input: IndirectInput, seed: u64) -> CausalModel {
        let f = MlpClassifier::from_net(Mlp::random(vec![5, 6, 1], OutputActivation::Sigmoid, seed), weighted);
        let h = IndirectEstimator::Network { net: Mlp::random(vec![4, 5, 1], OutputActivation::Linear, seed + 1) };
        CausalModel::new(f, h, input, &schema()).unwrap()
    }

    #[test]
    fn aps_is_ignored_when_unweighted_and_required_when_weighted() {
        let aps = ApsResult::evaluate(&[0.2, 0.4], &[0.3, 0.3], &[0.2, 0.5]).unwrap();
        let m = model(false, IndirectInput::Raw, 1);
        let a = m.predict_proba(&[0.1, 0.2], &[0.2, 0.4], None).unwrap();
        let b = m.predict_proba(&[0.1, 0.2], &[0.2, 0.4], Some(&aps)).unwrap();
        assert_eq!(a, b);
        let w = model(true, IndirectInput::Raw, 1);
        assert!(matches!(w.predict_proba(&[0.1, 0.2], &[0.2, 0.4], None), Err(ModelError::MissingAps)));
        assert!(matches!(w.grad_wrt_treatments(&[0.1, 0.2], &[0.2, 0.4], None, true), Err(ModelError::MissingAps)));
    }

    #[test]
    fn identity_weights_match_raw_network() {
        let raw = model(false, IndirectInput::Raw, 4);
        let mut weighted = raw.clone();
        weighted.classifier.weighted = true;
        let ones = ApsResult::identity(2);
        let x_c = [0.3, 0.8];
        let x_t = [0.6, 0.1];
        assert_eq!(
            raw.predict_proba(&x_c, &x_t, None).unwrap(),
            weighted.predict_proba(&x_c, &x_t, Some(&ones)).unwrap()
        );
        let g_on = weighted.grad_wrt_treatments(&x_c, &x_t, Some(&ones), true).unwrap();
        let g_off = weighted.grad_wrt_treatments(&x_c, &x_t, Some(&ones), false).unwrap();
        assert_eq!(g_on, g_off);
    }

    #[test]
    fn zero_network_has_zero_gradient() {
        let f = MlpClassifier::from_net(Mlp::zeros(vec![5, 3, 1], OutputActivation::Sigmoid), false);
        let h = IndirectEstimator::Network { net: Mlp::random(vec![4, 5, 1], OutputActivation::Linear, 2) };
        let m = CausalModel::new(f, h, IndirectInput::Raw, &schema()).unwrap();
        assert_eq!(m.predict_proba(&[0.5, 0.5], &[0.1, 0.9], None).unwrap(), 0.5);
        assert_eq!(m.grad_wrt_treatments(&[0.5, 0.5], &[0.1, 0.9], None, false).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn documents_round_trip() {
        let m = model(true, IndirectInput::Raw, 8);
        let json = serde_json::to_string(&m.classifier.to_document()).unwrap();
        assert!(json.contains("\"format\":\"mlp-classifier/1\""));
        let back = MlpClassifier::from_document(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m.classifier);
        let json = serde_json::to_string(&m.indirect.to_document()).unwrap();
        let back = IndirectEstimator::from_document(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m.indirect);
    }
}
