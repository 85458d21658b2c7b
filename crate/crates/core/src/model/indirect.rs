use serde::{Deserialize, Serialize};

use super::mlp::{self, Mlp, OutputActivation, TrainConfig};
use super::ModelError;
use crate::data::Dataset;
use crate::gp::{weight_treatments, GpSet};
use crate::seed;

/// Estimator of the indirectly changeable features from `(x_C, x_T)`.
///
/// The network input is the controls followed by the treatments; outputs are
/// clipped to `[0, 1]`. `PassThrough` stands in when there are no indirect features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndirectEstimator {
    Network { net: Mlp },
    PassThrough,
}

impl IndirectEstimator {
    pub fn n_outputs(&self) -> usize {
        match self {
            IndirectEstimator::Network { net } => net.n_outputs(),
            IndirectEstimator::PassThrough => 0,
        }
    }

    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        match self {
            IndirectEstimator::Network { net } => net.forward(input).into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            IndirectEstimator::PassThrough => Vec::new(),
        }
    }

    /// Vector-Jacobian product: gradient w.r.t. the input of `upstream · H(input)`.
    /// Clipped outputs contribute nothing.
    pub fn vjp(&self, input: &[f64], upstream: &[f64]) -> Vec<f64> {
        match self {
            IndirectEstimator::Network { net } => {
                let trace = net.forward_trace(input);
                let delta: Vec<f64> = trace
                    .output()
                    .iter()
                    .zip(upstream)
                    .map(|(&o, &g)| if (0.0..=1.0).contains(&o) { g } else { 0.0 })
                    .collect();
                net.backward(&trace, &delta, None)
            }
            IndirectEstimator::PassThrough => vec![0.0; input.len()],
        }
    }
}

/// Regresses `x_I` on `(x_C, x_T)` with one tanh hidden layer of width `2 (|C| + |T|)`.
pub fn train_indirect(ds: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<IndirectEstimator, ModelError> {
    train_indirect_with(ds, None, cfg, seed)
}

/// As [`train_indirect`], optionally feeding APS-weighted treatments to the network.
pub fn train_indirect_with(
    ds: &Dataset,
    gps: Option<&GpSet>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<IndirectEstimator, ModelError> {
    let n_i = ds.schema.indirect_idx.len();
    if n_i == 0 {
        return Err(ModelError::NoIndirectFeatures);
    }
    let n_in = ds.schema.control_idx.len() + ds.schema.n_treatments();
    let mut inputs = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let mut row = ds.controls(i);
        let x_t = ds.treatments(i);
        match gps {
            Some(g) => {
                let aps = g.aps(&row, &x_t)?;
                row.extend(weight_treatments(&x_t, &aps.density)?);
            }
            None => row.extend(x_t),
        }
        inputs.push(row);
    }
    let targets: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.indirect(i)).collect();
    let net = mlp::train(
        vec![n_in, 2 * n_in, n_i],
        OutputActivation::Linear,
        &inputs,
        &targets,
        cfg,
        seed::derive(seed, "indirect"),
    );
    Ok(IndirectEstimator::Network { net })
}
