#![allow(dead_code)]

use causal_ic::data::FeatureSchema;
use causal_ic::gp::{fit_gp, GpSet, HyperSearch, KernelConfig, MeanMode};
use causal_ic::model::{CausalModel, IndirectEstimator, IndirectInput, Mlp, MlpClassifier, OutputActivation};
use causal_ic::seed;
use rand::Rng;

/// Columns laid out as controls, then indirect, then treatments.
pub fn schema(nc: usize, ni: usize, nt: usize) -> FeatureSchema {
    let p = nc + ni + nt;
    FeatureSchema::new(
        (0..p).map(|j| format!("x{j}")).collect(),
        (0..nc).collect(),
        (nc..nc + ni).collect(),
        (nc + ni..p).collect(),
        vec![1.0; nt],
        vec![1.0; nt],
        vec![0.0; nt],
        vec![1.0; nt],
        vec![],
    )
    .unwrap()
}

pub fn random_model(schema: &FeatureSchema, weighted: bool, input: IndirectInput, seed: u64) -> CausalModel {
    let p = schema.n_features();
    let nc = schema.control_idx.len();
    let ni = schema.indirect_idx.len();
    let nt = schema.n_treatments();
    let mut f = Mlp::random(vec![p, 8, 1], OutputActivation::Sigmoid, seed::derive(seed, "f"));
    scale_weights(&mut f, 2.0);
    let h = if ni == 0 {
        IndirectEstimator::PassThrough
    } else {
        let mut net = Mlp::random(vec![nc + nt, 6, ni], OutputActivation::Linear, seed::derive(seed, "h"));
        // Centre the outputs in [0, 1] so clipping is rare.
        for b in net.biases.last_mut().unwrap() {
            *b = 0.5;
        }
        scale_weights(&mut net, 0.3);
        IndirectEstimator::Network { net }
    };
    CausalModel::new(MlpClassifier::from_net(f, weighted), h, input, schema).unwrap()
}

fn scale_weights(net: &mut Mlp, s: f64) {
    for w in net.weights.iter_mut() {
        for v in w.iter_mut() {
            *v *= s;
        }
    }
}

/// One GP per treatment on random controls, fixed hyperparameters.
pub fn random_gps(nc: usize, nt: usize, noise: f64, seed: u64) -> GpSet {
    let mut rng = seed::rng(seed);
    let m = 25;
    let controls: Vec<Vec<f64>> = (0..m).map(|_| (0..nc).map(|_| rng.random::<f64>()).collect()).collect();
    let kernel =
        KernelConfig { lengthscale: 0.7, signal_variance: 0.05, noise_variance: noise, mean_mode: MeanMode::Constant };
    let gps = (0..nt)
        .map(|_| {
            let targets: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            fit_gp(&controls, &targets, kernel, HyperSearch::Fixed).unwrap()
        })
        .collect();
    GpSet { gps }
}

pub fn uniform(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random::<f64>()).collect()
}
