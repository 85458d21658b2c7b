//! Dense feed-forward network with tanh hidden layers, trained by mini-batch
//! gradient descent. Backpropagation is written out by hand; the same backward
//! pass yields parameter gradients (training) and input gradients (inverse
//! classification).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Sigmoid,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 400, batch_size: 32, learning_rate: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Layer widths, input first.
    pub dims: Vec<usize>,
    /// `weights[l]` is `dims[l + 1] x dims[l]`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub output: OutputActivation,
}

/// Post-activation values of every layer from one forward pass (input included).
pub struct Trace {
    pub activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    pub fn zeros(dims: Vec<usize>, output: OutputActivation) -> Self {
        let weights = dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Mlp { dims, weights, biases, output }
    }

    /// Gaussian weights scaled by `1/sqrt(fan_in)`, zero biases.
    pub fn random(dims: Vec<usize>, output: OutputActivation, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut net = Mlp::zeros(dims, output);
        for (l, w) in net.weights.iter_mut().enumerate() {
            let scale = 1.0 / (net.dims[l] as f64).sqrt();
            for v in w.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = z * scale;
            }
        }
        net
    }

    pub fn n_inputs(&self) -> usize {
        self.dims[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            a = self.layer(l, &a);
        }
        a
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut activations = Vec::with_capacity(self.n_layers() + 1);
        activations.push(x.to_vec());
        for l in 0..self.n_layers() {
            let next = self.layer(l, activations.last().unwrap());
            activations.push(next);
        }
        Trace { activations }
    }

    fn layer(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
        debug_assert_eq!(input.len(), n_in);
        let last = l + 1 == self.n_layers();
        let w = &self.weights[l];
        (0..n_out)
            .map(|o| {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = self.biases[l][o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                match (last, self.output) {
                    (false, _) => z.tanh(),
                    (true, OutputActivation::Sigmoid) => sigmoid(z),
                    (true, OutputActivation::Linear) => z,
                }
            })
            .collect()
    }

    /// Backpropagates `delta`, the gradient w.r.t. the output layer's
    /// pre-activation, and returns the gradient w.r.t. the input. Parameter
    /// gradients are accumulated into `grads` when given.
    pub fn backward(&self, trace: &Trace, delta: &[f64], mut grads: Option<&mut Grads>) -> Vec<f64> {
        let mut delta = delta.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let input = &trace.activations[l];
            if let Some(g) = grads.as_deref_mut() {
                for o in 0..n_out {
                    g.biases[l][o] += delta[o];
                    let row = &mut g.weights[l][o * n_in..(o + 1) * n_in];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += delta[o] * a;
                    }
                }
            }
            let w = &self.weights[l];
            let mut back = vec![0.0; n_in];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                for (b, wv) in back.iter_mut().zip(row) {
                    *b += delta[o] * wv;
                }
            }
            if l > 0 {
                // Through the tanh of the previous layer.
                for (b, a) in back.iter_mut().zip(input) {
                    *b *= 1.0 - a * a;
                }
            }
            delta = back;
        }
        delta
    }

    /// Gradient of output `k` w.r.t. the input.
    pub fn input_gradient(&self, x: &[f64], k: usize) -> Vec<f64> {
        let trace = self.forward_trace(x);
        let out = trace.output()[k];
        let mut delta = vec![0.0; self.n_outputs()];
        delta[k] = match self.output {
            OutputActivation::Sigmoid => out * (1.0 - out),
            OutputActivation::Linear => 1.0,
        };
        self.backward(&trace, &delta, None)
    }

    fn apply(&mut self, grads: &Grads, rate: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (a, b) in w.iter_mut().zip(g) {
                *a -= rate * b;
            }
        }
        for (w, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (a, b) in w.iter_mut().zip(g) {
                *a -= rate * b;
            }
        }
    }
}

pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    fn zeros_like(net: &Mlp) -> Self {
        Grads {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn reset(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|v| v.fill(0.0));
    }
}

/// Mini-batch gradient descent on the mean per-example loss: binary
/// cross-entropy for a sigmoid output, half squared error for a linear one.
pub fn train(
    dims: Vec<usize>,
    output: OutputActivation,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
    seed: u64,
) -> Mlp {
    let mut net = Mlp::random(dims, output, seed::derive(seed, "init"));
    let mut rng = seed::rng(seed::derive(seed, "batches"));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut grads = Grads::zeros_like(&net);
    let batch = cfg.batch_size.max(1);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            grads.reset();
            for &i in chunk {
                let trace = net.forward_trace(&inputs[i]);
                // Both losses meet their canonical link: dL/dz = o - t.
                let delta: Vec<f64> = trace.output().iter().zip(&targets[i]).map(|(o, t)| o - t).collect();
                net.backward(&trace, &delta, Some(&mut grads));
            }
            net.apply(&grads, cfg.learning_rate / chunk.len() as f64);
        }
    }
    net
}

pub fn log_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}
