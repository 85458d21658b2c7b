//! Per-treatment Gaussian-process assignment models.
//!
//! Each treatment gets an independent GP regressing its observed value on the
//! control features (squared-exponential kernel, isotropic lengthscale,
//! constant or zero prior mean). The predictive distribution at an instance's
//! controls defines its approximate propensity score.

mod aps;
mod hyper;

pub use aps::{aps, aps_gradient, weight_treatments, ApsResult};
pub use hyper::log_marginal_likelihood;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::seed;

/// Floor applied to every predictive standard deviation.
pub const STD_FLOOR: f64 = 1e-6;
const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("a GP needs at least 2 training points, got {0}")]
    TooFewPoints(usize),
    #[error("training data contains non-finite values")]
    NonFinite,
    #[error("invalid kernel configuration: {0}")]
    InvalidKernel(String),
    #[error("kernel matrix is not positive definite even with jitter {0:e}")]
    Cholesky(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("standard deviation {value} at treatment {index} is not positive")]
    NonPositiveStd { index: usize, value: f64 },
    #[error("unsupported GP document format '{0}'")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    Zero,
    /// Constant prior mean equal to the training-target average.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub mean_mode: MeanMode,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { lengthscale: 1.0, signal_variance: 0.1, noise_variance: 0.01, mean_mode: MeanMode::Constant }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(GpError::InvalidKernel(format!("lengthscale {} must be > 0", self.lengthscale)));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(GpError::InvalidKernel(format!("signal variance {} must be > 0", self.signal_variance)));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(GpError::InvalidKernel(format!("noise variance {} must be >= 0", self.noise_variance)));
        }
        Ok(())
    }

    pub fn covariance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-0.5 * d2 / (self.lengthscale * self.lengthscale)).exp()
    }
}

/// How hyperparameters are chosen during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HyperSearch {
    Fixed,
    /// Multi-start projected gradient ascent on the log marginal likelihood.
    /// The supplied configuration is always one of the starts.
    Optimize {
        restarts: usize,
        max_iters: usize,
        seed: u64,
    },
}

impl HyperSearch {
    pub fn with_seed(seed: u64) -> Self {
        HyperSearch::Optimize { restarts: 5, max_iters: 60, seed }
    }
}

#[derive(Debug, Clone)]
pub struct TreatmentGp {
    kernel: KernelConfig,
    train_controls: Vec<Vec<f64>>,
    targets: Vec<f64>,
    prior_mean: f64,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

pub fn fit_gp(
    controls: &[Vec<f64>],
    targets: &[f64],
    config: KernelConfig,
    search: HyperSearch,
) -> Result<TreatmentGp, GpError> {
    let m = controls.len();
    if m < 2 {
        return Err(GpError::TooFewPoints(m));
    }
    if targets.len() != m {
        return Err(GpError::LengthMismatch { expected: m, got: targets.len() });
    }
    let d = controls[0].len();
    if controls.iter().any(|r| r.len() != d) {
        return Err(GpError::LengthMismatch { expected: d, got: controls.iter().map(Vec::len).max().unwrap_or(0) });
    }
    if controls.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite);
    }
    config.validate()?;
    let kernel = match search {
        HyperSearch::Fixed => config,
        HyperSearch::Optimize { restarts, max_iters, seed } => {
            hyper::optimize(controls, targets, config, restarts, max_iters, seed)
        }
    };
    TreatmentGp::condition(kernel, controls.to_vec(), targets.to_vec())
}

impl TreatmentGp {
    fn condition(kernel: KernelConfig, train_controls: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, GpError> {
        kernel.validate()?;
        let prior_mean = match kernel.mean_mode {
            MeanMode::Zero => 0.0,
            MeanMode::Constant => targets.iter().sum::<f64>() / targets.len() as f64,
        };
        let k = kernel_matrix(&kernel, &train_controls);
        let (chol, jitter) = factor_with_jitter(k)?;
        let centered = DVector::from_iterator(targets.len(), targets.iter().map(|t| t - prior_mean));
        let alpha = chol.solve(&centered);
        Ok(TreatmentGp { kernel, train_controls, targets, prior_mean, jitter, chol, alpha })
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    /// Extra diagonal added on top of the noise variance to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let centered: Vec<f64> = self.targets.iter().map(|t| t - self.prior_mean).collect();
        let fit = centered.iter().zip(self.alpha.iter()).map(|(y, a)| y * a).sum::<f64>();
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        let m = self.targets.len() as f64;
        -0.5 * fit - log_det - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
    }

    /// Predictive mean and standard deviation of the treatment value at `x_c`.
    /// The variance includes the noise term; the std is floored at [`STD_FLOOR`].
    pub fn predict(&self, x_c: &[f64]) -> (f64, f64) {
        let kstar = DVector::from_iterator(
            self.train_controls.len(),
            self.train_controls.iter().map(|r| self.kernel.covariance(r, x_c)),
        );
        let mean = self.prior_mean + kstar.dot(&self.alpha);
        let v = self.chol.l_dirty().solve_lower_triangular(&kstar).expect("cholesky factor has a positive diagonal");
        let var = self.kernel.signal_variance + self.kernel.noise_variance - v.norm_squared();
        (mean, var.max(0.0).sqrt().max(STD_FLOOR))
    }

    pub fn to_document(&self) -> GpDocument {
        GpDocument {
            format: GP_FORMAT.to_string(),
            kernel: self.kernel,
            train_controls: self.train_controls.clone(),
            targets: self.targets.clone(),
        }
    }

    pub fn from_document(doc: GpDocument) -> Result<Self, GpError> {
        if doc.format != GP_FORMAT {
            return Err(GpError::Format(doc.format));
        }
        if doc.train_controls.len() < 2 {
            return Err(GpError::TooFewPoints(doc.train_controls.len()));
        }
        TreatmentGp::condition(doc.kernel, doc.train_controls, doc.targets)
    }
}

pub const GP_FORMAT: &str = "treatment-gp/1";

/// Serialized GP: hyperparameters plus training data. The factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpDocument {
    pub format: String,
    pub kernel: KernelConfig,
    pub train_controls: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

pub(crate) fn kernel_matrix(kernel: &KernelConfig, x: &[Vec<f64>]) -> DMatrix<f64> {
    let m = x.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = kernel.covariance(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += kernel.noise_variance;
    }
    k
}

/// Cholesky of `k`, retrying with jitter 1e-10, 1e-9, ..., 1e-4 on the diagonal.
pub(crate) fn factor_with_jitter(k: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok((c, 0.0));
    }
    let mut jitter = 1e-10;
    while jitter <= MAX_JITTER * 1.000_001 {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(GpError::Cholesky(MAX_JITTER))
}

/// One fitted GP per treatment, in schema treatment order.
#[derive(Debug, Clone)]
pub struct GpSet {
    pub gps: Vec<TreatmentGp>,
}

impl GpSet {
    /// Fits every treatment's GP on the dataset's controls. The fits are independent
    /// and run in parallel; treatment `t` draws restart seeds from `(seed, t)` only.
    pub fn fit(ds: &Dataset, config: KernelConfig, search: HyperSearch) -> Result<Self, GpError> {
        let controls: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.controls(i)).collect();
        let gps = ds
            .schema
            .treatment_idx
            .par_iter()
            .enumerate()
            .map(|(t, &col)| {
                let targets = ds.column(col);
                let search = match search {
                    HyperSearch::Optimize { restarts, max_iters, seed } => HyperSearch::Optimize {
                        restarts,
                        max_iters,
                        seed: seed::derive_indexed(seed, "gp-treatment", t as u64),
                    },
                    HyperSearch::Fixed => HyperSearch::Fixed,
                };
                fit_gp(&controls, &targets, config, search)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GpSet { gps })
    }

    pub fn len(&self) -> usize {
        self.gps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gps.is_empty()
    }

    pub fn predict(&self, x_c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.gps.iter().map(|gp| gp.predict(x_c)).unzip()
    }

    pub fn aps(&self, x_c: &[f64], x_t: &[f64]) -> Result<ApsResult, GpError> {
        let (mean, std) = self.predict(x_c);
        ApsResult::evaluate(x_t, &mean, &std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(noise: f64, mean_mode: MeanMode) -> KernelConfig {
        KernelConfig { lengthscale: 0.5, signal_variance: 1.0, noise_variance: noise, mean_mode }
    }

    #[test]
    fn single_point_rejected_duplicates_survive() {
        let one = fit_gp(&[vec![0.1]], &[0.3], cfg(1e-6, MeanMode::Constant), HyperSearch::Fixed);
        assert!(matches!(one, Err(GpError::TooFewPoints(1))));
        let dup =
            fit_gp(&[vec![0.1, 0.2], vec![0.1, 0.2]], &[0.3, 0.3], cfg(1e-6, MeanMode::Constant), HyperSearch::Fixed);
        assert!(dup.is_ok());
        let exact_dup =
            fit_gp(&[vec![0.1], vec![0.1]], &[0.3, 0.5], cfg(0.0, MeanMode::Zero), HyperSearch::Fixed).unwrap();
        assert!(exact_dup.jitter() > 0.0 && exact_dup.jitter() <= 1e-4);
    }

    #[test]
    fn invalid_kernel_rejected() {
        let mut k = cfg(0.1, MeanMode::Zero);
        k.lengthscale = 0.0;
        assert!(fit_gp(&[vec![0.0], vec![1.0]], &[0.0, 1.0], k, HyperSearch::Fixed).is_err());
    }

    #[test]
    fn cholesky_is_lower_with_positive_diagonal() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0, (i * i) as f64 / 100.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].sin()).collect();
        let gp = fit_gp(&x, &y, cfg(1e-3, MeanMode::Constant), HyperSearch::Fixed).unwrap();
        let l = gp.cholesky_factor();
        for i in 0..l.nrows() {
            assert!(l[(i, i)] > 0.0);
            for j in i + 1..l.ncols() {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn interpolates_and_reverts_to_prior() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 8.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| (3.0 * r[0]).cos()).collect();
        let gp = fit_gp(&x, &y, cfg(1e-10, MeanMode::Zero), HyperSearch::Fixed).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (m, s) = gp.predict(xi);
            assert_abs_diff_eq!(m, *yi, epsilon = 1e-5);
            assert!(s < 1e-3);
        }
        let (m, s) = gp.predict(&[50.0]);
        assert_abs_diff_eq!(m, 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn document_round_trip_preserves_predictions() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.37).fract(), i as f64 / 12.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 0.5 + r[1]).collect();
        let gp = fit_gp(&x, &y, cfg(0.01, MeanMode::Constant), HyperSearch::Fixed).unwrap();
        let json = serde_json::to_string(&gp.to_document()).unwrap();
        let back = TreatmentGp::from_document(serde_json::from_str(&json).unwrap()).unwrap();
        for q in [[0.2, 0.4], [0.9, 0.1]] {
            assert_eq!(gp.predict(&q), back.predict(&q));
        }
    }
}
