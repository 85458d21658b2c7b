//! Log marginal likelihood and multi-start gradient ascent over
//! `(log lengthscale, log signal variance, log noise variance)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use super::{KernelConfig, MeanMode};
use crate::seed;
use std::f64::consts::LN_10;

const LOG_BOUNDS: [(f64, f64); 3] = [
    (-2.0 * LN_10, 2.0 * LN_10), // lengthscale in [1e-2, 1e2]
    (-4.0 * LN_10, 2.0 * LN_10), // signal variance in [1e-4, 1e2]
    (-6.0 * LN_10, LN_10),       // noise variance in [1e-6, 10]
];

/// Closed-form log marginal likelihood of `targets` under `kernel`, or `None`
/// when the covariance is not positive definite.
pub fn log_marginal_likelihood(controls: &[Vec<f64>], targets: &[f64], kernel: &KernelConfig) -> Option<f64> {
    let problem = Problem::new(controls, targets, kernel.mean_mode);
    problem.evaluate(&to_log(kernel), false).map(|(v, _)| v)
}

struct Problem {
    sq_dist: DMatrix<f64>,
    y: DVector<f64>,
}

impl Problem {
    fn new(controls: &[Vec<f64>], targets: &[f64], mean_mode: MeanMode) -> Self {
        let m = controls.len();
        let mut sq_dist = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..i {
                let d2: f64 = controls[i].iter().zip(&controls[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                sq_dist[(i, j)] = d2;
                sq_dist[(j, i)] = d2;
            }
        }
        let offset = match mean_mode {
            MeanMode::Zero => 0.0,
            MeanMode::Constant => targets.iter().sum::<f64>() / m as f64,
        };
        let y = DVector::from_iterator(m, targets.iter().map(|t| t - offset));
        Problem { sq_dist, y }
    }

    /// Value and (optionally) gradient with respect to the log parameters.
    fn evaluate(&self, theta: &[f64; 3], with_grad: bool) -> Option<(f64, [f64; 3])> {
        let m = self.y.len();
        let ell2 = (2.0 * theta[0]).exp();
        let sf2 = theta[1].exp();
        let sn2 = theta[2].exp();
        let kf = self.sq_dist.map(|d2| sf2 * (-0.5 * d2 / ell2).exp());
        let mut k = kf.clone();
        for i in 0..m {
            k[(i, i)] += sn2;
        }
        let chol = Cholesky::<f64, Dyn>::new(k)?;
        let alpha = chol.solve(&self.y);
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        let value = -0.5 * self.y.dot(&alpha) - log_det - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();
        if !value.is_finite() {
            return None;
        }
        if !with_grad {
            return Some((value, [0.0; 3]));
        }
        // dL/dθ = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ)
        let k_inv = chol.inverse();
        let mut grad = [0.0; 3];
        for j in 0..m {
            for i in 0..m {
                let w = alpha[i] * alpha[j] - k_inv[(i, j)];
                let kf_ij = kf[(i, j)];
                grad[0] += w * kf_ij * self.sq_dist[(i, j)] / ell2;
                grad[1] += w * kf_ij;
                if i == j {
                    grad[2] += w * sn2;
                }
            }
        }
        for g in &mut grad {
            *g *= 0.5;
        }
        Some((value, grad))
    }
}

fn to_log(k: &KernelConfig) -> [f64; 3] {
    [k.lengthscale.ln(), k.signal_variance.ln(), k.noise_variance.max(1e-300).ln()]
}

fn from_log(theta: &[f64; 3], mean_mode: MeanMode) -> KernelConfig {
    KernelConfig {
        lengthscale: theta[0].exp(),
        signal_variance: theta[1].exp(),
        noise_variance: theta[2].exp(),
        mean_mode,
    }
}

fn clamp(theta: &mut [f64; 3]) {
    for (v, (lo, hi)) in theta.iter_mut().zip(LOG_BOUNDS) {
        *v = v.clamp(lo, hi);
    }
}

/// Projected gradient ascent with backtracking from one start. Never returns a
/// point worse than the start.
fn ascend(problem: &Problem, start: [f64; 3], max_iters: usize) -> Option<([f64; 3], f64)> {
    let mut theta = start;
    let (mut value, mut grad) = problem.evaluate(&theta, true)?;
    let mut step = 0.1;
    for _ in 0..max_iters {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-6 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = theta;
            for (c, g) in cand.iter_mut().zip(&grad) {
                *c += step * g / gnorm.max(1.0);
            }
            clamp(&mut cand);
            let moved: f64 = cand.iter().zip(&theta).map(|(a, b)| (a - b).abs()).sum();
            if moved == 0.0 {
                break;
            }
            if let Some((v, _)) = problem.evaluate(&cand, false) {
                if v > value {
                    let (v, g) = problem.evaluate(&cand, true)?;
                    let gain = v - value;
                    theta = cand;
                    value = v;
                    grad = g;
                    step = (step * 2.0).min(2.0);
                    accepted = true;
                    if gain < 1e-9 * value.abs().max(1.0) {
                        return Some((theta, value));
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((theta, value))
}

pub(super) fn optimize(
    controls: &[Vec<f64>],
    targets: &[f64],
    initial: KernelConfig,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> KernelConfig {
    let problem = Problem::new(controls, targets, initial.mean_mode);
    let m = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / m;
    let var_y = (targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / m).max(1e-4);

    let mut rng = seed::rng(seed);
    let mut starts = vec![to_log(&initial)];
    for _ in 0..restarts {
        starts.push([
            rng.random_range(0.1f64.ln()..10f64.ln()),
            (var_y * rng.random_range(0.1f64..10.0)).ln(),
            (var_y * rng.random_range(0.01f64..1.0)).ln(),
        ]);
    }

    let mut best: Option<([f64; 3], f64)> = None;
    for (i, mut start) in starts.into_iter().enumerate() {
        // The caller's configuration is evaluated as given; random starts are kept in bounds.
        if i > 0 {
            clamp(&mut start);
        }
        if let Some((theta, value)) = ascend(&problem, start, max_iters) {
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((theta, value));
            }
        }
    }
    match best {
        Some((theta, _)) => from_log(&theta, initial.mean_mode),
        None => initial,
    }
}
