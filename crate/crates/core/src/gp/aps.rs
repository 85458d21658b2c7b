//! Approximate propensity score: the Gaussian density of an observed treatment
//! value under its GP predictive distribution, its derivative, and the
//! elementwise treatment weighting built on it.

use serde::{Deserialize, Serialize};

use super::GpError;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Per-treatment GP prediction and density at one treatment vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApsResult {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub density: Vec<f64>,
    pub density_grad: Vec<f64>,
}

impl ApsResult {
    /// Density and gradient at `x_t` given fixed GP means and standard deviations.
    pub fn evaluate(x_t: &[f64], mean: &[f64], std: &[f64]) -> Result<Self, GpError> {
        Ok(ApsResult {
            density: aps(x_t, mean, std)?,
            density_grad: aps_gradient(x_t, mean, std)?,
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    /// Same GP prediction re-evaluated at a different treatment vector.
    pub fn at(&self, x_t: &[f64]) -> Result<Self, GpError> {
        Self::evaluate(x_t, &self.mean, &self.std)
    }

    /// All-ones weights with zero gradient: the identity weighting.
    pub fn identity(k: usize) -> Self {
        ApsResult { mean: vec![0.0; k], std: vec![1.0; k], density: vec![1.0; k], density_grad: vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn mean_density(&self) -> f64 {
        if self.density.is_empty() {
            return 0.0;
        }
        self.density.iter().sum::<f64>() / self.density.len() as f64
    }
}

fn check(x_t: &[f64], mean: &[f64], std: &[f64]) -> Result<(), GpError> {
    if x_t.len() != mean.len() || x_t.len() != std.len() {
        return Err(GpError::LengthMismatch { expected: x_t.len(), got: mean.len().max(std.len()) });
    }
    if let Some((index, &value)) = std.iter().enumerate().find(|(_, s)| !(**s > 0.0)) {
        return Err(GpError::NonPositiveStd { index, value });
    }
    Ok(())
}

fn density(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    INV_SQRT_2PI / std * (-0.5 * z * z).exp()
}

/// Φ_t = N(x_t; mean_t, std_t²), independently per treatment.
pub fn aps(x_t: &[f64], mean: &[f64], std: &[f64]) -> Result<Vec<f64>, GpError> {
    check(x_t, mean, std)?;
    Ok(x_t.iter().zip(mean).zip(std).map(|((&x, &m), &s)| density(x, m, s)).collect())
}

/// ∂Φ_t/∂x_t = −Φ_t (x_t − mean_t) / std_t².
pub fn aps_gradient(x_t: &[f64], mean: &[f64], std: &[f64]) -> Result<Vec<f64>, GpError> {
    check(x_t, mean, std)?;
    Ok(x_t.iter().zip(mean).zip(std).map(|((&x, &m), &s)| -density(x, m, s) * (x - m) / (s * s)).collect())
}

/// x′ = Φ ⊙ x_T.
pub fn weight_treatments(x_t: &[f64], phi: &[f64]) -> Result<Vec<f64>, GpError> {
    if x_t.len() != phi.len() {
        return Err(GpError::LengthMismatch { expected: x_t.len(), got: phi.len() });
    }
    Ok(x_t.iter().zip(phi).map(|(x, w)| x * w).collect())
}
