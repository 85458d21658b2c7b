use super::EvalError;
use crate::gp::GpSet;
use crate::invclass::PolicyResult;
use crate::model::CausalModel;

/// Estimated effect of moving from `x_bar` to `x_star`: `p(x̄) − p(x*)` under the
/// evaluation model, with `H` re-evaluated at each treatment vector. Positive
/// means the probability of the undesirable class went down. A weighted model
/// evaluates Φ from `gps` at each treatment vector.
pub fn ifee(model: &CausalModel, gps: &GpSet, x_c: &[f64], x_bar: &[f64], x_star: &[f64]) -> Result<f64, EvalError> {
    let before = evaluate(model, gps, x_c, x_bar)?;
    let after = evaluate(model, gps, x_c, x_star)?;
    Ok(before - after)
}

fn evaluate(model: &CausalModel, gps: &GpSet, x_c: &[f64], x_t: &[f64]) -> Result<f64, EvalError> {
    if model.weighted() {
        let aps = gps.aps(x_c, x_t)?;
        Ok(model.predict_proba(x_c, x_t, Some(&aps))?)
    } else {
        Ok(model.predict_proba(x_c, x_t, None)?)
    }
}

/// Mean APS over policies after discarding per-instance means that lie more than
/// three standard deviations from the mean of all per-instance means.
/// Returns the filtered mean and the number of surviving instances.
pub fn average_aps(policies: &[PolicyResult]) -> Result<(f64, usize), EvalError> {
    let means: Vec<f64> = policies.iter().map(|p| p.aps_star.mean_density()).collect();
    filtered_mean(&means)
}

pub(crate) fn filtered_mean(values: &[f64]) -> Result<(f64, usize), EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    // Rounding slack keeps identical inputs from being filtered against a zero std.
    let limit = 3.0 * std + 1e-12 * mean.abs().max(1.0);
    let kept: Vec<f64> = values.iter().copied().filter(|v| (v - mean).abs() <= limit).collect();
    Ok((kept.iter().sum::<f64>() / kept.len() as f64, kept.len()))
}

/// Per treatment, the number of instances whose optimized value differs from
/// the original by more than `threshold`.
pub fn treatment_frequency(
    policies: &[PolicyResult],
    x_bars: &[Vec<f64>],
    threshold: f64,
) -> Result<Vec<usize>, EvalError> {
    if policies.len() != x_bars.len() {
        return Err(EvalError::Length { expected: policies.len(), got: x_bars.len() });
    }
    let k = x_bars.first().map_or(0, Vec::len);
    let mut counts = vec![0; k];
    for (p, bar) in policies.iter().zip(x_bars) {
        if p.x_t_star.len() != k || bar.len() != k {
            return Err(EvalError::Length { expected: k, got: p.x_t_star.len().max(bar.len()) });
        }
        for t in 0..k {
            if (p.x_t_star[t] - bar[t]).abs() > threshold {
                counts[t] += 1;
            }
        }
    }
    Ok(counts)
}
