use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{FeasibleSet, OptimizeError};
use crate::data::FeatureSchema;
use crate::gp::{ApsResult, GpSet};
use crate::model::CausalModel;

/// Objective/update pair used by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Unweighted classifier `f`.
    #[serde(rename = "f")]
    NonCausalF,
    /// Weighted `f′`, stepping with Φ held fixed.
    #[serde(rename = "f-prime-no-opt")]
    FPrimeNoOpt,
    /// Weighted `f′`, stepping through `Φ + ∇Φ ⊙ x_T`.
    #[serde(rename = "f-prime-opt")]
    FPrimeOpt,
    /// `f′` plus the λ-weighted pull toward the GP predictive mean.
    #[serde(rename = "g")]
    G,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::NonCausalF, Variant::FPrimeNoOpt, Variant::FPrimeOpt, Variant::G];

    pub fn name(self) -> &'static str {
        match self {
            Variant::NonCausalF => "f",
            Variant::FPrimeNoOpt => "f-prime-no-opt",
            Variant::FPrimeOpt => "f-prime-opt",
            Variant::G => "g",
        }
    }

    /// Whether the variant runs on the APS-weighted classifier.
    pub fn weighted(self) -> bool {
        self != Variant::NonCausalF
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "f" | "noncausal" | "non-causal-f" => Ok(Variant::NonCausalF),
            "f-prime-no-opt" | "fprime-no-opt" => Ok(Variant::FPrimeNoOpt),
            "f-prime-opt" | "fprime-opt" => Ok(Variant::FPrimeOpt),
            "g" => Ok(Variant::G),
            other => Err(format!("unknown variant '{other}' (expected f, f-prime-no-opt, f-prime-opt or g)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    pub budget: f64,
    pub step: f64,
    pub max_iters: usize,
    /// Stop once the objective improves by less than this for 5 consecutive iterations.
    pub tol: f64,
    pub lambda: f64,
    pub variant: Variant,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig { budget: 1.0, step: 0.05, max_iters: 500, tol: 1e-7, lambda: 1.0, variant: Variant::G }
    }
}

const PATIENCE: usize = 5;

impl OptimizationConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::InvalidConfig(m));
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return bad(format!("budget {} must be a finite value >= 0", self.budget));
        }
        if !(self.step >= 0.0 && self.step.is_finite()) {
            return bad(format!("step {} must be a finite value >= 0", self.step));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be a finite value >= 0", self.lambda));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol {} must be >= 0", self.tol));
        }
        Ok(())
    }
}

/// One instance to optimize: fixed controls and starting treatments `x̄_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub controls: Vec<f64>,
    pub treatments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResult {
    pub x_t_star: Vec<f64>,
    /// Objective at the start followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub aps_star: ApsResult,
    pub iterations_used: usize,
    pub cost_spent: f64,
}

impl PolicyResult {
    pub fn best_objective(&self) -> f64 {
        self.objective_trace.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_variant(model: &CausalModel, variant: Variant) -> Result<(), OptimizeError> {
    match (variant.weighted(), model.weighted()) {
        (true, false) => Err(OptimizeError::VariantMismatch { variant, needed: "weighted" }),
        (false, true) => Err(OptimizeError::VariantMismatch { variant, needed: "unweighted" }),
        _ => Ok(()),
    }
}

/// Variant objective at `x_t` given the GP prediction at the instance's controls.
fn objective_at(
    model: &CausalModel,
    x_c: &[f64],
    x_t: &[f64],
    aps: &ApsResult,
    cfg: &OptimizationConfig,
) -> Result<f64, OptimizeError> {
    let f = model.predict_proba(x_c, x_t, Some(aps))?;
    Ok(match cfg.variant {
        Variant::G => f + cfg.lambda * penalty(x_t, aps),
        _ => f,
    })
}

/// Σ_t (x_t − mean_t)² / (2 std_t²).
fn penalty(x_t: &[f64], aps: &ApsResult) -> f64 {
    x_t.iter().zip(&aps.mean).zip(&aps.std).map(|((x, m), s)| (x - m) * (x - m) / (2.0 * s * s)).sum()
}

/// Descent direction used by the variant's update.
fn direction(
    model: &CausalModel,
    x_c: &[f64],
    x_t: &[f64],
    aps: &ApsResult,
    cfg: &OptimizationConfig,
) -> Result<Vec<f64>, OptimizeError> {
    let mut d = match cfg.variant {
        Variant::NonCausalF => model.grad_wrt_treatments(x_c, x_t, None, false)?,
        Variant::FPrimeNoOpt => model.grad_wrt_treatments(x_c, x_t, Some(aps), false)?,
        Variant::FPrimeOpt | Variant::G => model.grad_wrt_treatments(x_c, x_t, Some(aps), true)?,
    };
    if cfg.variant == Variant::G {
        for (t, dt) in d.iter_mut().enumerate() {
            *dt += cfg.lambda * (x_t[t] - aps.mean[t]) / (aps.std[t] * aps.std[t]);
        }
    }
    Ok(d)
}

/// The variant's objective: `f`, `f′`, or `g = f′ + λ Σ (x_t − mean_t)² / (2 std_t²)`.
pub fn objective_value(
    x_t: &[f64],
    instance: &Instance,
    model: &CausalModel,
    gps: &GpSet,
    cfg: &OptimizationConfig,
) -> Result<f64, OptimizeError> {
    check_variant(model, cfg.variant)?;
    let aps = gps.aps(&instance.controls, x_t)?;
    objective_at(model, &instance.controls, x_t, &aps, cfg)
}

/// The unprojected update direction at `x_t`. For `G` this is the exact gradient of
/// [`objective_value`]; for `FPrimeNoOpt` it is the gradient with Φ frozen.
pub fn objective_gradient(
    x_t: &[f64],
    instance: &Instance,
    model: &CausalModel,
    gps: &GpSet,
    cfg: &OptimizationConfig,
) -> Result<Vec<f64>, OptimizeError> {
    check_variant(model, cfg.variant)?;
    let aps = gps.aps(&instance.controls, x_t)?;
    direction(model, &instance.controls, x_t, &aps, cfg)
}

/// Projected gradient descent from `x̄_T`, returning the best iterate visited.
pub fn optimize(
    instance: &Instance,
    model: &CausalModel,
    gps: &GpSet,
    schema: &FeatureSchema,
    cfg: &OptimizationConfig,
) -> Result<PolicyResult, OptimizeError> {
    optimize_observed(instance, model, gps, schema, cfg, &mut |_| {})
}

/// [`optimize`], calling `observe` on every iterate including the starting point.
pub fn optimize_observed(
    instance: &Instance,
    model: &CausalModel,
    gps: &GpSet,
    schema: &FeatureSchema,
    cfg: &OptimizationConfig,
    observe: &mut dyn FnMut(&[f64]),
) -> Result<PolicyResult, OptimizeError> {
    cfg.validate()?;
    check_variant(model, cfg.variant)?;
    let x_bar = &instance.treatments;
    let x_c = &instance.controls;
    if x_bar.len() != schema.n_treatments() {
        return Err(OptimizeError::Length { expected: schema.n_treatments(), got: x_bar.len() });
    }
    if gps.len() != x_bar.len() {
        return Err(OptimizeError::Length { expected: x_bar.len(), got: gps.len() });
    }
    let set = FeasibleSet {
        anchor: x_bar,
        cost_up: &schema.cost_up,
        cost_down: &schema.cost_down,
        budget: cfg.budget,
        lower: &schema.lower,
        upper: &schema.upper,
    };
    set.validate()?;

    // The GP prediction depends on the controls only; Φ and ∇Φ move with x_T.
    let (mean, std) = gps.predict(x_c);
    let mut x = x_bar.clone();
    observe(&x);
    let mut aps = ApsResult::evaluate(&x, &mean, &std)?;
    let mut obj = objective_at(model, x_c, &x, &aps, cfg)?;
    let mut trace = vec![obj];
    let (mut best_x, mut best_obj) = (x.clone(), obj);
    let mut stalled = 0;
    let mut iterations = 0;

    for iteration in 0..cfg.max_iters {
        let d = direction(model, x_c, &x, &aps, cfg)?;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(OptimizeError::NonFiniteGradient { iteration });
        }
        let stepped: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi - cfg.step * di).collect();
        x = set.project(&stepped)?;
        observe(&x);
        aps = ApsResult::evaluate(&x, &mean, &std)?;
        let next = objective_at(model, x_c, &x, &aps, cfg)?;
        trace.push(next);
        iterations = iteration + 1;
        if next < best_obj {
            best_obj = next;
            best_x = x.clone();
        }
        stalled = if obj - next < cfg.tol { stalled + 1 } else { 0 };
        obj = next;
        if stalled >= PATIENCE {
            break;
        }
    }

    let aps_star = ApsResult::evaluate(&best_x, &mean, &std)?;
    Ok(PolicyResult {
        cost_spent: set.spent(&best_x),
        x_t_star: best_x,
        objective_trace: trace,
        aps_star,
        iterations_used: iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("h".parse::<Variant>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizationConfig::default().validate().is_ok());
        for bad in [
            OptimizationConfig { budget: -1.0, ..Default::default() },
            OptimizationConfig { lambda: -0.1, ..Default::default() },
            OptimizationConfig { max_iters: 0, ..Default::default() },
            OptimizationConfig { step: f64::NAN, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
