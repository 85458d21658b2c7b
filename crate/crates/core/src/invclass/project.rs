//! Cost function and Euclidean projection onto the budget-and-box feasible set
//! `{x : Ψ(x − x̄) ≤ B, l ≤ x ≤ u}`.

use super::OptimizeError;

/// `Ψ(z) = Σ c⁺_t max(z_t, 0) + c⁻_t max(−z_t, 0)`.
pub fn cost(z: &[f64], c_up: &[f64], c_down: &[f64]) -> f64 {
    z.iter().zip(c_up.iter().zip(c_down)).map(|(&d, (&up, &down))| if d > 0.0 { up * d } else { -down * d }).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct FeasibleSet<'a> {
    pub anchor: &'a [f64],
    pub cost_up: &'a [f64],
    pub cost_down: &'a [f64],
    pub budget: f64,
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

const PSI_TOL: f64 = 1e-10;
const BRACKET_TOL: f64 = 1e-14;

impl FeasibleSet<'_> {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let k = self.anchor.len();
        for len in [self.cost_up.len(), self.cost_down.len(), self.lower.len(), self.upper.len()] {
            if len != k {
                return Err(OptimizeError::Length { expected: k, got: len });
            }
        }
        if !(self.budget >= 0.0) {
            return Err(OptimizeError::InvalidConfig(format!("budget {} must be >= 0", self.budget)));
        }
        for t in 0..k {
            if self.lower[t] > self.upper[t] {
                return Err(OptimizeError::InfeasibleBounds {
                    treatment: t,
                    lower: self.lower[t],
                    upper: self.upper[t],
                });
            }
            if !(self.lower[t]..=self.upper[t]).contains(&self.anchor[t]) {
                return Err(OptimizeError::AnchorOutsideBounds { treatment: t, value: self.anchor[t] });
            }
            if self.cost_up[t] < 0.0 || self.cost_down[t] < 0.0 {
                return Err(OptimizeError::InvalidConfig("treatment costs must be nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn spent(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x.iter().zip(self.anchor).map(|(a, b)| a - b).collect();
        cost(&z, self.cost_up, self.cost_down)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.spent(x) <= self.budget + tol
            && x.iter().zip(self.lower.iter().zip(self.upper)).all(|(v, (l, u))| *l - tol <= *v && *v <= *u + tol)
    }

    /// Box-clipped soft-threshold of `v` toward the anchor with multiplier `theta`.
    fn shrink(&self, v: &[f64], theta: f64) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(t, &vt)| {
                let a = self.anchor[t];
                let d = vt - a;
                let moved = if d > 0.0 {
                    a + (d - theta * self.cost_up[t]).max(0.0)
                } else {
                    a + (d + theta * self.cost_down[t]).min(0.0)
                };
                moved.clamp(self.lower[t], self.upper[t])
            })
            .collect()
    }

    /// Euclidean projection of `v`.
    ///
    /// The box clip is returned when it already fits the budget. Otherwise the
    /// multiplier of the weighted-ℓ1 constraint is found by bisection; the
    /// returned point is always on the feasible side of the bracket.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, OptimizeError> {
        self.validate()?;
        if v.len() != self.anchor.len() {
            return Err(OptimizeError::Length { expected: self.anchor.len(), got: v.len() });
        }
        let clipped = self.shrink(v, 0.0);
        if self.spent(&clipped) <= self.budget {
            return Ok(clipped);
        }
        // Every coordinate with a positive cost in its direction sits on the anchor at `hi`.
        let mut hi: f64 = 0.0;
        for (t, &vt) in v.iter().enumerate() {
            let d = vt - self.anchor[t];
            let c = if d > 0.0 { self.cost_up[t] } else { self.cost_down[t] };
            if c > 0.0 {
                hi = hi.max(d.abs() / c);
            }
        }
        let mut lo = 0.0;
        let mut best = self.shrink(v, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let x = self.shrink(v, mid);
            let psi = self.spent(&x);
            if psi > self.budget {
                lo = mid;
            } else {
                hi = mid;
                best = x;
                if self.budget - psi <= PSI_TOL {
                    break;
                }
            }
            if hi - lo < BRACKET_TOL {
                break;
            }
        }
        Ok(best)
    }
}

/// Free-function form of [`FeasibleSet::project`].
pub fn project(
    x: &[f64],
    x_bar: &[f64],
    c_up: &[f64],
    c_down: &[f64],
    budget: f64,
    lower: &[f64],
    upper: &[f64],
) -> Result<Vec<f64>, OptimizeError> {
    FeasibleSet { anchor: x_bar, cost_up: c_up, cost_down: c_down, budget, lower, upper }.project(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_examples() {
        assert_eq!(cost(&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]), 0.0);
        assert_eq!(cost(&[1.0, -2.0], &[1.0, 1.0], &[2.0, 2.0]), 5.0);
        assert_eq!(cost(&[0.3], &[0.0], &[5.0]), 0.0);
    }

    #[test]
    fn feasible_point_is_unchanged() {
        let x = [0.45, 0.52];
        let p = project(&x, &[0.5, 0.5], &[1.0, 1.0], &[1.0, 1.0], 0.2, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(p, x.to_vec());
    }

    #[test]
    fn zero_budget_returns_anchor() {
        let bar = [0.3, 0.7, 0.1];
        let p = project(&[0.9, 0.0, 0.5], &bar, &[1.0; 3], &[2.0; 3], 0.0, &[0.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(p, bar.to_vec());
    }

    #[test]
    fn free_direction_is_never_shrunk() {
        // Increasing treatment 0 is free; the budget binds on treatment 1 only.
        let p = project(&[0.9, 0.9], &[0.2, 0.2], &[0.0, 1.0], &[1.0, 1.0], 0.3, &[0.0; 2], &[1.0; 2]).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn inverted_bounds_rejected() {
        let r = project(&[0.5], &[0.5], &[1.0], &[1.0], 1.0, &[0.6], &[0.4]);
        assert!(matches!(r, Err(OptimizeError::InfeasibleBounds { treatment: 0, .. })));
    }

    #[test]
    fn budget_is_tight_after_projection() {
        let set = FeasibleSet {
            anchor: &[0.5, 0.5, 0.5],
            cost_up: &[1.0, 2.0, 0.5],
            cost_down: &[3.0, 1.0, 1.0],
            budget: 0.4,
            lower: &[0.0; 3],
            upper: &[1.0; 3],
        };
        let p = set.project(&[1.0, 0.0, 0.9]).unwrap();
        let spent = set.spent(&p);
        assert!(spent <= 0.4 && spent > 0.4 - 1e-9, "{spent}");
    }
}
