//! Budget-constrained inverse classification by projected gradient descent.

mod optimize;
mod project;

pub use optimize::{
    objective_gradient, objective_value, optimize, optimize_observed, Instance, OptimizationConfig, PolicyResult,
    Variant,
};
pub use project::{cost, project, FeasibleSet};

use thiserror::Error;

use crate::gp::GpError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("treatment {treatment}: lower bound {lower} exceeds upper bound {upper}")]
    InfeasibleBounds { treatment: usize, lower: f64, upper: f64 },
    #[error("treatment {treatment}: starting value {value} lies outside its bounds")]
    AnchorOutsideBounds { treatment: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid optimization config: {0}")]
    InvalidConfig(String),
    #[error("variant {variant} needs a {needed} classifier")]
    VariantMismatch { variant: Variant, needed: &'static str },
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gp(#[from] GpError),
}
