//! Evaluation: iFEE, filtered APS averages, treatment frequencies and the
//! sweep over variants, budgets and regularizer values.

mod experiment;
mod metrics;

pub use experiment::{
    run_experiment, train_models, CellReport, ExperimentConfig, ExperimentReport, FailedInstance, ModelSummary,
    TrainedModels, TrainingConfig,
};
pub use metrics::{average_aps, ifee, treatment_frequency};

use thiserror::Error;

use crate::data::DataError;
use crate::gp::GpError;
use crate::invclass::{OptimizeError, Variant};
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("empty sweep: budgets, variants (and lambdas for g) must be nonempty")]
    EmptySweep,
    #[error("the schema has no treatment features")]
    NoTreatments,
    #[error("dataset must be normalized before running the protocol")]
    NotNormalized,
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("every instance failed for {variant} at B={budget}, lambda={lambda}: {first}")]
    AllFailed { variant: Variant, budget: f64, lambda: f64, first: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}
