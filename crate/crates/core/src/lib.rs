//! Causal inverse classification.
//!
//! Classifiers are trained with treatment inputs weighted by a Gaussian-process
//! approximate propensity score (APS), and per-instance treatment policies are
//! found by projected gradient descent under an asymmetric-cost budget and box
//! bounds. Policies are scored by their estimated future effect under an
//! independently trained validation model.

pub mod data;
pub mod eval;
pub mod gp;
pub mod invclass;
pub mod model;
pub mod seed;
pub mod student;
