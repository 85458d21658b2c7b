use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{self, log_loss, Mlp, OutputActivation, TrainConfig};
use super::ModelError;
use crate::data::Dataset;
use crate::gp::{weight_treatments, GpSet};
use crate::seed;

/// Hidden-layer candidates searched by cross-validation.
pub fn default_arch_grid() -> Vec<Vec<usize>> {
    vec![vec![16], vec![32], vec![16, 16], vec![32, 16]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub folds: usize,
    pub arch_grid: Vec<Vec<usize>>,
    pub train: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { folds: 5, arch_grid: default_arch_grid(), train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchScore {
    pub hidden: Vec<usize>,
    pub cv_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub selected_hidden: Vec<usize>,
    pub cv_loss: f64,
    pub candidates: Vec<ArchScore>,
    pub folds: usize,
    pub seed: u64,
}

/// Binary classifier producing P(y = 1). When `weighted`, its treatment
/// inputs are expected as APS-weighted values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    pub net: Mlp,
    pub weighted: bool,
    pub meta: Option<TrainingMeta>,
}

impl MlpClassifier {
    pub fn from_net(net: Mlp, weighted: bool) -> Self {
        MlpClassifier { net, weighted, meta: None }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.net.forward(features)[0]
    }
}

/// Feature rows as the classifier sees them: treatments replaced by Φ ⊙ x_T when weighting.
pub fn classifier_inputs(ds: &Dataset, gps: Option<&GpSet>) -> Result<Vec<Vec<f64>>, ModelError> {
    (0..ds.n())
        .map(|i| {
            let mut row = ds.x[i].clone();
            if let Some(gps) = gps {
                let x_t = ds.treatments(i);
                let aps = gps.aps(&ds.controls(i), &x_t)?;
                let w = weight_treatments(&x_t, &aps.density)?;
                for (&j, v) in ds.schema.treatment_idx.iter().zip(w) {
                    row[j] = v;
                }
            }
            Ok(row)
        })
        .collect()
}

/// Selects the architecture with the lowest mean CV log-loss, then retrains it on every row.
pub fn train_classifier(
    ds: &Dataset,
    weighted: bool,
    gps: Option<&GpSet>,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<MlpClassifier, ModelError> {
    if cfg.arch_grid.is_empty() {
        return Err(ModelError::EmptyArchGrid);
    }
    let n = ds.n();
    if cfg.folds < 2 || cfg.folds > n {
        return Err(ModelError::InvalidFolds { folds: cfg.folds, n });
    }
    let gps = match (weighted, gps) {
        (true, Some(g)) if g.len() == ds.schema.n_treatments() => Some(g),
        (true, _) => return Err(ModelError::MissingGps),
        (false, _) => None,
    };
    let inputs = classifier_inputs(ds, gps)?;
    let targets: Vec<Vec<f64>> = ds.y.iter().map(|&y| vec![f64::from(y)]).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, "cv-folds")));
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % cfg.folds;
    }

    let jobs: Vec<(usize, usize)> =
        (0..cfg.arch_grid.len()).flat_map(|a| (0..cfg.folds).map(move |k| (a, k))).collect();
    let fold_losses: Vec<f64> = jobs
        .par_iter()
        .map(|&(a, k)| {
            let (train_x, train_y): (Vec<_>, Vec<_>) =
                (0..n).filter(|&i| fold_of[i] != k).map(|i| (inputs[i].clone(), targets[i].clone())).unzip();
            let net = mlp::train(
                dims(ds.p(), &cfg.arch_grid[a]),
                OutputActivation::Sigmoid,
                &train_x,
                &train_y,
                &cfg.train,
                seed::derive_indexed(seed, "cv-train", (a * cfg.folds + k) as u64),
            );
            (0..n)
                .filter(|&i| fold_of[i] == k)
                .map(|i| log_loss(net.forward(&inputs[i])[0], targets[i][0]))
                .sum::<f64>()
        })
        .collect();

    let candidates: Vec<ArchScore> = cfg
        .arch_grid
        .iter()
        .enumerate()
        .map(|(a, hidden)| ArchScore {
            hidden: hidden.clone(),
            cv_loss: fold_losses[a * cfg.folds..(a + 1) * cfg.folds].iter().sum::<f64>() / n as f64,
        })
        .collect();
    let best =
        candidates.iter().enumerate().min_by(|a, b| a.1.cv_loss.total_cmp(&b.1.cv_loss)).map(|(i, _)| i).unwrap();

    let net = mlp::train(
        dims(ds.p(), &cfg.arch_grid[best]),
        OutputActivation::Sigmoid,
        &inputs,
        &targets,
        &cfg.train,
        seed::derive(seed, "final"),
    );
    Ok(MlpClassifier {
        net,
        weighted,
        meta: Some(TrainingMeta {
            selected_hidden: cfg.arch_grid[best].clone(),
            cv_loss: candidates[best].cv_loss,
            candidates,
            folds: cfg.folds,
            seed,
        }),
    })
}

fn dims(p: usize, hidden: &[usize]) -> Vec<usize> {
    let mut d = vec![p];
    d.extend_from_slice(hidden);
    d.push(1);
    d
}
