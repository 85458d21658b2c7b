//! Run configuration: command-line flags layered over the optional
//! `optimization`, `sweep` and `training` blocks of the schema file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use causal_ic::eval::TrainingConfig;
use causal_ic::invclass::{OptimizationConfig, Variant};
use causal_ic::model::IndirectInput;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
pub struct FileBlocks {
    #[serde(default)]
    pub optimization: OptimizationBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub training: TrainingBlock,
}

#[derive(Debug, Default, Deserialize)]
pub struct OptimizationBlock {
    pub budget: Option<f64>,
    pub step: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub lambda: Option<f64>,
    pub variant: Option<Variant>,
}

#[derive(Debug, Default, Deserialize)]
pub struct SweepBlock {
    pub budgets: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub variants: Option<Vec<Variant>>,
    pub frequency_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
pub struct TrainingBlock {
    pub folds: Option<usize>,
    pub arch_grid: Option<Vec<Vec<usize>>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub gp_restarts: Option<usize>,
    pub gp_max_iters: Option<usize>,
    pub indirect_input: Option<IndirectInput>,
}

impl FileBlocks {
    /// Reads the extra blocks; a missing schema file is left for the loader to report.
    pub fn read(path: &Path) -> Result<Self> {
        let Ok(text) = std::fs::read_to_string(path) else {
            return Ok(FileBlocks::default());
        };
        serde_json::from_str(&text).with_context(|| format!("reading configuration blocks from {}", path.display()))
    }
}

/// Training overrides given on the command line.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct TrainingFlags {
    /// Cross-validation folds for classifier selection.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Random restarts for each GP hyperparameter search.
    #[arg(long)]
    pub gp_restarts: Option<usize>,
    #[arg(long)]
    pub gp_iters: Option<usize>,
    /// Whether the indirect estimator sees raw or APS-weighted treatments.
    #[arg(long, value_parser = parse_indirect_input)]
    pub indirect_input: Option<IndirectInput>,
}

fn parse_indirect_input(s: &str) -> Result<IndirectInput, String> {
    match s {
        "raw" => Ok(IndirectInput::Raw),
        "weighted" => Ok(IndirectInput::Weighted),
        _ => Err(format!("expected raw or weighted, got {s:?}")),
    }
}

pub fn training_config(file: &TrainingBlock, flags: &TrainingFlags) -> TrainingConfig {
    let mut cfg = TrainingConfig::default();
    let c = &mut cfg.classifier;
    c.folds = flags.folds.or(file.folds).unwrap_or(c.folds);
    if let Some(grid) = &file.arch_grid {
        c.arch_grid = grid.clone();
    }
    let epochs = flags.epochs.or(file.epochs);
    let batch = flags.batch_size.or(file.batch_size);
    let lr = flags.learning_rate.or(file.learning_rate);
    for t in [&mut cfg.classifier.train, &mut cfg.indirect] {
        t.epochs = epochs.unwrap_or(t.epochs);
        t.batch_size = batch.unwrap_or(t.batch_size);
        t.learning_rate = lr.unwrap_or(t.learning_rate);
    }
    cfg.gp_restarts = flags.gp_restarts.or(file.gp_restarts).unwrap_or(cfg.gp_restarts);
    cfg.gp_max_iters = flags.gp_iters.or(file.gp_max_iters).unwrap_or(cfg.gp_max_iters);
    cfg.indirect_input = flags.indirect_input.or(file.indirect_input).unwrap_or(cfg.indirect_input);
    cfg
}

/// Optimizer settings; `budget`, `lambda` and `variant` are filled per call.
pub fn optimizer_config(file: &OptimizationBlock, step: Option<f64>, max_iters: Option<usize>) -> OptimizationConfig {
    let d = OptimizationConfig::default();
    OptimizationConfig {
        budget: file.budget.unwrap_or(d.budget),
        step: step.or(file.step).unwrap_or(d.step),
        max_iters: max_iters.or(file.max_iters).unwrap_or(d.max_iters),
        tol: file.tol.unwrap_or(d.tol),
        lambda: file.lambda.unwrap_or(d.lambda),
        variant: file.variant.unwrap_or(d.variant),
    }
}

/// Comma-separated list; the empty string is the empty list.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|item| match item.trim().parse() {
            Ok(v) => Ok(v),
            Err(e) => bail!("invalid list item {item:?}: {e}"),
        })
        .collect()
}
