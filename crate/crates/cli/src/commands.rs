use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use causal_ic::data::{load_dataset, normalize, split_half, Dataset};
use causal_ic::eval::{run_experiment, train_models, ExperimentConfig};
use causal_ic::invclass::{optimize, Instance, OptimizationConfig, Variant};
use causal_ic::seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{self, Manifest, ModelFiles, MANIFEST_FORMAT};
use crate::config::{self, FileBlocks, TrainingFlags};

/// Loads and min-max normalizes the table named by `--data`/`--schema`.
pub fn load(data: &Path, schema: &Path) -> Result<Dataset> {
    Ok(normalize(&load_dataset(data, schema)?))
}

pub struct TrainArgs<'a> {
    pub data: &'a Path,
    pub schema: &'a Path,
    pub out: &'a Path,
    pub seed: u64,
    pub training: &'a TrainingFlags,
}

pub fn train(args: TrainArgs) -> Result<Manifest> {
    let ds = load(args.data, args.schema)?;
    let blocks = FileBlocks::read(args.schema)?;
    let training = config::training_config(&blocks.training, args.training);
    // Same seed derivation as the evaluation protocol, so the halves agree.
    let split_seed = seed::derive(args.seed, "split");
    let training_seed = seed::derive(args.seed, "opt");
    let (opt_half, val_half) = split_half(&ds, split_seed)?;
    let models = train_models(&opt_half, true, true, &training, training_seed).context("training failed")?;
    let summary = models.summary();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        seed: args.seed,
        split_seed,
        training_seed,
        n_rows: ds.n(),
        feature_names: ds.schema.feature_names.clone(),
        treatment_names: ds.schema.treatment_names(),
        norm_params: ds.norm_params.clone().unwrap_or_default(),
        optimization_rows: opt_half.row_ids.clone(),
        validation_rows: val_half.row_ids.clone(),
        training,
        classifier: summary.plain,
        weighted_classifier: summary.weighted,
        gp_kernels: summary.gp_kernels,
        models: ModelFiles::default(),
    };
    artifacts::save(args.out, &manifest, &models)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowSelector {
    Validation,
    Optimization,
    All,
    Rows(Vec<usize>),
}

impl std::str::FromStr for RowSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "validation" | "val" => Ok(RowSelector::Validation),
            "optimization" | "opt" => Ok(RowSelector::Optimization),
            "all" => Ok(RowSelector::All),
            list => config::parse_list(list).map(RowSelector::Rows).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TreatmentChange {
    pub name: String,
    pub original: f64,
    pub optimized: f64,
    pub delta: f64,
    pub aps: f64,
    pub original_raw: f64,
    pub optimized_raw: f64,
}

#[derive(Debug, Serialize)]
pub struct PolicyRecord {
    pub row: usize,
    pub variant: Variant,
    pub budget: f64,
    pub lambda: f64,
    pub cost_spent: f64,
    pub iterations: usize,
    pub objective_start: f64,
    pub objective_best: f64,
    pub treatments: Vec<TreatmentChange>,
}

pub struct OptimizeArgs<'a> {
    pub data: &'a Path,
    pub schema: &'a Path,
    pub models: &'a Path,
    pub rows: RowSelector,
    pub budget: Option<f64>,
    pub lambda: Option<f64>,
    pub variant: Option<Variant>,
    pub step: Option<f64>,
    pub max_iters: Option<usize>,
}

/// Returns the records of every instance that completed, plus the failures.
pub fn optimize_rows(args: OptimizeArgs) -> Result<(Vec<PolicyRecord>, Vec<(usize, String)>)> {
    let ds = load(args.data, args.schema)?;
    let manifest = artifacts::load_manifest(args.models)?;
    if ds.n() != manifest.n_rows
        || ds.schema.feature_names != manifest.feature_names
        || ds.norm_params.as_deref() != Some(&manifest.norm_params[..])
    {
        bail!("the data does not match the trained artifacts in {}", args.models.display());
    }
    let models = artifacts::load_models(args.models, &manifest, &ds.schema)?;
    let blocks = FileBlocks::read(args.schema)?;
    let base = config::optimizer_config(&blocks.optimization, args.step, args.max_iters);
    let cfg = OptimizationConfig {
        budget: args.budget.unwrap_or(base.budget),
        lambda: args.lambda.unwrap_or(base.lambda),
        variant: args.variant.unwrap_or(base.variant),
        ..base
    };
    cfg.validate()?;
    let rows = match args.rows {
        RowSelector::Validation => manifest.validation_rows.clone(),
        RowSelector::Optimization => manifest.optimization_rows.clone(),
        RowSelector::All => (0..ds.n()).collect(),
        RowSelector::Rows(r) => r,
    };
    if let Some(bad) = rows.iter().find(|&&r| r >= ds.n()) {
        bail!("row {bad} is out of range (the data has {} rows)", ds.n());
    }
    let model = models.for_variant(cfg.variant).expect("both models are loaded");
    let names = ds.schema.treatment_names();
    let norm = &manifest.norm_params;
    let outcomes: Vec<Result<PolicyRecord, (usize, String)>> = rows
        .par_iter()
        .map(|&row| {
            let inst = Instance { controls: ds.controls(row), treatments: ds.treatments(row) };
            let res = optimize(&inst, model, &models.gps, &ds.schema, &cfg).map_err(|e| (row, e.to_string()))?;
            let treatments = names
                .iter()
                .enumerate()
                .map(|(t, name)| {
                    let col = ds.schema.treatment_idx[t];
                    let (orig, opt) = (inst.treatments[t], res.x_t_star[t]);
                    TreatmentChange {
                        name: name.clone(),
                        original: orig,
                        optimized: opt,
                        delta: opt - orig,
                        aps: res.aps_star.density[t],
                        original_raw: norm[col].unscale(orig),
                        optimized_raw: norm[col].unscale(opt),
                    }
                })
                .collect();
            Ok(PolicyRecord {
                row,
                variant: cfg.variant,
                budget: cfg.budget,
                lambda: if cfg.variant == Variant::G { cfg.lambda } else { 0.0 },
                cost_spent: res.cost_spent + 0.0,
                iterations: res.iterations_used,
                objective_start: res.objective_trace[0],
                objective_best: res.best_objective(),
                treatments,
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    Ok((records, failures))
}

pub struct EvaluateArgs<'a> {
    pub data: &'a Path,
    pub schema: &'a Path,
    pub seed: u64,
    pub budgets: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub variants: Option<Vec<Variant>>,
    pub step: Option<f64>,
    pub max_iters: Option<usize>,
    pub training: &'a TrainingFlags,
}

pub fn experiment_config(args: &EvaluateArgs, blocks: &FileBlocks) -> ExperimentConfig {
    let d = ExperimentConfig::default();
    let sweep = &blocks.sweep;
    ExperimentConfig {
        budgets: args.budgets.clone().or_else(|| sweep.budgets.clone()).unwrap_or(d.budgets),
        lambdas: args.lambdas.clone().or_else(|| sweep.lambdas.clone()).unwrap_or(d.lambdas),
        variants: args.variants.clone().or_else(|| sweep.variants.clone()).unwrap_or(d.variants),
        seed: args.seed,
        training: config::training_config(&blocks.training, args.training),
        optimizer: config::optimizer_config(&blocks.optimization, args.step, args.max_iters),
        frequency_threshold: sweep.frequency_threshold.unwrap_or(d.frequency_threshold),
    }
}

/// Runs the sweep and writes `report.json` and `sweep.csv`; returns the number of failed instances.
pub fn evaluate(args: EvaluateArgs, out: &Path) -> Result<usize> {
    let blocks = FileBlocks::read(args.schema)?;
    let cfg = experiment_config(&args, &blocks);
    if cfg.budgets.is_empty()
        || cfg.variants.is_empty()
        || (cfg.variants.contains(&Variant::G) && cfg.lambdas.is_empty())
    {
        bail!("empty sweep: budgets, variants and (for g) lambdas must be nonempty");
    }
    let ds = load(args.data, args.schema)?;
    let report = run_experiment(&ds, &cfg)?;
    artifacts::write_json(&out.join("report.json"), &report)?;
    let csv_path: PathBuf = out.join("sweep.csv");
    std::fs::write(&csv_path, report.to_csv()).with_context(|| format!("writing {}", csv_path.display()))?;
    Ok(report.cells.iter().map(|c| c.failures.len()).sum())
}
