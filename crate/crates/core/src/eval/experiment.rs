//! Two-model evaluation protocol.
//!
//! The normalized data is split in half. Models trained on the first half
//! drive the optimization of every instance in the second half; models trained
//! on the second half (which has seen those very instances) score the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{average_aps, ifee, treatment_frequency};
use super::EvalError;
use crate::data::{split_half, Dataset};
use crate::gp::{GpSet, HyperSearch, KernelConfig};
use crate::invclass::{optimize, Instance, OptimizationConfig, PolicyResult, Variant};
use crate::model::{
    train_classifier, train_indirect, train_indirect_with, CausalModel, ClassifierConfig, IndirectEstimator,
    IndirectInput, TrainConfig, TrainingMeta,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub classifier: ClassifierConfig,
    pub indirect: TrainConfig,
    pub kernel: KernelConfig,
    pub gp_restarts: usize,
    pub gp_max_iters: usize,
    pub indirect_input: IndirectInput,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            classifier: ClassifierConfig::default(),
            indirect: TrainConfig::default(),
            kernel: KernelConfig::default(),
            gp_restarts: 5,
            gp_max_iters: 30,
            indirect_input: IndirectInput::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub budgets: Vec<f64>,
    /// Regularizer values; applied to the `g` variant only, the others run at λ = 0.
    pub lambdas: Vec<f64>,
    pub variants: Vec<Variant>,
    pub seed: u64,
    pub training: TrainingConfig,
    /// Step, iteration and tolerance settings; budget, λ and variant come from the sweep.
    pub optimizer: OptimizationConfig,
    pub frequency_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            budgets: (1..=10).map(f64::from).collect(),
            lambdas: vec![1.0],
            variants: Variant::ALL.to_vec(),
            seed: 0,
            training: TrainingConfig::default(),
            optimizer: OptimizationConfig::default(),
            frequency_threshold: 1e-3,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.budgets.is_empty() || self.variants.is_empty() {
            return Err(EvalError::EmptySweep);
        }
        if self.variants.contains(&Variant::G) && self.lambdas.is_empty() {
            return Err(EvalError::EmptySweep);
        }
        for cell in self.cells() {
            let cfg = OptimizationConfig { budget: cell.0, lambda: cell.2, variant: cell.1, ..self.optimizer };
            cfg.validate()?;
        }
        Ok(())
    }

    /// `(budget, variant, λ)` for every sweep cell, variant-major.
    pub fn cells(&self) -> Vec<(f64, Variant, f64)> {
        let mut out = Vec::new();
        for &v in &self.variants {
            let lambdas: &[f64] = if v == Variant::G { &self.lambdas } else { &[0.0] };
            for &lambda in lambdas {
                for &b in &self.budgets {
                    out.push((b, v, lambda));
                }
            }
        }
        out
    }
}

/// Everything learned from one half of the data.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub gps: GpSet,
    /// Unweighted `f` with `H`.
    pub plain: Option<CausalModel>,
    /// APS-weighted `f′` with `H`.
    pub weighted: Option<CausalModel>,
}

impl TrainedModels {
    pub fn for_variant(&self, v: Variant) -> Option<&CausalModel> {
        if v.weighted() {
            self.weighted.as_ref()
        } else {
            self.plain.as_ref()
        }
    }

    pub fn summary(&self) -> ModelSummary {
        let meta = |m: &Option<CausalModel>| m.as_ref().and_then(|m| m.classifier.meta.clone());
        ModelSummary {
            plain: meta(&self.plain),
            weighted: meta(&self.weighted),
            gp_kernels: self.gps.gps.iter().map(|g| *g.kernel()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub plain: Option<TrainingMeta>,
    pub weighted: Option<TrainingMeta>,
    pub gp_kernels: Vec<KernelConfig>,
}

/// Fits the GPs, `H`, and whichever of `f` / `f′` is requested on `ds`.
pub fn train_models(
    ds: &Dataset,
    need_plain: bool,
    need_weighted: bool,
    cfg: &TrainingConfig,
    seed: u64,
) -> Result<TrainedModels, EvalError> {
    let gps = GpSet::fit(
        ds,
        cfg.kernel,
        HyperSearch::Optimize {
            restarts: cfg.gp_restarts,
            max_iters: cfg.gp_max_iters,
            seed: seed::derive(seed, "gp"),
        },
    )?;
    let has_indirect = !ds.schema.indirect_idx.is_empty();
    let raw_h = if has_indirect {
        train_indirect(ds, &cfg.indirect, seed::derive(seed, "h"))?
    } else {
        IndirectEstimator::PassThrough
    };
    let plain = if need_plain {
        let f = train_classifier(ds, false, None, &cfg.classifier, seed::derive(seed, "f"))?;
        Some(CausalModel::new(f, raw_h.clone(), IndirectInput::Raw, &ds.schema)?)
    } else {
        None
    };
    let weighted = if need_weighted {
        let f = train_classifier(ds, true, Some(&gps), &cfg.classifier, seed::derive(seed, "f-prime"))?;
        let h = match cfg.indirect_input {
            IndirectInput::Weighted if has_indirect => {
                train_indirect_with(ds, Some(&gps), &cfg.indirect, seed::derive(seed, "h-weighted"))?
            }
            _ => raw_h,
        };
        Some(CausalModel::new(f, h, cfg.indirect_input, &ds.schema)?)
    } else {
        None
    };
    Ok(TrainedModels { gps, plain, weighted })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedInstance {
    pub row_id: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub variant: Variant,
    pub budget: f64,
    pub lambda: f64,
    pub avg_ifee: f64,
    /// 3σ-filtered mean APS of the optimized policies.
    pub avg_aps: f64,
    pub aps_kept: usize,
    pub n_optimized: usize,
    pub failures: Vec<FailedInstance>,
    /// Per treatment, instances whose value moved by more than the frequency threshold.
    pub frequency: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub treatment_names: Vec<String>,
    pub opt_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
    pub opt_models: ModelSummary,
    pub val_models: ModelSummary,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, variant: Variant, budget: f64, lambda: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.variant == variant && c.budget == budget && (variant != Variant::G || c.lambda == lambda))
    }

    /// Tidy long-format rows: `variant,budget,lambda,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,budget,lambda,metric,value\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},ifee,{}\n", c.variant, c.budget, c.lambda, c.avg_ifee));
            out.push_str(&format!("{},{},{},aps,{}\n", c.variant, c.budget, c.lambda, c.avg_aps));
        }
        out
    }
}

/// Runs the full protocol on a normalized dataset.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport, EvalError> {
    cfg.validate()?;
    if ds.schema.n_treatments() == 0 {
        return Err(EvalError::NoTreatments);
    }
    if ds.norm_params.is_none() {
        return Err(EvalError::NotNormalized);
    }
    let (opt_half, val_half) = split_half(ds, seed::derive(cfg.seed, "split"))?;
    let need_plain = cfg.variants.contains(&Variant::NonCausalF);
    let need_weighted = cfg.variants.iter().any(|v| v.weighted());
    let opt = train_models(&opt_half, need_plain, need_weighted, &cfg.training, seed::derive(cfg.seed, "opt"))?;
    let val = train_models(&val_half, need_plain, need_weighted, &cfg.training, seed::derive(cfg.seed, "val"))?;

    let instances: Vec<Instance> = (0..val_half.n())
        .map(|i| Instance { controls: val_half.controls(i), treatments: val_half.treatments(i) })
        .collect();
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..instances.len()).map(move |i| (c, i))).collect();
    let outcomes: Vec<Result<(PolicyResult, f64), String>> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let (budget, variant, lambda) = cells[c];
            let run_cfg = OptimizationConfig { budget, lambda, variant, ..cfg.optimizer };
            let inst = &instances[i];
            let opt_model = opt.for_variant(variant).expect("trained for every requested variant");
            let val_model = val.for_variant(variant).expect("trained for every requested variant");
            let policy = optimize(inst, opt_model, &opt.gps, &opt_half.schema, &run_cfg).map_err(|e| e.to_string())?;
            let effect = ifee(val_model, &val.gps, &inst.controls, &inst.treatments, &policy.x_t_star)
                .map_err(|e| e.to_string())?;
            Ok((policy, effect))
        })
        .collect();

    let mut reports = Vec::with_capacity(cells.len());
    for (c, chunk) in outcomes.chunks(instances.len()).enumerate() {
        let (budget, variant, lambda) = cells[c];
        let mut policies = Vec::new();
        let mut effects = Vec::new();
        let mut bars = Vec::new();
        let mut failures = Vec::new();
        for (i, outcome) in chunk.iter().enumerate() {
            match outcome {
                Ok((p, e)) => {
                    policies.push(p.clone());
                    effects.push(*e);
                    bars.push(instances[i].treatments.clone());
                }
                Err(message) => failures.push(FailedInstance { row_id: val_half.row_ids[i], message: message.clone() }),
            }
        }
        if policies.is_empty() {
            return Err(EvalError::AllFailed { variant, budget, lambda, first: failures[0].message.clone() });
        }
        let (avg_aps, aps_kept) = average_aps(&policies)?;
        reports.push(CellReport {
            variant,
            budget,
            lambda,
            avg_ifee: effects.iter().sum::<f64>() / effects.len() as f64,
            avg_aps,
            aps_kept,
            n_optimized: policies.len(),
            frequency: treatment_frequency(&policies, &bars, cfg.frequency_threshold)?,
            failures,
        });
    }

    Ok(ExperimentReport {
        seed: cfg.seed,
        config: cfg.clone(),
        treatment_names: ds.schema.treatment_names(),
        opt_rows: opt_half.row_ids.clone(),
        val_rows: val_half.row_ids.clone(),
        opt_models: opt.summary(),
        val_models: val.summary(),
        cells: reports,
    })
}
