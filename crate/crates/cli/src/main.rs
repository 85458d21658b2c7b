//! `causal-ic`: train models, optimize treatment policies and run budget sweeps.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use causal_ic::data::DataError;
use causal_ic::eval::EvalError;
use causal_ic::invclass::Variant;
use clap::{Args, Parser, Subcommand};

use commands::RowSelector;
use config::TrainingFlags;

#[derive(Parser)]
#[command(name = "causal-ic", version, about = "Causal inverse classification with GP propensity weighting")]
struct Cli {
    /// Worker threads for the parallel parts (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// CSV table with a header row.
    #[arg(long)]
    data: PathBuf,
    /// JSON schema listing column roles, costs and bounds.
    #[arg(long)]
    schema: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "CAUSAL_IC_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Fit GPs, the indirect estimator and both classifiers on the optimization half.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        training: TrainingFlags,
    },
    /// Optimize treatment policies with previously trained models.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Directory holding manifest.json (defaults to --out).
        #[arg(long)]
        models: Option<PathBuf>,
        /// validation, optimization, all, or a comma-separated list of row numbers.
        #[arg(long, default_value = "validation")]
        rows: RowSelector,
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Run the full split/train/optimize/score protocol over a sweep.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated budgets.
        #[arg(long)]
        budget: Option<String>,
        /// Comma-separated λ values, used by g only.
        #[arg(long)]
        lambda: Option<String>,
        /// Comma-separated variants: f, f-prime-no-opt, f-prime-opt, g.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[command(flatten)]
        training: TrainingFlags,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Train { common, training } => {
            let m = commands::train(commands::TrainArgs {
                data: &common.data,
                schema: &common.schema,
                out: &common.out,
                seed: common.seed,
                training: &training,
            })?;
            let arch = |meta: &Option<causal_ic::model::TrainingMeta>| {
                meta.as_ref()
                    .map(|m| format!("{:?} (cv log-loss {:.4})", m.selected_hidden, m.cv_loss))
                    .unwrap_or_default()
            };
            println!("f:  {}", arch(&m.classifier));
            println!("f': {}", arch(&m.weighted_classifier));
            println!("wrote {}", artifacts::manifest_path(&common.out).display());
            Ok(())
        }
        Command::Optimize { common, models, rows, budget, lambda, variant, step, max_iters } => {
            let models = models.unwrap_or_else(|| common.out.clone());
            let (records, failures) = commands::optimize_rows(commands::OptimizeArgs {
                data: &common.data,
                schema: &common.schema,
                models: &models,
                rows,
                budget,
                lambda,
                variant,
                step,
                max_iters,
            })?;
            artifacts::write_json(&common.out.join("policies.json"), &records)?;
            println!("{}", serde_json::to_string_pretty(&records)?);
            for (row, msg) in &failures {
                eprintln!("row {row}: {msg}");
            }
            if !failures.is_empty() {
                bail!("{} of {} instances failed", failures.len(), failures.len() + records.len());
            }
            Ok(())
        }
        Command::Evaluate { common, budget, lambda, variant, step, max_iters, training } => {
            let budgets = budget.as_deref().map(config::parse_list).transpose()?;
            let lambdas = lambda.as_deref().map(config::parse_list).transpose()?;
            let variants = variant.as_deref().map(config::parse_list).transpose()?;
            let failed = commands::evaluate(
                commands::EvaluateArgs {
                    data: &common.data,
                    schema: &common.schema,
                    seed: common.seed,
                    budgets,
                    lambdas,
                    variants,
                    step,
                    max_iters,
                    training: &training,
                },
                &common.out,
            )?;
            println!(
                "wrote {} and {}",
                common.out.join("report.json").display(),
                common.out.join("sweep.csv").display()
            );
            if failed > 0 {
                bail!("{failed} instance optimizations failed; see report.json");
            }
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let schema_missing = err.chain().any(|e| {
        matches!(e.downcast_ref::<DataError>(), Some(DataError::SchemaNotFound(_)))
            || matches!(e.downcast_ref::<EvalError>(), Some(EvalError::Data(DataError::SchemaNotFound(_))))
    });
    if schema_missing {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
