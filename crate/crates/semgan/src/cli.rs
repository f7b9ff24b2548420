//! Command-line interface.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::Overrides;
use crate::error::{Error, Result};
use crate::experiment::{cmd_compare, cmd_dataset, cmd_eval, cmd_grid, cmd_train, EvalInputs, DEFAULT_GRID};
use crate::report::EVAL_CSV;

#[derive(Debug, Parser)]
#[command(name = "semgan", version = crate::experiment::version(), about = "Train and evaluate semantic and RGB GANs on label-map datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite this command's artifacts in a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the Colored Shapes dataset as label PNGs.
    Dataset,
    /// Train one model, checkpointing every `eval_every` steps.
    Train,
    /// Evaluate a checkpoint over the whole dataset and append an eval.csv row.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// External features of the real images (replaces the random-conv extractor).
        #[arg(long)]
        real_features: Option<PathBuf>,
        /// External features of the generated samples, in sample order.
        #[arg(long)]
        fake_features: Option<PathBuf>,
        /// Also write the evaluated samples as PNGs here.
        #[arg(long)]
        samples_out: Option<PathBuf>,
    },
    /// Render a square grid of samples from a checkpoint.
    Grid {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of samples; must be a perfect square.
        #[arg(long, default_value_t = DEFAULT_GRID)]
        n: usize,
    },
    /// Train and evaluate both modes and write comparison tables.
    Compare,
}

pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.overrides.resolve()?;
    let out = cli
        .out
        .clone()
        .ok_or_else(|| Error::Usage("--out <DIR> is required".into()))?;
    Ok(match &cli.command {
        Command::Dataset => {
            let n = cmd_dataset(&cfg, &out, cli.force)?;
            format!("wrote {n} label maps to {}", out.display())
        }
        Command::Train => {
            let state = cmd_train(&cfg, &out, cli.force)?;
            format!("trained {} steps into {}", state.step, out.display())
        }
        Command::Eval {
            checkpoint,
            real_features,
            fake_features,
            samples_out,
        } => {
            let csv = out.join(EVAL_CSV);
            if cli.force && csv.exists() {
                std::fs::remove_file(&csv).map_err(|e| Error::io(&csv, e))?;
            }
            let inputs = EvalInputs {
                real_features: real_features.clone(),
                fake_features: fake_features.clone(),
                samples_out: samples_out.clone(),
            };
            let r = cmd_eval(&cfg, checkpoint, &out, &inputs)?;
            format!(
                "step {}: frechet {:.6} ms_ssim {:.6} swd_avg {:.4} spurious_rate {}",
                r.step, r.frechet, r.ms_ssim_diversity, r.swd_avg, r.spurious_rate
            )
        }
        Command::Grid { checkpoint, n } => {
            let p = cmd_grid(&cfg, checkpoint, *n, &out, cli.force)?;
            format!("wrote {}", p.display())
        }
        Command::Compare => {
            let report = cmd_compare(&cfg, &out, cli.force)?;
            let lines: Vec<String> = report
                .summary
                .iter()
                .map(|s| format!("{}: best swd_avg {:.4}, best frechet {:.6}", s.mode, s.swd_avg, s.frechet))
                .collect();
            lines.join("\n")
        }
    })
}
