//! Command-line front end: train observers, sweep ablation grids, replay
//! stored checkpoints, and compare trajectory CSVs.

use clap::{Parser, Subcommand};
use pinn_obs::config::RunConfig;
use pinn_obs::{runner, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pinn-obs",
    version,
    about = "Adaptive neural observer for nonlinear systems",
    long_about = "Trains a small network that jointly represents a state \
                  estimate and a time-varying injection gain from output \
                  measurements, then evaluates it by integrating the observer."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a config file and write run artifacts.
    Run {
        /// Path to a key = value config file.
        config: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the iteration budget.
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Run every cell of an ablation grid config.
    Ablate {
        /// Path to a grid config (must set `ablation`).
        config: PathBuf,
        /// Override the config's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the grid's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent cells (default: one per CPU).
        #[arg(long)]
        jobs: Option<usize>,
        /// Override the per-cell iteration budget.
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Integrate the observer from a stored checkpoint (no training).
    Replay {
        /// Path to a key = value config file naming the system and grid.
        config: PathBuf,
        /// Trained parameters to replay.
        #[arg(long)]
        ckpt: PathBuf,
        /// Override the config's RNG seed (affects the data split only).
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two trajectory CSVs and print key=value metrics.
    Metrics { truth: PathBuf, estimate: PathBuf },
}

fn load(
    path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    max_iters: Option<usize>,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if out.is_some() {
        cfg.out = out;
    }
    if let Some(n) = max_iters {
        cfg.max_iters = n;
    }
    Ok(cfg)
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            max_iters,
        } => {
            let cfg = load(&config, seed, out, max_iters)?;
            let outcome = runner::run_experiment(&cfg)?;
            println!(
                "wrote {} (best loss {:.4e} at iteration {}, {} iterations, {:.1}s)",
                outcome.out.display(),
                outcome.train.best_loss,
                outcome.train.best_iter,
                outcome.train.stopped_iter,
                outcome.train_seconds,
            );
        }
        Command::Ablate {
            config,
            seed,
            out,
            jobs,
            max_iters,
        } => {
            let cfg = load(&config, seed, out, max_iters)?;
            let path = runner::run_ablation(&cfg, jobs)?;
            println!("wrote {}", path.display());
        }
        Command::Replay {
            config,
            ckpt,
            seed,
            out,
        } => {
            let cfg = load(&config, seed, out, None)?;
            runner::replay_from_checkpoint(&cfg, &ckpt)?;
        }
        Command::Metrics { truth, estimate } => {
            print!("{}", runner::metrics_from_csv(&truth, &estimate)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
