//! `archk` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O error, 2 invalid input or failed check,
//! 3 Gram matrix not factorizable. Set `ARCHK_LOG` (e.g. `info`, `debug`)
//! for diagnostics on stderr.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "archk", version, about = "Kernels over hierarchical parameter spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a space file and print its size, roots and depth.
    Validate {
        #[arg(long)]
        space: PathBuf,
    },
    /// Draw random valid configurations as a dataset CSV.
    Sample {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the per-dimension embedding of every config, one JSON line per row.
    Embed {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the Gram matrix of a dataset.
    Gram {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a matrix CSV is positive semi-definite.
    Psd {
        /// Matrix CSV, as written by `gram`.
        gram: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check isometry and pseudometric axioms on sampled pairs and triples.
    Check {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a GP to a dataset with targets and write the model file.
    Fit {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Observation noise variance.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict posterior means and variances at the configs in `--data`.
    Predict {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random search over kernel hyperparameters; writes the best model.
    Tune {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print both crossover values of rho for m categories.
    RhoStar {
        #[arg(long)]
        m: usize,
    },
}

fn run(cli: Cli) -> commands::CmdResult {
    match cli.command {
        Command::Validate { space } => commands::validate(&space),
        Command::Sample { space, n, seed, out } => commands::sample(&space, n, seed, out.as_deref()),
        Command::Embed { space, spec, data, out } => commands::embed(&space, &spec, &data, out.as_deref()),
        Command::Gram { space, spec, data, out } => commands::gram(&space, &spec, &data, out.as_deref()),
        Command::Psd { gram, out } => commands::psd(&gram, out.as_deref()),
        Command::Check {
            space,
            spec,
            pairs,
            seed,
            out,
        } => commands::check(&space, &spec, pairs, seed, out.as_deref()),
        Command::Fit {
            space,
            spec,
            data,
            noise,
            out,
        } => commands::fit(&space, &spec, &data, noise, out.as_deref()),
        Command::Predict { space, model, data, out } => commands::predict(&space, &model, &data, out.as_deref()),
        Command::Tune {
            space,
            data,
            budget,
            seed,
            out,
        } => commands::tune(&space, &data, budget, seed, out.as_deref()),
        Command::RhoStar { m } => commands::rho_star(m),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARCHK_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
