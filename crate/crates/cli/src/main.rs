use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

/// Bayesian causal mediation forests.
#[derive(Debug, Parser)]
#[command(name = "bcmf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Method {
    Cart,
    Gam,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Target {
    Delta,
    Zeta,
    Tau,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model and write a draws file.
    Fit {
        /// Delimited data file; overrides `data.path` in the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Draws file to write; a JSON fit summary is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Compute effect draws and their summaries from a draws file.
    Effects {
        #[arg(long)]
        draws: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Covariate file of new rows (needs a fit with kept forests).
        #[arg(long)]
        newdata: Option<PathBuf>,
    },
    /// Project effect draws onto a tree or an additive model.
    Summarize {
        /// Effect table written by `effects` (or its directory).
        #[arg(long)]
        effects: PathBuf,
        /// Numeric covariate file with one line per effect row; defaults to
        /// the `covariates.csv` written by `effects`.
        #[arg(long)]
        covariates: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Method,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "delta")]
        target: Target,
        /// Optional config with a `[summary]` table.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a simulation study.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BCMF_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit {
            data,
            config,
            out,
            seed,
            chains,
        } => commands::fit(data, &config, &out, seed, chains),
        Command::Effects { draws, out, newdata } => commands::effects(&draws, &out, newdata.as_deref()),
        Command::Summarize {
            effects,
            covariates,
            method,
            out,
            target,
            config,
        } => commands::summarize(&effects, covariates.as_deref(), method, target, &out, config.as_deref()),
        Command::Simulate { config, out, seed } => commands::simulate(&config, &out, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
