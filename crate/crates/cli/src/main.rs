use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use isl_cli::commands::{load_checkpoint, parse_target, rank_diagnostic, rank_diagnostic_csv, samples_csv};
use isl_cli::experiment::{run_experiment, thread_cap};
use isl_cli::{load_config, CliError};
use isl_core::RandomSource;

#[derive(Parser)]
#[command(name = "isl", version, about = "Train and inspect ISL generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment config and write its artifacts.
    Run { config: PathBuf },
    /// Rank histogram of target draws against a checkpoint, with the Pearson test.
    Rankdiag {
        checkpoint: PathBuf,
        /// Target spec as JSON, or @path to a JSON file.
        #[arg(long)]
        target: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        /// Comma-separated projection direction for multivariate targets.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples from a checkpoint as CSV.
    Sample {
        checkpoint: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p.display(), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            run_experiment(&cfg, thread_cap()?)?;
            Ok(())
        }
        Command::Rankdiag {
            checkpoint,
            target,
            k,
            n,
            direction,
            seed,
            out,
        } => {
            let gen = load_checkpoint(&checkpoint)?;
            let target = parse_target(&target)?;
            let diag = rank_diagnostic(&gen, &target, k, n, direction.as_deref(), seed)?;
            emit(out.as_ref(), &rank_diagnostic_csv(&diag))
        }
        Command::Sample { checkpoint, n, out, seed } => {
            let gen = load_checkpoint(&checkpoint)?;
            let samples = gen.sample(n, &mut RandomSource::new(seed).substream("sample"))?;
            emit(Some(&out), &samples_csv(&samples))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", CliError::config(None, message.trim_end()).to_json());
            return ExitCode::FAILURE;
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
