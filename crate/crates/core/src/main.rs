use clap::{Parser, Subcommand};
use mpdiff::cli;
use std::path::PathBuf;
use std::process::ExitCode;

/// Measure-preserving diffusions: drift assembly, sampling on Euclidean
/// space, tori, matrix Lie groups and spheres, and numerical verification.
#[derive(Parser)]
#[command(name = "mpdiff", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment (sampler and/or verification).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for chain.csv, report.json, verify.json.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run only the [verify] block of the config.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in geometries, targets, brackets, noises and samplers.
    ListBuiltins,
}

fn load_config(path: &PathBuf) -> Result<cli::ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    cli::parse_config(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run { config, out, seed } => execute(&config, &out, seed, false),
        Command::Verify { config, out, seed } => execute(&config, &out, seed, true),
        Command::ListBuiltins => {
            print!("{}", cli::builtin_listing());
            ExitCode::SUCCESS
        }
    }
}

fn execute(config: &PathBuf, out: &PathBuf, seed: Option<u64>, verify_only: bool) -> ExitCode {
    let parsed = match load_config(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    match cli::run_experiment(&parsed, out, seed, verify_only) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.verify_failed {
                eprintln!("verification FAILED: residual above tolerance (see verify.json)");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
