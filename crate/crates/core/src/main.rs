use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dispersive_core::harness::{run, ExperimentConfig};
use dispersive_core::{Error, Result};

/// Numerical experiments on dispersive propagators, restriction and sparse decompositions.
#[derive(Parser)]
#[command(name = "dlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `output`, then `./out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Rayon pool size; the only setting taken from the environment.
const THREADS_VAR: &str = "DLAB_THREADS";

fn load(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            cfg.validate()?;
            println!("{} config ok, hash {}", cfg.experiment.name(), cfg.hash()?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, seed, out } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let record = run(&cfg, &dir)?;
            std::fs::write(dir.join("report.json"), record.to_json()? + "\n")?;
            for (name, value) in &record.scalars {
                match value {
                    Some(v) => println!("{name} = {v}"),
                    None => println!("{name} = non-finite"),
                }
            }
            let failed = record.failed_checks();
            if failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failed checks: {}", failed.join(", "));
                Ok(ExitCode::from(3))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &Error) -> u8 {
    e.exit_code().clamp(0, 255) as u8
}
