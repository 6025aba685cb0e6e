use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use peierls::config::{list_models, ExperimentConfig};
use peierls::report::{run, RunError};

/// Covariant brackets for Lagrangian systems.
#[derive(Debug, Parser)]
#[command(name = "peierls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(short, long, default_value = "peierls-out")]
        out: PathBuf,
        /// Override a key, `section.key=value`. Repeatable.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List models and their parameters.
    Models,
    /// Validate a configuration without running it.
    Check {
        config: PathBuf,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Models => {
            print!("{}", list_models());
            ExitCode::SUCCESS
        }
        Command::Check { config, overrides } => match ExperimentConfig::load(&config, &overrides) {
            Ok(c) => {
                println!("ok: model {}, seed {}", c.model.name(), c.seed);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("configuration error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Run { config, out, overrides } => {
            let result = ExperimentConfig::load(&config, &overrides).map_err(RunError::from).and_then(|c| run(&c, &out));
            match result {
                Ok(summary) => {
                    for c in &summary.checks {
                        println!("{} {} measured {:e} tolerance {:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.measured, c.tolerance);
                    }
                    if summary.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
