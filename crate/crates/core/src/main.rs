use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use chflow::config::{parse_config, RunConfig};
use chflow::runner;

#[derive(Parser)]
#[command(
    name = "chflow",
    version,
    about = "Conformal heat flow of maps from a flat torus into a sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run two configurations on the same initial data and align their samples.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant suite.
    Check,
}

fn load(path: &PathBuf) -> anyhow::Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { config, out } => {
            let config = load(&config)?;
            let dir = out.unwrap_or_else(|| config.output_dir.clone());
            let (status, _) = runner::run(&config, &dir)?;
            if let runner::RunStatus::StepFailure(reason) = &status {
                eprintln!("step failure: {reason}");
            }
            Ok(status.exit_code() as u8)
        }
        Command::Compare {
            config_a,
            config_b,
            out,
        } => {
            let (a, b) = (load(&config_a)?, load(&config_b)?);
            let (sa, sb) = runner::compare(&a, &b, &out)?;
            let failed = [&sa, &sb]
                .iter()
                .any(|s| matches!(s, runner::RunStatus::StepFailure(_)));
            Ok(if failed { 2 } else { 0 })
        }
        Command::Check => {
            let results = runner::check()?;
            for r in &results {
                println!(
                    "{} {} {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
            Ok(if results.iter().all(|r| r.passed) {
                0
            } else {
                1
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
