use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use homog_cli::{run, Command, RunOptions};

/// Runs homogenization verification experiments from a TOML config.
#[derive(Parser)]
#[command(name = "homog", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    /// Replace a tolerance, e.g. `--tol-override sigma=5e-3`; repeatable.
    #[arg(long = "tol-override", value_name = "KEY=VALUE")]
    tol_override: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        jobs: cli.jobs,
        tol_overrides: cli.tol_override,
    };
    match run(cli.command, &cli.config, &cli.out, &opts) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!(
                "{}: {} ({} files in {})",
                cli.command,
                if outcome.pass { "pass" } else { "FAIL" },
                outcome.files.len(),
                cli.out.display()
            );
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("homog {}: {e}", cli.command);
            ExitCode::from(e.exit_code())
        }
    }
}
