//! Config-driven runner for the verification operations of `homog-core`.
//!
//! Exit status: 0 when every verdict passes, 1 on a failed verification,
//! 2 on a configuration or I/O problem, 3 when the numerics cannot resolve
//! the requested experiment.

pub mod commands;
pub mod config;
pub mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use config::Loaded;
use report::{Header, ReportWriter};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(homog_core::Error),
    #[error("verification failed: {0}")]
    Verification(homog_core::Error),
}

impl From<homog_core::Error> for CliError {
    fn from(e: homog_core::Error) -> Self {
        use homog_core::Error as E;
        match e {
            E::UnderResolved { .. } | E::SupportEscape { .. } | E::NonFinite { .. } | E::NoConvergence { .. } => {
                CliError::Numerical(e)
            }
            E::NotContraction { .. } => CliError::Verification(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    VerifyAction,
    Contract,
    Homogeneity,
    ConstructMeasure,
    Mean,
    Sigma,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyAction => "verify-action",
            Command::Contract => "contract",
            Command::Homogeneity => "homogeneity",
            Command::ConstructMeasure => "construct-measure",
            Command::Mean => "mean",
            Command::Sigma => "sigma",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
    /// `key=value` tolerance replacements.
    pub tol_overrides: Vec<String>,
}

#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

fn parse_override(s: &str) -> Result<(String, f64), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--tol-override expects key=value, got `{s}`")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--tol-override `{s}`: value is not a number")))?;
    Ok((k.trim().to_string(), v))
}

/// Runs one subcommand on the config at `config_path`, writing reports
/// into `out`.
pub fn run(cmd: Command, config_path: &Path, out: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let bytes = fs::read(config_path).map_err(|e| CliError::Io(format!("{}: {e}", config_path.display())))?;
    let source = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let loaded = Loaded::parse(source)?;
    let mut tol = loaded.config.tolerances.clone();
    for o in &opts.tol_overrides {
        let (k, v) = parse_override(o)?;
        tol.set(&k, v)?;
    }
    let header = Header {
        tool: "homog",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cmd.name().to_string(),
        config_sha256: hex::encode(Sha256::digest(&bytes)),
        seed: loaded.config.seed,
        overrides: opts.tol_overrides.clone(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.jobs {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let mut writer = ReportWriter::new(out, header)?;
    let (pass, summary) = pool.install(|| match cmd {
        Command::VerifyAction => commands::verify_action(&loaded, &tol, &mut writer),
        Command::Contract => commands::contract(&loaded, &tol, &mut writer),
        Command::Homogeneity => commands::homogeneity(&loaded, &tol, &mut writer),
        Command::ConstructMeasure => commands::construct(&loaded, &tol, &mut writer),
        Command::Mean => commands::mean_values(&loaded, &tol, &mut writer),
        Command::Sigma => commands::sigma(&loaded, &tol, &mut writer),
    })?;
    Ok(Outcome {
        pass,
        summary,
        files: writer.into_files(),
    })
}
