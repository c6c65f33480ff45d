//! Report files: one JSON document per run, CSV tables and two-column plot
//! data. Every file starts from the same header so a report can be traced
//! back to its config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub overrides: Vec<String>,
}

impl Header {
    fn comment_lines(&self) -> String {
        let mut s = format!(
            "# {} {}\n# subcommand {}\n# config-sha256 {}\n# seed {}\n",
            self.tool, self.version, self.subcommand, self.config_sha256, self.seed
        );
        for o in &self.overrides {
            s.push_str(&format!("# override {o}\n"));
        }
        s
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    header: &'a Header,
    pass: bool,
    report: &'a T,
}

pub struct ReportWriter {
    dir: PathBuf,
    header: Header,
    files: Vec<PathBuf>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Keeps `[A-Za-z0-9._-]`, maps everything else to `_`.
pub fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

impl ReportWriter {
    pub fn new(dir: &Path, header: Header) -> Result<Self, CliError> {
        fs::create_dir_all(dir.join("plot")).map_err(|e| io_err(dir, e))?;
        Ok(ReportWriter {
            dir: dir.to_path_buf(),
            header,
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: String, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, report: &T, pass: bool) -> Result<(), CliError> {
        let doc = Document {
            header: &self.header,
            pass,
            report,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let name = format!("{}.json", self.header.subcommand);
        self.write(name, text.as_bytes())
    }

    /// `<subcommand>-<table>.csv` with the header as `#` comment lines.
    pub fn csv(&mut self, table: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut buf = self.header.comment_lines().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(columns).map_err(|e| CliError::Io(e.to_string()))?;
            for r in rows {
                w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        let name = format!("{}-{table}.csv", self.header.subcommand);
        self.write(name, &buf)
    }

    /// Whitespace-separated `x y` pairs under `plot/`; non-finite points
    /// are dropped.
    pub fn plot(&mut self, curve: &str, points: &[(f64, f64)]) -> Result<(), CliError> {
        let mut s = self.header.comment_lines();
        for (x, y) in points {
            if x.is_finite() && y.is_finite() {
                s.push_str(&format!("{x} {y}\n"));
            }
        }
        let name = format!("plot/{}-{}.dat", self.header.subcommand, file_stem(curve));
        self.write(name, s.as_bytes())
    }

    pub fn into_files(self) -> Vec<PathBuf> {
        self.files
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_filesystem_safe() {
        assert_eq!(file_stem("sin^2(2 pi y)"), "sin_2_2_pi_y_");
        assert_eq!(file_stem("phi-1.5"), "phi-1.5");
    }
}
