use std::io::Write;
use std::path::Path;

use eqbm::RMat;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub args: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_sha256: Option<String>,
}

impl Provenance {
    pub fn new(command: &'static str, model_sha256: Option<String>) -> Self {
        Provenance {
            tool: "eqbm",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: std::env::args().skip(1).collect(),
            model_sha256,
        }
    }
}

pub fn rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Pretty JSON with a trailing newline, to `out` or stdout.
pub fn emit<T: Serialize>(doc: &T, out: Option<&Path>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
