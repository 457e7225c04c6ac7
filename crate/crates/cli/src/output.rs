//! CSV tables and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use qbcharge::scenarios::Table;
use serde_json::json;
use sha2::{Digest, Sha256};

/// Standard-error columns are suffixed with this.
pub const ERROR_SUFFIX: &str = "_se";

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // NaN, inf, -inf
        format!("{v}").to_lowercase()
    }
}

/// CSV text: `#` metadata and warning lines, a header, then rows at 17
/// significant digits.
pub fn table_csv(t: &Table) -> String {
    let mut out = String::new();
    for (k, v) in &t.meta {
        let _ = writeln!(out, "# {k} = {v}");
    }
    for w in &t.warnings {
        let _ = writeln!(out, "# warning: {w}");
    }
    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<&[f64]> = Vec::new();
    for (name, col) in &t.columns {
        names.push(name.clone());
        cols.push(col);
        if let Some(e) = t.errors.get(name) {
            names.push(format!("{name}{ERROR_SUFFIX}"));
            cols.push(e);
        }
    }
    out.push_str(&names.join(","));
    out.push('\n');
    for r in 0..t.rows() {
        let row: Vec<String> = cols.iter().map(|c| cell(c[r])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Provenance written next to every output file.
#[derive(Clone, Debug, Default)]
pub struct RunManifest {
    pub command: String,
    /// Canonical text the hash is taken over.
    pub canonical_config: String,
    pub seed: Option<u64>,
    pub wall_time: Duration,
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": sha256_hex(&self.canonical_config),
            "config": self.canonical_config,
            "seed": self.seed,
            "wall_time_s": self.wall_time.as_secs_f64(),
            "threads": std::env::var("QB_THREADS").ok(),
            "warnings": self.warnings,
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json()).map_err(io::Error::other)?;
        fs::write(path, text + "\n")
    }
}

/// `out.csv` -> `out.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

pub fn write_table(path: &Path, t: &Table) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, table_csv(t))
}
