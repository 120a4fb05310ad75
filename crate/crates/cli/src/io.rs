//! CSV data files and their TOML metadata sidecars.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Writes numeric columns under a single header row.
pub fn write_columns(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        bail!("column lengths differ");
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(headers)?;
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.toml");
    out.with_file_name(name)
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    meta: Meta<'a>,
    derived: &'a BTreeMap<String, f64>,
    config: &'a RunConfig,
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    created_unix_s: u64,
    data_file: String,
}

/// Records the command, library version, resolved parameters and SI-derived
/// quantities next to `out`.
pub fn write_sidecar(out: &Path, command: &str, config: &RunConfig, derived: &BTreeMap<String, f64>) -> Result<()> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let sidecar = Sidecar {
        meta: Meta {
            command,
            version: env!("CARGO_PKG_VERSION"),
            created_unix_s: created,
            data_file: out
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        },
        derived,
        config,
    };
    let path = sidecar_path(out);
    std::fs::write(&path, toml::to_string(&sidecar)?).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Deserialize)]
struct FitRow {
    x_delay_s: f64,
    signal: f64,
}

/// A measured scan read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanData {
    pub x_delay: Vec<f64>,
    pub signal: Vec<f64>,
    /// Set when the rows had to be reordered.
    pub was_sorted: bool,
}

/// Reads `x_delay_s,signal` rows; rows are sorted by x if needed.
pub fn read_scan(path: &Path) -> Result<ScanData> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x_delay_s", "signal"] {
        bail!(
            "{}: expected header `x_delay_s,signal`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<FitRow>().enumerate() {
        // Row 1 is the header.
        let row = rec.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        if !(row.x_delay_s.is_finite() && row.signal.is_finite()) {
            bail!("{}: row {} has a non-finite value", path.display(), i + 2);
        }
        rows.push(row);
    }
    let was_sorted = rows.windows(2).any(|w| w[1].x_delay_s < w[0].x_delay_s);
    rows.sort_by(|a, b| a.x_delay_s.total_cmp(&b.x_delay_s));
    if let Some(w) = rows.windows(2).find(|w| w[1].x_delay_s == w[0].x_delay_s) {
        bail!("{}: duplicate x_delay_s = {}", path.display(), w[0].x_delay_s);
    }
    Ok(ScanData {
        x_delay: rows.iter().map(|r| r.x_delay_s).collect(),
        signal: rows.iter().map(|r| r.signal).collect(),
        was_sorted,
    })
}
