//! Deterministic artifacts: CSV tables, a JSON run manifest, and the config
//! hash that ties them together. No wall-clock or host-dependent data is
//! ever written, so identical configs produce byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::charges::ChargeSeries;
use crate::error::Result;

/// SHA-256 of the raw config text, lowercase hex.
pub fn config_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let d = h.finalize();
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Full round-trip decimal rendering of one value.
pub fn fmt_f64(v: f64) -> String {
    // Debug formatting of f64 is the shortest representation that parses
    // back to the same bits.
    format!("{v:?}")
}

/// Write one CSV table. Rows must all match the header width.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        assert_eq!(row.len(), header.len(), "csv row width mismatch");
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Run metadata written next to every artifact set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// verbatim echo of the config document
    pub config: String,
    /// gauge-integration pole location, if one occurred
    pub singular: Option<f64>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(config_text: &str, seed: u64) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config_text),
            seed,
            config: config_text.to_string(),
            singular: None,
            notes: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Tabulate a charge series: t, Q^n, Lambda^n, centered dQ^n/dt, and the
/// classical invariants. The endpoint derivative rows use one-sided
/// differences.
pub fn charge_table(series: &ChargeSeries) -> (Vec<String>, Vec<Vec<f64>>) {
    let order = series.order;
    let mut header = vec!["t".to_string()];
    for n in 0..=order {
        header.push(format!("Q{n}"));
    }
    for n in 0..=order {
        header.push(format!("Lambda{n}"));
    }
    for n in 0..=order {
        header.push(format!("dQ{n}_dt"));
    }
    header.extend(["mass", "momentum", "energy"].map(String::from));

    let m = series.snapshots.len();
    let mut rows = Vec::with_capacity(m);
    for (i, s) in series.snapshots.iter().enumerate() {
        let mut row = vec![s.t];
        row.extend_from_slice(&s.q);
        row.extend_from_slice(&s.lambda);
        for n in 0..=order {
            row.push(numeric_rate(series, n, i));
        }
        row.push(s.invariants.mass);
        row.push(s.invariants.momentum);
        row.push(s.invariants.energy);
        rows.push(row);
    }
    (header, rows)
}

fn numeric_rate(series: &ChargeSeries, n: usize, i: usize) -> f64 {
    let s = &series.snapshots;
    if s.len() < 2 {
        return 0.0;
    }
    let (a, b) = if i == 0 {
        (0, 1)
    } else if i == s.len() - 1 {
        (s.len() - 2, s.len() - 1)
    } else {
        (i - 1, i + 1)
    };
    (s[b].q[n] - s[a].q[n]) / (s[b].t - s[a].t)
}
