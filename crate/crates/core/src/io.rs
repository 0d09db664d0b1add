//! Cloud CSV files with a JSON sidecar, and versioned JSON reports.
//!
//! A cloud `name.csv` holds one row per sample with columns
//! `x0, ..., x{D-1}, weight`; `name.json` records the intrinsic dimension
//! and, for generated clouds, the generator spec.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::GeneratorSpec;
use crate::geometry::WeightedCloud;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub n: usize,
    pub d: usize,
    pub count: usize,
    pub total_mass: f64,
    pub spec: Option<GeneratorSpec>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_cloud(path: &Path, cloud: &WeightedCloud, spec: Option<&GeneratorSpec>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = cloud.dim_ambient();
    let mut header: Vec<String> = (0..dim).map(|a| format!("x{a}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(dim + 1);
    for (i, p) in cloud.points().enumerate() {
        row.clear();
        row.extend(p.iter().map(|v| v.to_string()));
        row.push(cloud.weight(i).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    let side = Sidecar {
        version: REPORT_VERSION,
        n: cloud.dim_intrinsic(),
        d: cloud.codim(),
        count: cloud.len(),
        total_mass: cloud.total_mass(),
        spec: spec.cloned(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

/// Reads a cloud; without a sidecar the intrinsic dimension must be given.
pub fn read_cloud(path: &Path, n: Option<usize>) -> Result<(WeightedCloud, Option<Sidecar>)> {
    let side: Option<Sidecar> = match fs::read_to_string(sidecar_path(path)) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let n = n
        .or(side.as_ref().map(|s| s.n))
        .ok_or_else(|| Error::InvalidCloud("intrinsic dimension unknown (no sidecar)".into()))?;
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let has_weight = headers.iter().last() == Some("weight");
    let dim = headers.len() - usize::from(has_weight);
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidCloud(format!("bad number: {e}")))?;
        coords.extend_from_slice(&vals[..dim]);
        if has_weight {
            weights.push(vals[dim]);
        }
    }
    let weights = has_weight.then_some(weights);
    let mass = side.as_ref().map_or(1.0, |s| s.total_mass);
    Ok((WeightedCloud::new(n, dim, coords, weights, mass)?, side))
}

/// Top-level JSON document of every CLI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub version: u32,
    pub command: String,
    pub seed: u64,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, seed: u64, result: T) -> Self {
        Self {
            version: REPORT_VERSION,
            command: command.to_string(),
            seed,
            result,
        }
    }

    /// Writes to `out`, or to stdout when absent.
    pub fn emit(&self, out: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match out {
            Some(p) => fs::write(p, text + "\n")?,
            None => {
                let mut s = std::io::stdout().lock();
                s.write_all(text.as_bytes())?;
                s.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}
