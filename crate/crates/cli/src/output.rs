//! CSV tables and the run manifest.

use std::fs;
use std::path::Path;

use serde::Serialize;
use shapley_gsa::uncertainty::IntervalEstimate;

use crate::config::RunConfig;
use crate::error::CliError;

/// One line of `indices.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct IndexRow {
    pub input: usize,
    pub index: &'static str,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub method: String,
}

impl IndexRow {
    pub fn from_interval(input: usize, index: &'static str, ci: &IntervalEstimate) -> Self {
        Self { input: input + 1, index, point: ci.point, lo: ci.lo, hi: ci.hi, method: ci.method.name().to_string() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PocRow {
    pub budget: usize,
    #[serde(rename = "Ni")]
    pub ni: usize,
    pub index: String,
    pub poc: f64,
    pub mean_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionRow {
    pub input: usize,
    pub index: &'static str,
    pub var_metamodel: f64,
    pub var_mc: f64,
    pub var_total: f64,
    pub residual: f64,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

/// Everything a method produces before it is written to disk.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub rows: Vec<IndexRow>,
    pub evaluations: usize,
    pub extras: serde_json::Map<String, serde_json::Value>,
    /// Additional files as (name, contents).
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    threads: usize,
    config: &'a RunConfig,
    evaluations: usize,
    wall_clock_seconds: f64,
    files: Vec<&'a str>,
    results: &'a [IndexRow],
    extras: &'a serde_json::Map<String, serde_json::Value>,
}

pub struct RunInfo<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a RunConfig,
    pub wall_clock_seconds: f64,
}

pub fn write_all(dir: &Path, art: &Artifacts, info: &RunInfo<'_>) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    if !art.rows.is_empty() {
        fs::write(dir.join("indices.csv"), to_csv(&art.rows)?)?;
        files.push("indices.csv");
    }
    for (name, contents) in &art.files {
        fs::write(dir.join(name), contents)?;
        files.push(name);
    }
    files.push("manifest.json");
    let manifest = Manifest {
        tool: "shapley-gsa",
        version: env!("CARGO_PKG_VERSION"),
        command: info.command,
        seed: info.seed,
        threads: info.threads,
        config: info.config,
        evaluations: art.evaluations,
        wall_clock_seconds: info.wall_clock_seconds,
        files,
        results: &art.rows,
        extras: &art.extras,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}
