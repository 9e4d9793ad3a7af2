//! File output: CSV tables, JSON artifacts and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CsmaError, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::sim::{RunResult, ARTIFACT_VERSION, SEED_SCHEME};
use crate::stats::NetInputHistogram;

fn csv_err(e: csv::Error) -> CsmaError {
    CsmaError::Io(std::io::Error::other(e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes `rows` with a header taken from the row type's field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CsmaError::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub lag: usize,
    pub psi: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub slot: u64,
    pub mean_queue: f64,
}

pub fn correlation_rows(psi: &[f64], se: &[f64], max_lag: usize) -> Vec<CorrelationRow> {
    psi.iter()
        .zip(se)
        .enumerate()
        .take(max_lag + 1)
        .map(|(lag, (&psi, &se))| CorrelationRow { lag, psi, se })
        .collect()
}

pub fn hist_rows(h: &NetInputHistogram) -> Vec<HistRow> {
    h.bins
        .iter()
        .map(|b| HistRow {
            bin_lo: b.lo,
            bin_hi: b.hi,
            count: b.count,
        })
        .collect()
}

pub fn timeseries_rows(series: &[(u64, f64)]) -> Vec<TimeseriesRow> {
    series
        .iter()
        .map(|&(slot, mean_queue)| TimeseriesRow { slot, mean_queue })
        .collect()
}

/// Provenance written next to every set of data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub seed_scheme: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub runs: Vec<ManifestRun>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub dir: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Manifest {
    pub fn new(experiment: &str, seed: u64, params: &impl Serialize) -> Self {
        Self {
            experiment: experiment.into(),
            version: ARTIFACT_VERSION.into(),
            seed_scheme: SEED_SCHEME.into(),
            seed,
            params: serde_json::to_value(params).expect("params serialize"),
            runs: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Records a data file, stored relative to `root`.
    pub fn add_file(&mut self, root: &Path, path: &Path) {
        let rel = path.strip_prefix(root).unwrap_or(path);
        self.files.push(rel.to_string_lossy().replace('\\', "/"));
    }

    pub fn write(&mut self, root: &Path) -> Result<PathBuf> {
        self.files.sort();
        let path = root.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

/// Writes `config.toml` and `result.json` for one run into `dir`.
pub fn write_run(root: &Path, dir: &Path, cfg: &ExperimentConfig, res: &RunResult, m: &mut Manifest) -> Result<()> {
    ensure_dir(dir)?;
    let cfg_path = dir.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml_string())?;
    let res_path = dir.join("result.json");
    write_json(&res_path, res)?;
    m.add_file(root, &cfg_path);
    m.add_file(root, &res_path);
    let rel = dir.strip_prefix(root).unwrap_or(dir);
    m.runs.push(ManifestRun {
        dir: rel.to_string_lossy().replace('\\', "/"),
        config_hash: res.config_hash.clone(),
        seed: res.seed,
    });
    Ok(())
}

/// Data files for a plain `simulate` run.
pub fn write_simulation(dir: &Path, cfg: &ExperimentConfig, res: &RunResult) -> Result<Manifest> {
    let mut m = Manifest::new("simulate", cfg.seed, cfg);
    write_run(dir, dir, cfg, res, &mut m)?;
    let single = res.measured.len() == 1;
    for ml in &res.measured {
        let suffix = if single { String::new() } else { format!("_link{}", ml.link) };
        if let Some(ac) = &ml.autocorr {
            let p = dir.join(format!("correlation{suffix}.csv"));
            write_csv(&p, &correlation_rows(&ac.psi, &ac.se, cfg.max_lag))?;
            m.add_file(dir, &p);
        }
        if ml.net_input.len() >= 2 {
            if let Ok(h) = crate::stats::net_input_histogram(&ml.net_input, 30) {
                let p = dir.join(format!("hist{suffix}.csv"));
                write_csv(&p, &hist_rows(&h))?;
                m.add_file(dir, &p);
            }
        }
    }
    if !res.timeseries.is_empty() {
        let p = dir.join("timeseries.csv");
        write_csv(&p, &timeseries_rows(&res.timeseries))?;
        m.add_file(dir, &p);
    }
    if !res.slot_log.is_empty() {
        let p = dir.join("slot_log.csv");
        write_csv(&p, &res.slot_log)?;
        m.add_file(dir, &p);
    }
    m.write(dir)?;
    Ok(m)
}
