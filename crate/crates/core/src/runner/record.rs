use super::config::hex;
use crate::error::Result;
use crate::estimators::{EstimatorKind, Selection};
use crate::metrics::GroupReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// One row of the estimates table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub dataset: String,
    pub attribute: String,
    pub estimator: EstimatorKind,
    pub selection: Selection,
    pub raw: f64,
    pub snapped: f64,
    pub seed: u64,
    pub kappa: f64,
}

/// One point of a method's hyperparameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    /// e.g. `R=10` or `lambda_up=4,first_epochs=40`.
    pub setting: String,
    pub r: f64,
    pub failed: bool,
    pub error: Option<String>,
}

/// Outcome of one (method, κ, seed) cell after model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub experiment: String,
    pub dataset: String,
    pub method: String,
    pub kappa: f64,
    pub seed: u64,
    /// Sweep setting of the selected model; empty when every setting failed.
    pub setting: String,
    pub r: f64,
    pub epoch: usize,
    /// Test-split metrics of the selected model; NaN when `failed`.
    pub report: GroupReport,
    /// Effect targets used by the regularizer.
    pub targets: BTreeMap<String, f64>,
    /// Attributes chosen by invariance-score detection, when used.
    pub detected: Option<Vec<String>>,
    pub grid: Vec<GridEntry>,
    pub notes: Vec<String>,
    pub failed: bool,
    /// Excluded from `hash`.
    pub wall_ms: u64,
}

impl RunRecord {
    /// SHA-256 of the JSON form with the wall time zeroed.
    pub fn hash(&self) -> String {
        let mut r = self.clone();
        r.wall_ms = 0;
        let json = serde_json::to_string(&r).expect("record serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, rows: &[T]) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_estimates_csv<W: Write>(w: W, rows: &[EstimateRecord]) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["dataset", "attribute", "estimator", "selection", "raw", "snapped", "seed"])?;
    for r in rows {
        c.write_record([
            r.dataset.clone(),
            r.attribute.clone(),
            enum_name(&r.estimator),
            enum_name(&r.selection),
            r.raw.to_string(),
            r.snapped.to_string(),
            r.seed.to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}

pub fn write_runs_csv<W: Write>(w: W, rows: &[RunRecord]) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record([
        "config_hash", "method", "kappa", "seed", "R", "epoch", "acc_maj", "acc_min", "acc_avg", "acc_worst",
        "delta_prob",
    ])?;
    for r in rows {
        let g = &r.report;
        c.write_record([
            r.config_hash.clone(),
            r.method.clone(),
            r.kappa.to_string(),
            r.seed.to_string(),
            r.r.to_string(),
            r.epoch.to_string(),
            g.acc_majority.to_string(),
            g.acc_minority.to_string(),
            g.acc_average.to_string(),
            g.acc_worst.to_string(),
            g.delta_prob.to_string(),
        ])?;
    }
    c.flush()?;
    Ok(())
}

/// Serde name of a unit enum variant, e.g. `val_loss`.
pub(crate) fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}
