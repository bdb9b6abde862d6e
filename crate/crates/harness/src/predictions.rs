//! Predictions files: CSV with header `epoch_id,true_label,p_0,...,p_{K-1}`.
//! Rows whose probabilities are not a distribution (entries outside [0, 1]
//! or a sum off by more than 1e-6) are rejected and counted, not fatal.

use std::io::{Read, Write};

use crate::error::{HarnessError, Result};

pub const ROW_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub epoch_id: u64,
    pub true_label: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub n_classes: usize,
    pub rows: Vec<PredictionRow>,
    pub rejected: Vec<Rejection>,
}

pub fn header(k: usize) -> Vec<String> {
    let mut h = vec!["epoch_id".to_string(), "true_label".to_string()];
    h.extend((0..k).map(|c| format!("p_{c}")));
    h
}

pub fn parse<R: Read>(reader: R) -> Result<Predictions> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let head: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let k = head.len().saturating_sub(2);
    if k < 2 || head != header(k) {
        return Err(HarnessError::Data(format!(
            "predictions header must be epoch_id,true_label,p_0,...,p_(K-1) with K >= 2, got `{}`",
            head.join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let reject = |reason: String| Rejection { line, reason };
        if rec.len() != k + 2 {
            rejected.push(reject(format!("{} fields, expected {}", rec.len(), k + 2)));
            continue;
        }
        let (Ok(epoch_id), Ok(true_label)) = (rec[0].trim().parse::<u64>(), rec[1].trim().parse::<usize>()) else {
            rejected.push(reject("unparseable epoch_id or true_label".into()));
            continue;
        };
        if true_label >= k {
            rejected.push(reject(format!("true_label {true_label} >= K = {k}")));
            continue;
        }
        let probs: Vec<f64> = match rec.iter().skip(2).map(|s| s.trim().parse::<f64>()).collect() {
            Ok(p) => p,
            Err(_) => {
                rejected.push(reject("unparseable probability".into()));
                continue;
            }
        };
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            rejected.push(reject("probability outside [0, 1]".into()));
            continue;
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            rejected.push(reject(format!("probabilities sum to {sum}")));
            continue;
        }
        if !seen.insert(epoch_id) {
            rejected.push(reject(format!("duplicate epoch_id {epoch_id}")));
            continue;
        }
        rows.push(PredictionRow {
            epoch_id,
            true_label,
            probs,
        });
    }
    Ok(Predictions {
        n_classes: k,
        rows,
        rejected,
    })
}

pub fn write<W: Write>(writer: W, k: usize, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(k))?;
    for r in rows {
        if r.probs.len() != k {
            return Err(HarnessError::Data(format!(
                "epoch {} has {} probabilities, K = {k}",
                r.epoch_id,
                r.probs.len()
            )));
        }
        let mut fields = vec![r.epoch_id.to_string(), r.true_label.to_string()];
        fields.extend(r.probs.iter().map(|p| p.to_string()));
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| HarnessError::Data(e.to_string()))
}
