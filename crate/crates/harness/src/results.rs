//! The results table: one scored cell per CSV row, fixed column order.

use std::io::{Read, Write};

use eegeval_core::efficiency::{CellResult, Setting};
use eegeval_core::metrics::Metric;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const COLUMNS: [&str; 10] = [
    "model_tag",
    "setting",
    "dataset_id",
    "budget",
    "montage",
    "fold_id",
    "seed",
    "metric",
    "n_classes",
    "value",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    model_tag: String,
    setting: Setting,
    dataset_id: String,
    budget: Option<usize>,
    montage: String,
    fold_id: usize,
    seed: u64,
    metric: Metric,
    n_classes: usize,
    value: f64,
}

impl From<&CellResult> for Row {
    fn from(c: &CellResult) -> Self {
        Row {
            model_tag: c.model_tag.clone(),
            setting: c.setting,
            dataset_id: c.dataset_id.clone(),
            budget: c.budget,
            montage: c.montage.clone(),
            fold_id: c.fold_id,
            seed: c.seed,
            metric: c.metric,
            n_classes: c.n_classes,
            value: c.value,
        }
    }
}

impl From<Row> for CellResult {
    fn from(r: Row) -> Self {
        CellResult {
            model_tag: r.model_tag,
            setting: r.setting,
            dataset_id: r.dataset_id,
            budget: r.budget,
            montage: r.montage,
            fold_id: r.fold_id,
            seed: r.seed,
            metric: r.metric,
            n_classes: r.n_classes,
            value: r.value,
        }
    }
}

pub fn write<W: Write>(writer: W, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(COLUMNS)?;
    for c in cells {
        w.serialize(Row::from(c))?;
    }
    w.flush().map_err(|e| HarnessError::Data(e.to_string()))
}

pub fn parse<R: Read>(reader: R) -> Result<Vec<CellResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let head: Vec<&str> = rdr.headers()?.iter().collect();
    if head != COLUMNS {
        return Err(HarnessError::Data(format!(
            "results header must be `{}`",
            COLUMNS.join(",")
        )));
    }
    rdr.deserialize::<Row>()
        .map(|r| r.map(CellResult::from).map_err(HarnessError::from))
        .collect()
}
