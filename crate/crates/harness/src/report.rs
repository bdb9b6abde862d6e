//! Result tables: parameter efficiency, sample efficiency, channel budgets.

use std::collections::{BTreeMap, BTreeSet};

use eegeval_core::efficiency::{efficiency_table, CellResult, EfficiencyKind, EfficiencyReport};
use eegeval_core::metrics::Metric;
use eegeval_core::stats::stars;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        out += &(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  ") + "\n");
        for r in &self.rows {
            out += &line(r);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| crate::error::HarnessError::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn column(dataset: &str, budget: Option<usize>, montage: &str) -> String {
    let mut s = dataset.to_string();
    if let Some(b) = budget {
        s += &format!("@{b}");
    }
    if montage != "full" {
        s += &format!(" {montage}");
    }
    s
}

/// Rows keyed by (model, setting), columns by label, in sorted order.
fn pivot(entries: Vec<((String, String), String, String)>) -> Table {
    let columns: BTreeSet<String> = entries.iter().map(|(_, c, _)| c.clone()).collect();
    let mut rows: BTreeMap<(String, String), BTreeMap<String, String>> = BTreeMap::new();
    for (row, col, v) in entries {
        rows.entry(row).or_default().insert(col, v);
    }
    let columns: Vec<String> = columns.into_iter().collect();
    let mut header = vec!["model".to_string(), "setting".to_string()];
    header.extend(columns.iter().cloned());
    Table {
        header,
        rows: rows
            .into_iter()
            .map(|((m, s), cells)| {
                let mut r = vec![m, s];
                r.extend(columns.iter().map(|c| cells.get(c).cloned().unwrap_or_default()));
                r
            })
            .collect(),
    }
}

fn efficiency_cell(r: &EfficiencyReport) -> String {
    let mut s = match (r.mean, r.std) {
        (Some(m), Some(sd)) => format!("{m:.2} ± {sd:.2}"),
        _ => "undefined".to_string(),
    };
    if let Some(t) = &r.significance {
        s += stars(t.p_value);
    }
    if r.n_excluded > 0 {
        s += &format!(" ({} excluded)", r.n_excluded);
    }
    s
}

pub fn efficiency_reports(
    cells: &[CellResult],
    kind: EfficiencyKind,
    metric: Metric,
    baseline: Option<&str>,
) -> Result<Vec<EfficiencyReport>> {
    Ok(efficiency_table(cells, kind, metric, baseline)?)
}

/// PE or SE as `mean ± std`, with significance stars on SE.
pub fn efficiency_summary(reports: &[EfficiencyReport]) -> Table {
    pivot(
        reports
            .iter()
            .map(|r| {
                (
                    (r.model_tag.clone(), r.setting.to_string()),
                    column(&r.dataset_id, r.budget, &r.montage),
                    efficiency_cell(r),
                )
            })
            .collect(),
    )
}

/// Metric value x100 as `mean ± std` over folds and seeds, one column per
/// dataset and montage.
pub fn channel_table(cells: &[CellResult], metric: Metric) -> Table {
    let mut groups: BTreeMap<((String, String), String), Vec<f64>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.metric == metric) {
        groups
            .entry((
                (c.model_tag.clone(), c.setting.to_string()),
                column(&c.dataset_id, c.budget, &c.montage),
            ))
            .or_default()
            .push(c.value * 100.0);
    }
    pivot(
        groups
            .into_iter()
            .map(|((row, col), v)| {
                let n = v.len() as f64;
                let m = v.iter().sum::<f64>() / n;
                let sd = (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt();
                (row, col, format!("{m:.2} ± {sd:.2}"))
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_alignment() {
        let t = Table {
            header: vec!["model".into(), "x".into()],
            rows: vec![vec!["a".into(), "0.50 ± 0.10".into()]],
        };
        assert_eq!(t.to_text(), "model  x\n-----  -----------\na      0.50 ± 0.10\n");
    }

    #[test]
    fn column_labels() {
        assert_eq!(column("tuev", None, "full"), "tuev");
        assert_eq!(column("tuev", Some(240), "sparse2"), "tuev@240 sparse2");
    }
}
