//! Classification metrics: balanced accuracy, Cohen's kappa, AUROC and
//! macro-averaged F1, plus their chance levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("class {0} has no true samples")]
    EmptyClass(usize),
    #[error("chance agreement is 1; kappa undefined")]
    DegenerateAgreement,
    #[error("AUROC needs both classes present")]
    OneClassOnly,
    #[error("no samples to score")]
    Empty,
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Bac,
    Kappa,
    Auroc,
    F1Macro,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Bac, Metric::Kappa, Metric::Auroc, Metric::F1Macro];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bac => "bac",
            Metric::Kappa => "kappa",
            Metric::Auroc => "auroc",
            Metric::F1Macro => "f1_macro",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| MetricError::Invalid(format!("unknown metric `{s}`")))
    }
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, MetricError> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(MetricError::Invalid(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_labels(truth: &[usize], pred: &[usize], k: usize) -> Result<Self, MetricError> {
        if truth.len() != pred.len() {
            return Err(MetricError::Invalid(format!(
                "{} labels vs {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut counts = vec![vec![0u64; k]; k];
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= k || p >= k {
                return Err(MetricError::Invalid(format!("label outside [0, {k})")));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, j: usize) -> u64 {
        self.counts[j].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|j| self.counts[j][j]).sum()
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    match cm.total() {
        0 => Err(MetricError::Empty),
        t => Ok(cm.trace() as f64 / t as f64),
    }
}

/// Mean per-class recall.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    for j in 0..cm.k() {
        let row = cm.row_sum(j);
        if row == 0 {
            return Err(MetricError::EmptyClass(j));
        }
        sum += cm.get(j, j) as f64 / row as f64;
    }
    Ok(sum / cm.k() as f64)
}

pub fn cohens_kappa(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricError::Empty);
    }
    let n = total as f64;
    let p_o = cm.trace() as f64 / n;
    let chance: u128 = (0..cm.k()).map(|j| cm.row_sum(j) as u128 * cm.col_sum(j) as u128).sum();
    if chance == total as u128 * total as u128 {
        return Err(MetricError::DegenerateAgreement);
    }
    let p_e = chance as f64 / (n * n);
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Macro F1; a class with zero precision and recall contributes 0.
pub fn f1_macro(cm: &ConfusionMatrix) -> Result<f64, MetricError> {
    if cm.total() == 0 {
        return Err(MetricError::Empty);
    }
    let k = cm.k();
    let sum: f64 = (0..k)
        .map(|j| {
            let tp = cm.get(j, j) as f64;
            let (pred, real) = (cm.col_sum(j), cm.row_sum(j));
            let pr = if pred == 0 { 0.0 } else { tp / pred as f64 };
            let re = if real == 0 { 0.0 } else { tp / real as f64 };
            if pr + re == 0.0 {
                0.0
            } else {
                2.0 * pr * re / (pr + re)
            }
        })
        .sum();
    Ok(sum / k as f64)
}

/// Area under the ROC curve as the Mann-Whitney statistic
/// `P(s+ > s-) + P(s+ == s-) / 2`, by one sorted sweep over tie groups.
pub fn auroc(scores: &[(f64, bool)]) -> Result<f64, MetricError> {
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(MetricError::Invalid("NaN score".into()));
    }
    let n_pos = scores.iter().filter(|(_, y)| *y).count() as u64;
    let n_neg = scores.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::OneClassOnly);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the number of favorable pairs, so ties stay integral.
    let mut twice: u128 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice += 2 * pos as u128 * neg_below as u128 + pos as u128 * neg as u128;
        neg_below += neg;
        i = j;
    }
    Ok(twice as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Expected score of an uninformative predictor.
pub fn chance_level(metric: Metric, k: usize) -> f64 {
    assert!(k >= 2, "chance level needs at least two classes");
    match metric {
        Metric::Bac | Metric::F1Macro => 1.0 / k as f64,
        Metric::Kappa => 0.0,
        Metric::Auroc => 0.5,
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bac: f64,
    pub f1_macro: f64,
    pub kappa: f64,
    pub auroc: Option<f64>,
}

impl MetricReport {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Bac => Some(self.bac),
            Metric::Kappa => Some(self.kappa),
            Metric::F1Macro => Some(self.f1_macro),
            Metric::Auroc => self.auroc,
        }
    }
}

/// Score class-probability rows against true labels. AUROC is reported for
/// binary tasks only, using the class-1 probability. A kappa with all chance
/// mass in one cell is reported as 0.
pub fn score(truth: &[usize], probs: &[Vec<f64>], k: usize) -> Result<MetricReport, MetricError> {
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    if truth.len() != probs.len() || probs.iter().any(|r| r.len() != k) {
        return Err(MetricError::Invalid("probability matrix shape mismatch".into()));
    }
    let pred: Vec<usize> = probs.iter().map(|r| argmax(r)).collect();
    let cm = ConfusionMatrix::from_labels(truth, &pred, k)?;
    let kappa = match cohens_kappa(&cm) {
        Err(MetricError::DegenerateAgreement) => 0.0,
        other => other?,
    };
    let auroc = if k == 2 {
        let s: Vec<(f64, bool)> = truth.iter().zip(probs).map(|(&t, r)| (r[1], t == 1)).collect();
        Some(auroc(&s)?)
    } else {
        None
    };
    Ok(MetricReport {
        bac: balanced_accuracy(&cm)?,
        f1_macro: f1_macro(&cm)?,
        kappa,
        auroc,
    })
}
