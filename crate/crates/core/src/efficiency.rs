//! Parameter efficiency and sample efficiency: chance-corrected performance
//! ratios, computed per fold x seed pair and then aggregated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{chance_level, Metric};
use crate::stats::{paired_one_sided, TestResult};

/// Denominators closer to zero than this leave the ratio undefined.
pub const DENOMINATOR_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EfficiencyError {
    #[error("reference performance {reference} is at chance level {chance}")]
    ChanceLevelDenominator { reference: f64, chance: f64 },
    #[error("unpaired cells: {0}")]
    UnpairedCells(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    FullFt,
    LinearProbe,
    Peft,
    Supervised,
}

impl Setting {
    pub const ALL: [Setting; 4] = [
        Setting::FullFt,
        Setting::LinearProbe,
        Setting::Peft,
        Setting::Supervised,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Setting::FullFt => "full_ft",
            Setting::LinearProbe => "linear_probe",
            Setting::Peft => "peft",
            Setting::Supervised => "supervised",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = EfficiencyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Setting::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| EfficiencyError::Invalid(format!("unknown setting `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyKind {
    Pe,
    Se,
}

impl fmt::Display for EfficiencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EfficiencyKind::Pe => "pe",
            EfficiencyKind::Se => "se",
        })
    }
}

/// One scored (model, setting, dataset, budget, montage, fold, seed, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub model_tag: String,
    pub setting: Setting,
    pub dataset_id: String,
    pub budget: Option<usize>,
    pub montage: String,
    pub fold_id: usize,
    pub seed: u64,
    pub metric: Metric,
    pub n_classes: usize,
    pub value: f64,
}

fn ratio(value: f64, reference: f64, chance: f64) -> Result<f64, EfficiencyError> {
    let den = reference - chance;
    if den.abs() < DENOMINATOR_EPS {
        return Err(EfficiencyError::ChanceLevelDenominator { reference, chance });
    }
    Ok((value - chance) / den)
}

/// `(p_s - p_chance) / (p_ft - p_chance)`
pub fn parameter_efficiency(p_s: f64, p_ft: f64, p_chance: f64) -> Result<f64, EfficiencyError> {
    ratio(p_s, p_ft, p_chance)
}

/// `(p_d - p_chance) / (p_sup - p_chance)`; above 1 means the pre-trained
/// model beats the supervised baseline at this budget.
pub fn sample_efficiency(p_d: f64, p_sup: f64, p_chance: f64) -> Result<f64, EfficiencyError> {
    ratio(p_d, p_sup, p_chance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub fold_id: usize,
    pub seed: u64,
    pub numerator: f64,
    pub reference: f64,
    /// `None` when the reference sits at or below chance (excluded from the mean).
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub kind: EfficiencyKind,
    pub model_tag: String,
    pub setting: Setting,
    pub reference_model: String,
    pub reference_setting: Setting,
    pub dataset_id: String,
    pub budget: Option<usize>,
    pub montage: String,
    pub metric: Metric,
    pub p_chance: f64,
    /// Mean and population standard deviation over included pairs; `None`
    /// when every pair was excluded.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
    pub n_excluded: usize,
    /// SE only: one-sided paired test of numerator > reference.
    pub significance: Option<TestResult>,
    pub pairs: Vec<PairValue>,
}

type PairKey = (usize, u64);

fn keyed(cells: &[&CellResult]) -> Result<BTreeMap<PairKey, f64>, EfficiencyError> {
    let mut m = BTreeMap::new();
    for c in cells {
        if m.insert((c.fold_id, c.seed), c.value).is_some() {
            return Err(EfficiencyError::Invalid(format!(
                "duplicate cell for {} {} fold {} seed {}",
                c.model_tag, c.setting, c.fold_id, c.seed
            )));
        }
    }
    Ok(m)
}

/// Pair numerator and reference cells on (fold, seed), compute the ratio
/// per pair, then mean and std. Pairs whose reference is at or below chance
/// are kept in `pairs` but excluded from the mean.
pub fn aggregate(
    kind: EfficiencyKind,
    numerator: &[&CellResult],
    reference: &[&CellResult],
    p_chance: f64,
) -> Result<EfficiencyReport, EfficiencyError> {
    let first = numerator
        .first()
        .ok_or_else(|| EfficiencyError::Invalid("no numerator cells".into()))?;
    let ref_first = reference
        .first()
        .ok_or_else(|| EfficiencyError::UnpairedCells("no reference cells".into()))?;
    let num = keyed(numerator)?;
    let den = keyed(reference)?;
    let only_num: Vec<String> = num
        .keys()
        .filter(|k| !den.contains_key(k))
        .map(|k| format!("{k:?}"))
        .collect();
    let only_den: Vec<String> = den
        .keys()
        .filter(|k| !num.contains_key(k))
        .map(|k| format!("{k:?}"))
        .collect();
    if !only_num.is_empty() || !only_den.is_empty() {
        return Err(EfficiencyError::UnpairedCells(format!(
            "(fold, seed) only in {}/{}: [{}]; only in {}/{}: [{}]",
            first.model_tag,
            first.setting,
            only_num.join(", "),
            ref_first.model_tag,
            ref_first.setting,
            only_den.join(", ")
        )));
    }

    let pairs: Vec<PairValue> = num
        .iter()
        .map(|(&(fold_id, seed), &v)| {
            let r = den[&(fold_id, seed)];
            let value = if r - p_chance > DENOMINATOR_EPS {
                ratio(v, r, p_chance).ok()
            } else {
                None
            };
            PairValue {
                fold_id,
                seed,
                numerator: v,
                reference: r,
                value,
            }
        })
        .collect();
    let values: Vec<f64> = pairs.iter().filter_map(|p| p.value).collect();
    let n = values.len();
    let (mean, std) = if n == 0 {
        (None, None)
    } else {
        let m = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        (Some(m), Some(var.sqrt()))
    };
    let significance = match kind {
        EfficiencyKind::Se => {
            let diffs: Vec<f64> = pairs.iter().map(|p| p.numerator - p.reference).collect();
            Some(paired_one_sided(&diffs))
        }
        EfficiencyKind::Pe => None,
    };
    Ok(EfficiencyReport {
        kind,
        model_tag: first.model_tag.clone(),
        setting: first.setting,
        reference_model: ref_first.model_tag.clone(),
        reference_setting: ref_first.setting,
        dataset_id: first.dataset_id.clone(),
        budget: first.budget,
        montage: first.montage.clone(),
        metric: first.metric,
        p_chance,
        mean,
        std,
        n,
        n_excluded: pairs.len() - n,
        significance,
        pairs,
    })
}

/// Every PE or SE report derivable from a results table for one metric.
///
/// PE pairs each model's `linear_probe` / `peft` cells with its own
/// `full_ft` cells. SE pairs them with the supervised baseline's cells at
/// the same budget; `baseline` names the supervised model and may be
/// omitted when exactly one supervised model is present.
pub fn efficiency_table(
    cells: &[CellResult],
    kind: EfficiencyKind,
    metric: Metric,
    baseline: Option<&str>,
) -> Result<Vec<EfficiencyReport>, EfficiencyError> {
    let cells: Vec<&CellResult> = cells.iter().filter(|c| c.metric == metric).collect();
    type Group = (String, Option<usize>, String);
    let mut groups: BTreeMap<Group, Vec<&CellResult>> = BTreeMap::new();
    for c in &cells {
        groups
            .entry((c.dataset_id.clone(), c.budget, c.montage.clone()))
            .or_default()
            .push(c);
    }

    let baseline = match kind {
        EfficiencyKind::Pe => None,
        EfficiencyKind::Se => {
            let sup: BTreeSet<&str> = cells
                .iter()
                .filter(|c| c.setting == Setting::Supervised)
                .map(|c| c.model_tag.as_str())
                .collect();
            match baseline {
                Some(b) => Some(b.to_string()),
                None if sup.len() == 1 => sup.into_iter().next().map(str::to_string),
                None if sup.is_empty() => return Ok(Vec::new()),
                None => {
                    return Err(EfficiencyError::Invalid(format!(
                        "several supervised models ({}); name the baseline",
                        sup.into_iter().collect::<Vec<_>>().join(", ")
                    )))
                }
            }
        }
    };

    let mut out = Vec::new();
    for group in groups.values() {
        let mut by_model: BTreeMap<(&str, Setting), Vec<&CellResult>> = BTreeMap::new();
        for c in group {
            by_model.entry((c.model_tag.as_str(), c.setting)).or_default().push(c);
        }
        for (&(model, setting), numerator) in &by_model {
            if !matches!(setting, Setting::LinearProbe | Setting::Peft) {
                continue;
            }
            let reference = match kind {
                EfficiencyKind::Pe => by_model.get(&(model, Setting::FullFt)),
                EfficiencyKind::Se => {
                    let b = baseline.as_deref().expect("resolved above");
                    by_model.get(&(b, Setting::Supervised))
                }
            };
            let Some(reference) = reference else { continue };
            let k = numerator[0].n_classes;
            if k < 2 {
                return Err(EfficiencyError::Invalid(format!("n_classes {k} for {model}")));
            }
            out.push(aggregate(kind, numerator, reference, chance_level(metric, k))?);
        }
    }
    Ok(out)
}
