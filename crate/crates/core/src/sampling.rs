//! Between-subject cross-validation folds and budget-constrained,
//! class-stratified training subsets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::EpochSet;
use crate::rng::derive_seed;

/// Fraction of a fold's training subjects held out for validation when the
/// fold does not name any.
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("too few subjects: need {needed}, have {got}")]
    TooFewSubjects { needed: usize, got: usize },
    #[error("subject `{subject}` cannot supply {needed} samples (has {available})")]
    InsufficientData {
        subject: String,
        needed: usize,
        available: usize,
    },
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CvScheme {
    Kfold(usize),
    Loso,
}

impl fmt::Display for CvScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvScheme::Kfold(k) => write!(f, "kfold{k}"),
            CvScheme::Loso => f.write_str("loso"),
        }
    }
}

impl FromStr for CvScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "loso" {
            return Ok(CvScheme::Loso);
        }
        s.strip_prefix("kfold")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| *k >= 2)
            .map(CvScheme::Kfold)
            .ok_or_else(|| format!("unknown cv scheme `{s}` (expected kfoldN with N >= 2, or loso)"))
    }
}

impl TryFrom<String> for CvScheme {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<CvScheme> for String {
    fn from(s: CvScheme) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_id: usize,
    pub train_subjects: Vec<String>,
    pub val_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub s_total: usize,
    pub n_subjects: usize,
    pub seed: u64,
}

fn sorted_unique(subjects: &[String]) -> Vec<String> {
    let mut s = subjects.to_vec();
    s.sort();
    s.dedup();
    s
}

/// Subject-disjoint folds. k-fold shuffles the sorted subject list with the
/// seed and cuts it into `k` near-equal test groups; LOSO tests each subject
/// once in sorted order. Validation subjects are left empty here, see
/// [`with_validation`].
pub fn make_folds(subjects: &[String], scheme: CvScheme, seed: u64) -> Result<Vec<FoldSpec>, SamplingError> {
    let subjects = sorted_unique(subjects);
    let n = subjects.len();
    let groups: Vec<Vec<String>> = match scheme {
        CvScheme::Loso => {
            if n < 2 {
                return Err(SamplingError::TooFewSubjects { needed: 2, got: n });
            }
            subjects.iter().map(|s| vec![s.clone()]).collect()
        }
        CvScheme::Kfold(k) => {
            if n < k || k < 2 {
                return Err(SamplingError::TooFewSubjects {
                    needed: k.max(2),
                    got: n,
                });
            }
            let mut shuffled = subjects.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (base, extra) = (n / k, n % k);
            let mut out = Vec::with_capacity(k);
            let mut it = shuffled.into_iter();
            for i in 0..k {
                let mut g: Vec<String> = it.by_ref().take(base + usize::from(i < extra)).collect();
                g.sort();
                out.push(g);
            }
            out
        }
    };
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(fold_id, test)| FoldSpec {
            fold_id,
            train_subjects: subjects.iter().filter(|s| !test.contains(s)).cloned().collect(),
            val_subjects: Vec::new(),
            test_subjects: test,
        })
        .collect())
}

/// Fill in validation subjects when a fold has none: a seeded draw of
/// `VALIDATION_FRACTION` of the training subjects, at least one.
pub fn with_validation(fold: &FoldSpec, seed: u64) -> Result<FoldSpec, SamplingError> {
    if !fold.val_subjects.is_empty() {
        return Ok(fold.clone());
    }
    let train = sorted_unique(&fold.train_subjects);
    if train.len() < 2 {
        return Err(SamplingError::TooFewSubjects {
            needed: 2,
            got: train.len(),
        });
    }
    let n_val = ((train.len() as f64 * VALIDATION_FRACTION).round() as usize).clamp(1, train.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[fold.fold_id as u64, 0x0076_616c]));
    let picked = sample(&mut rng, train.len(), n_val).into_vec();
    let mut val: Vec<String> = picked.iter().map(|&i| train[i].clone()).collect();
    val.sort();
    Ok(FoldSpec {
        fold_id: fold.fold_id,
        train_subjects: train.into_iter().filter(|s| !val.contains(s)).collect(),
        val_subjects: val,
        test_subjects: fold.test_subjects.clone(),
    })
}

/// Split `quota` over classes as evenly as their availability allows: every
/// class gets `min(available, level)` for the highest level that fits, and
/// what is left goes one each to the lowest-index classes that still have
/// spare samples. With enough samples everywhere this is the largest-remainder
/// split of `quota` over equal weights.
pub fn allocate_quota(quota: usize, available: &[usize]) -> Vec<usize> {
    let filled = |level: usize| available.iter().map(|&a| a.min(level)).sum::<usize>();
    let (mut lo, mut hi) = (0usize, available.iter().copied().max().unwrap_or(0));
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if filled(mid) <= quota {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut alloc: Vec<usize> = available.iter().map(|&a| a.min(lo)).collect();
    let mut left = quota - filled(lo);
    for (a, &cap) in alloc.iter_mut().zip(available) {
        if left == 0 {
            break;
        }
        if *a < cap {
            *a += 1;
            left -= 1;
        }
    }
    alloc
}

/// Per-subject totals: `s_total / n` each, the first `s_total % n` subjects
/// one more.
pub fn subject_quotas(s_total: usize, n_subjects: usize) -> Vec<usize> {
    (0..n_subjects)
        .map(|i| s_total / n_subjects + usize::from(i < s_total % n_subjects))
        .collect()
}

/// Draw exactly `budget.s_total` training epochs from `budget.n_subjects`
/// subjects of `train_subjects`, class-stratified within each subject.
pub fn sample_budget(
    set: &EpochSet,
    budget: &BudgetSpec,
    train_subjects: &[String],
) -> Result<EpochSet, SamplingError> {
    let k = set.n_classes();
    let train = sorted_unique(train_subjects);
    if budget.n_subjects == 0 {
        return Err(SamplingError::InvalidBudget("n_subjects must be >= 1".into()));
    }
    if budget.s_total < k {
        return Err(SamplingError::InvalidBudget(format!(
            "s_total {} smaller than class count {k}",
            budget.s_total
        )));
    }
    if budget.n_subjects > train.len() {
        return Err(SamplingError::TooFewSubjects {
            needed: budget.n_subjects,
            got: train.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut chosen: Vec<String> = sample(&mut rng, train.len(), budget.n_subjects)
        .into_iter()
        .map(|i| train[i].clone())
        .collect();
    chosen.sort();

    // subject -> class -> epoch indices (ascending id)
    let mut by_subject: BTreeMap<&str, Vec<Vec<usize>>> = BTreeMap::new();
    let mut order: Vec<usize> = (0..set.epochs.len()).collect();
    order.sort_by_key(|&i| set.epochs[i].id);
    for i in order {
        let e = &set.epochs[i];
        by_subject
            .entry(e.subject_id.as_str())
            .or_insert_with(|| vec![Vec::new(); k])[e.label]
            .push(i);
    }

    let mut picked = Vec::with_capacity(budget.s_total);
    for (subject, quota) in chosen.iter().zip(subject_quotas(budget.s_total, budget.n_subjects)) {
        let empty = vec![Vec::new(); k];
        let classes = by_subject.get(subject.as_str()).unwrap_or(&empty);
        let available: Vec<usize> = classes.iter().map(Vec::len).collect();
        let total: usize = available.iter().sum();
        if total < quota {
            return Err(SamplingError::InsufficientData {
                subject: subject.clone(),
                needed: quota,
                available: total,
            });
        }
        for (members, count) in classes.iter().zip(allocate_quota(quota, &available)) {
            picked.extend(sample(&mut rng, members.len(), count).into_iter().map(|j| members[j]));
        }
    }
    picked.sort_by_key(|&i| set.epochs[i].id);
    Ok(set.with_epochs(picked.into_iter().map(|i| set.epochs[i].clone()).collect()))
}
