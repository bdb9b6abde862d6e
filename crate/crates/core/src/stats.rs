//! One-sided paired tests for "first setting better than second".

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

/// Below this many non-zero differences the exact sign test is used.
pub const SIGN_TEST_BELOW: usize = 10;
/// Up to this many non-zero differences the signed-rank null distribution
/// is enumerated exactly.
const WILCOXON_EXACT_MAX: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: String,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

fn nonzero(diffs: &[f64]) -> Vec<f64> {
    diffs.iter().copied().filter(|d| *d != 0.0 && !d.is_nan()).collect()
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if n <= 120 {
        // Exact integer sum, one rounding at the end.
        let mut c: u128 = 1;
        let mut sum: u128 = 0;
        for i in 0..=n {
            if i >= k {
                sum += c;
            }
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        return sum as f64 / 2f64.powi(n as i32);
    }
    Binomial::new(0.5, n as u64).expect("valid binomial").sf(k as u64 - 1)
}

/// Exact one-sided sign test of `H1: median difference > 0`. Zero
/// differences are dropped; with none left the p-value is 0.5.
pub fn sign_test(diffs: &[f64]) -> TestResult {
    let d = nonzero(diffs);
    let n = d.len();
    let pos = d.iter().filter(|v| **v > 0.0).count();
    let p_value = if n == 0 { 0.5 } else { binomial_upper_tail(n, pos) };
    TestResult {
        test: "sign test (exact, one-sided)".into(),
        n,
        statistic: pos as f64,
        p_value,
    }
}

/// Midranks of `|d|`, doubled so ties stay integral.
fn doubled_ranks(abs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..abs.len()).collect();
    idx.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; abs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && abs[idx[j + 1]] == abs[idx[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged, times two.
        let r2 = (i + 1 + j + 1) as u64;
        for &t in &idx[i..=j] {
            ranks[t] = r2;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// One-sided Wilcoxon signed-rank test of `H1: differences tend to be > 0`.
/// Zero differences are dropped. The null distribution is enumerated
/// exactly (conditional on the midranks) for up to 50 differences, with a
/// tie- and continuity-corrected normal approximation beyond.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> TestResult {
    let d = nonzero(diffs);
    let n = d.len();
    if n == 0 {
        return TestResult {
            test: "wilcoxon signed-rank (one-sided)".into(),
            n,
            statistic: 0.0,
            p_value: 0.5,
        };
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = doubled_ranks(&abs);
    let w2: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| *r).sum();
    let statistic = w2 as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX {
        let max: usize = ranks.iter().sum::<u64>() as usize;
        let mut counts = vec![0.0f64; max + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let upper: f64 = counts[w2 as usize..].iter().sum();
        return TestResult {
            test: "wilcoxon signed-rank (exact, one-sided)".into(),
            n,
            statistic,
            p_value: upper / 2f64.powi(n as i32),
        };
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_adj: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_adj;
    let z = (statistic - mean - 0.5) / var.sqrt();
    let p_value = 1.0 - Normal::standard().cdf(z);
    TestResult {
        test: "wilcoxon signed-rank (normal approximation, one-sided)".into(),
        n,
        statistic,
        p_value,
    }
}

/// The paired test used for efficiency significance: exact sign test below
/// ten non-zero pairs, signed-rank test otherwise.
pub fn paired_one_sided(diffs: &[f64]) -> TestResult {
    if nonzero(diffs).len() < SIGN_TEST_BELOW {
        sign_test(diffs)
    } else {
        wilcoxon_signed_rank(diffs)
    }
}

/// Table marker: `**` below 0.001, `*` below 0.05.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}
