use serde::{Deserialize, Serialize};

use super::special::{standard_normal_sf, student_t_two_sided_p};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Wilcoxon,
    PairedT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    /// Exact for n <= 20 non-zero pairs, normal approximation above.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub test_kind: TestKind,
    /// `min(W+, W-)` for Wilcoxon, `t` for the paired t-test.
    pub statistic: f64,
    pub p_value: f64,
    pub n_pairs: usize,
    pub dropped_zero_pairs: usize,
    /// Set when the data carry no information (all differences zero).
    pub degenerate: bool,
    pub w_plus: Option<f64>,
    pub w_minus: Option<f64>,
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("paired lists of length {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("no pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite paired value".into()));
    }
    Ok(d)
}

/// Doubled average ranks of `|d|` (integers, ties share the mean rank) and
/// the tie group sizes.
fn doubled_ranks(abs: &[f64]) -> (Vec<u64>, Vec<u64>) {
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
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        ties.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks, ties)
}

/// Exact two-sided p: distribution of the positive rank sum over all 2^n
/// sign assignments, counted by dynamic programming on doubled ranks.
fn exact_p(ranks2: &[u64], w2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = 2f64.powi(ranks2.len() as i32);
    let tail: f64 = counts[..=w2 as usize].iter().sum();
    (2.0 * tail / all).min(1.0)
}

/// Normal approximation with tie-corrected variance and continuity
/// correction.
fn normal_p(n: usize, w: f64, ties: &[u64]) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((mean - w).abs() - 0.5) / var.sqrt();
    if z <= 0.0 {
        return 1.0;
    }
    (2.0 * standard_normal_sf(z)).min(1.0)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<ComparisonResult> {
    wilcoxon_signed_rank_with(a, b, WilcoxonMethod::Auto)
}

/// Wilcoxon signed-rank test on `a - b`. Zero differences are dropped; if
/// nothing is left the result is flagged degenerate with `p = 1`.
pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: WilcoxonMethod) -> Result<ComparisonResult> {
    let d = differences(a, b)?;
    let nonzero: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
    let dropped = d.len() - nonzero.len();
    if nonzero.is_empty() {
        return Ok(ComparisonResult {
            test_kind: TestKind::Wilcoxon,
            statistic: 0.0,
            p_value: 1.0,
            n_pairs: d.len(),
            dropped_zero_pairs: dropped,
            degenerate: true,
            w_plus: Some(0.0),
            w_minus: Some(0.0),
        });
    }
    let abs: Vec<f64> = nonzero.iter().map(|x| x.abs()).collect();
    let (ranks2, ties) = doubled_ranks(&abs);
    let w_plus2: u64 = nonzero.iter().zip(&ranks2).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total2: u64 = ranks2.iter().sum();
    let w_minus2 = total2 - w_plus2;
    let w2 = w_plus2.min(w_minus2);
    let n = nonzero.len();
    let use_exact = match method {
        WilcoxonMethod::Auto => n <= 20,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let p_value = if use_exact {
        exact_p(&ranks2, w2)
    } else {
        normal_p(n, w2 as f64 / 2.0, &ties)
    };
    Ok(ComparisonResult {
        test_kind: TestKind::Wilcoxon,
        statistic: w2 as f64 / 2.0,
        p_value,
        n_pairs: d.len(),
        dropped_zero_pairs: dropped,
        degenerate: false,
        w_plus: Some(w_plus2 as f64 / 2.0),
        w_minus: Some(w_minus2 as f64 / 2.0),
    })
}

/// Paired t-test on `a - b` with `n - 1` degrees of freedom.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<ComparisonResult> {
    let d = differences(a, b)?;
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidInput("paired t-test needs at least 2 pairs".into()));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    if var == 0.0 {
        return Err(Error::Degenerate("differences have zero variance".into()));
    }
    let t = mean / (var.sqrt() / nf.sqrt());
    Ok(ComparisonResult {
        test_kind: TestKind::PairedT,
        statistic: t,
        p_value: student_t_two_sided_p(t, nf - 1.0),
        n_pairs: n,
        dropped_zero_pairs: 0,
        degenerate: false,
        w_plus: None,
        w_minus: None,
    })
}
