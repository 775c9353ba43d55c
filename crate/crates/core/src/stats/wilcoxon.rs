use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Result, StatsError};

/// Largest sample handled by exact enumeration.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    SignedRank,
    RankSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `W+` for the signed-rank test, `U` of the first sample for rank-sum.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    /// One-sided, alternative "first sample tends to be larger".
    pub p_greater: f64,
    /// One-sided, alternative "first sample tends to be smaller".
    pub p_less: f64,
    pub method: TestMethod,
    pub exact: bool,
}

/// Average ranks (1-based) plus the tie-group sizes.
pub(crate) fn mid_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

fn two_sided(p_greater: f64, p_less: f64) -> f64 {
    (2.0 * p_greater.min(p_less)).min(1.0)
}

fn normal_tails(stat: f64, mean: f64, var: f64) -> (f64, f64) {
    if var <= 0.0 {
        return (1.0, 1.0);
    }
    let z = (stat - mean) / var.sqrt();
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    (n.sf(z), n.cdf(z))
}

fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Paired test on `a[i] − b[i]`. Zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::EmptySample);
    }
    check_finite(a)?;
    check_finite(b)?;
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|&d| d != 0.0)
        .collect();
    if d.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = d.len();
    let (ranks, ties) = mid_ranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
    let w_plus: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, &x)| x > 0.0)
        .map(|(r, _)| r)
        .sum();

    let (p_greater, p_less, exact) = if n <= EXACT_LIMIT {
        // doubled ranks are integers
        let r2: Vec<i64> = ranks.iter().map(|r| (2.0 * r).round() as i64).collect();
        let obs = (2.0 * w_plus).round() as i64;
        let (mut ge, mut le) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            let s: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r2[i]).sum();
            ge += (s >= obs) as u64;
            le += (s <= obs) as u64;
        }
        let total = (1u64 << n) as f64;
        (ge as f64 / total, le as f64 / total, true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_sum(&ties) / 48.0;
        let (g, l) = normal_tails(w_plus, mean, var);
        (g, l, false)
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value: two_sided(p_greater, p_less),
        p_greater,
        p_less,
        method: TestMethod::SignedRank,
        exact,
    })
}

/// Mann-Whitney-Wilcoxon test for two independent samples.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    check_finite(a)?;
    check_finite(b)?;
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = mid_ranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;

    let (p_greater, p_less, exact) = if n <= EXACT_LIMIT {
        let r2: Vec<i64> = ranks.iter().map(|r| (2.0 * r).round() as i64).collect();
        let obs = (2.0 * r1).round() as i64;
        let (mut ge, mut le, mut total) = (0u64, 0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            let s: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r2[i]).sum();
            ge += (s >= obs) as u64;
            le += (s <= obs) as u64;
            total += 1;
        }
        (ge as f64 / total as f64, le as f64 / total as f64, true)
    } else {
        let (f1, f2, nf) = (n1 as f64, n2 as f64, n as f64);
        let mean = f1 * f2 / 2.0;
        let var = f1 * f2 / 12.0 * ((nf + 1.0) - tie_sum(&ties) / (nf * (nf - 1.0)));
        let (g, l) = normal_tails(u, mean, var);
        (g, l, false)
    };
    Ok(TestResult {
        statistic: u,
        p_value: two_sided(p_greater, p_less),
        p_greater,
        p_less,
        method: TestMethod::RankSum,
        exact,
    })
}
