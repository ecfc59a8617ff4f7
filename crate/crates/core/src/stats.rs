//! Paired nonparametric testing and multiple-comparison correction.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{check_len, Error, Result};

/// Largest effective sample size tested with the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

/// Paired observations, e.g. one metric of two methods over the same splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub values_a: Vec<f64>,
    pub values_b: Vec<f64>,
}

impl PairedSample {
    pub fn new(values_a: Vec<f64>, values_b: Vec<f64>) -> Result<Self> {
        check_len("paired values", values_a.len(), values_b.len())?;
        if values_a.iter().chain(&values_b).any(|v| !v.is_finite()) {
            return Err(Error::Domain("paired values must be finite".into()));
        }
        Ok(Self { values_a, values_b })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    pub method: PMethod,
}

impl WilcoxonResult {
    pub fn is_degenerate(&self) -> bool {
        self.method == PMethod::Degenerate
    }
}

/// Signed ranks of the non-zero differences, as doubled integer ranks
/// (average ranks of ties are half-integers) with a sign flag.
struct SignedRanks {
    doubled: Vec<u64>,
    positive: Vec<bool>,
    /// Sizes of tie groups among |d|.
    ties: Vec<usize>,
}

impl SignedRanks {
    fn new(pair: &PairedSample) -> Self {
        let mut diffs: Vec<f64> = pair
            .values_a
            .iter()
            .zip(&pair.values_b)
            .map(|(a, b)| a - b)
            .filter(|d| *d != 0.0)
            .collect();
        diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        let n = diffs.len();
        let mut doubled = vec![0; n];
        let mut ties = Vec::new();
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
                j += 1;
            }
            // Average of 1-based ranks i+1..=j+1, doubled.
            let r2 = (i + j + 2) as u64;
            doubled[i..=j].iter_mut().for_each(|r| *r = r2);
            ties.push(j - i + 1);
            i = j + 1;
        }
        Self {
            positive: diffs.iter().map(|d| *d > 0.0).collect(),
            doubled,
            ties,
        }
    }

    fn n(&self) -> usize {
        self.doubled.len()
    }

    /// Doubled W+.
    fn w_plus2(&self) -> u64 {
        self.doubled
            .iter()
            .zip(&self.positive)
            .filter(|(_, &p)| p)
            .map(|(r, _)| r)
            .sum()
    }

    fn total2(&self) -> u64 {
        self.doubled.iter().sum()
    }
}

/// Two-sided Wilcoxon signed-rank test of `values_a - values_b`.
///
/// Zero differences are dropped and tied magnitudes share their average
/// rank. Up to [`EXACT_MAX_N`] remaining pairs the p value comes from the
/// exact permutation distribution over all sign assignments; above that a
/// normal approximation with continuity and tie corrections is used. If
/// every difference is zero, `p = 1` and the method is
/// [`PMethod::Degenerate`].
pub fn wilcoxon_signed_rank(pair: &PairedSample) -> WilcoxonResult {
    let ranks = SignedRanks::new(pair);
    if ranks.n() == 0 {
        return WilcoxonResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: PMethod::Degenerate,
        };
    }
    if ranks.n() <= EXACT_MAX_N {
        exact_from_ranks(&ranks)
    } else {
        normal_from_ranks(&ranks)
    }
}

/// Exact p value regardless of size (the distribution is built by dynamic
/// programming over rank sums, so this stays cheap well beyond 25 pairs).
pub fn wilcoxon_exact(pair: &PairedSample) -> WilcoxonResult {
    let ranks = SignedRanks::new(pair);
    if ranks.n() == 0 {
        return wilcoxon_signed_rank(pair);
    }
    exact_from_ranks(&ranks)
}

/// Normal-approximation p value regardless of size.
pub fn wilcoxon_normal(pair: &PairedSample) -> WilcoxonResult {
    let ranks = SignedRanks::new(pair);
    if ranks.n() == 0 {
        return wilcoxon_signed_rank(pair);
    }
    normal_from_ranks(&ranks)
}

fn statistic(ranks: &SignedRanks) -> f64 {
    let wp = ranks.w_plus2();
    wp.min(ranks.total2() - wp) as f64 / 2.0
}

fn exact_from_ranks(ranks: &SignedRanks) -> WilcoxonResult {
    let total = ranks.total2() as usize;
    // counts[s] = number of sign assignments with doubled W+ = s
    let mut counts = vec![0.0_f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &ranks.doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all: f64 = counts.iter().sum();
    let w = ranks.w_plus2() as usize;
    let lower: f64 = counts[..=w].iter().sum();
    let upper: f64 = counts[w..].iter().sum();
    let p = (2.0 * lower.min(upper) / all).min(1.0);
    WilcoxonResult {
        statistic: statistic(ranks),
        p_value: p,
        n_effective: ranks.n(),
        method: PMethod::Exact,
    }
}

fn normal_from_ranks(ranks: &SignedRanks) -> WilcoxonResult {
    let n = ranks.n() as f64;
    let w = ranks.w_plus2() as f64 / 2.0;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ranks
        .ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    WilcoxonResult {
        statistic: statistic(ranks),
        p_value: p,
        n_effective: ranks.n(),
        method: PMethod::Normal,
    }
}

/// Bonferroni adjustment: `min(1, p * m)` for a family of `m` tests.
pub fn bonferroni(p_values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m < p_values.len() {
        return Err(Error::Domain(format!(
            "family size {m} smaller than the {} p values given",
            p_values.len()
        )));
    }
    Ok(p_values.iter().map(|p| (p * m as f64).min(1.0)).collect())
}
