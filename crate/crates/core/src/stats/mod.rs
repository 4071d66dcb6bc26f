//! Statistical test battery shared by every analysis module.
//!
//! Paired inputs use complete-case deletion: a pair is dropped when either
//! side is non-finite (`NaN` marks a missing answer).

mod adjust;
mod correlation;
mod nonparametric;
mod parametric;
mod permutation;
mod rng;

pub use adjust::{bh_adjust, bonferroni_adjust};
pub use correlation::{fisher_z_mean, pearson, spearman, FISHER_CLAMP};
pub use nonparametric::{
    friedman, ks_asymptotic_p, ks_statistic, ks_two_sample, wilcoxon_signed_rank,
    WILCOXON_EXACT_MAX_N,
};
pub use parametric::{chi_square_2x2, paired_t, proportion_test, welch_t};
pub use permutation::{paired_permutation_p, smoothed_p};
pub use rng::RngStream;

use serde::{Deserialize, Serialize};

/// Which procedure produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    WilcoxonExact,
    WilcoxonNormal,
    Friedman,
    KolmogorovSmirnov,
    WelchT,
    PairedT,
    ChiSquare2x2,
    Pearson,
    Spearman,
    Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Wilcoxon: r = |Z|/sqrt(N). Friedman: Kendall's W.
    pub effect_size: Option<f64>,
    pub df: Option<f64>,
    pub n: usize,
    pub method: TestMethod,
    /// Set when the input carries no information (e.g. all paired
    /// differences zero); the p-value is then 1 by convention.
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci95: Option<(f64, f64)>,
}

impl TestResult {
    pub(crate) fn new(method: TestMethod, statistic: f64, p_value: f64, n: usize) -> Self {
        Self {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            effect_size: None,
            df: None,
            n,
            method,
            degenerate: false,
            ci95: None,
        }
    }
}

/// Pairs where both sides are finite.
pub fn complete_pairs(x: &[f64], y: &[f64]) -> crate::Result<Vec<(f64, f64)>> {
    if x.len() != y.len() {
        return Err(crate::Error::Argument(format!(
            "paired samples differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(&a, &b)| (a, b))
        .collect())
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of tie groups in `values`.
pub(crate) fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
