use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{average_ranks, complete_pairs, tie_sizes, TestMethod, TestResult};
use crate::{Error, Result};

/// Largest number of non-zero differences for which the Wilcoxon p-value
/// comes from the exact null distribution.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped before ranking. With at most
/// [`WILCOXON_EXACT_MAX_N`] remaining pairs the p-value is exact (the null
/// distribution of W+ is built over tie-averaged ranks); above that the
/// tie-corrected normal approximation is used. `effect_size` is
/// r = |Z|/sqrt(N) with N the number of retained pairs, and Z always comes
/// from the normal approximation.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<TestResult> {
    let pairs = complete_pairs(x, y)?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no complete pairs".into()));
    }
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        let mut res = TestResult::new(TestMethod::WilcoxonExact, 0.0, 1.0, pairs.len());
        res.effect_size = Some(0.0);
        res.degenerate = true;
        return Ok(res);
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes(&abs)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum::<f64>()
        / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = if var > 0.0 { (w_plus - mean) / var.sqrt() } else { 0.0 };

    let (method, p) = if n <= WILCOXON_EXACT_MAX_N {
        (TestMethod::WilcoxonExact, exact_signed_rank_p(&ranks, w_plus))
    } else {
        let p = 2.0 * (1.0 - standard_normal().cdf(z.abs()));
        (TestMethod::WilcoxonNormal, p)
    };
    let mut res = TestResult::new(method, w_plus, p.min(1.0), n);
    res.effect_size = Some((z.abs() / nf.sqrt()).min(1.0));
    Ok(res)
}

/// Exact two-sided p for W+ given the (possibly tie-averaged) ranks.
///
/// Doubled ranks are integers, so the null distribution over the 2^n sign
/// assignments is a subset-sum count.
fn exact_signed_rank_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let all: f64 = counts.iter().sum();
    let obs = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=obs].iter().sum::<f64>() / all;
    let upper: f64 = counts[obs..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Friedman test over a subjects x conditions matrix, with Kendall's W as
/// the effect size.
///
/// Rows containing a non-finite cell are dropped. The statistic carries the
/// usual correction for within-row ties.
pub fn friedman(rows: &[Vec<f64>]) -> Result<TestResult> {
    let k = rows.first().map(Vec::len).unwrap_or(0);
    if k < 2 {
        return Err(Error::Argument(format!("friedman needs at least 2 conditions, got {k}")));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Argument("ragged condition matrix".into()));
    }
    let complete: Vec<&Vec<f64>> = rows.iter().filter(|r| r.iter().all(|v| v.is_finite())).collect();
    let n = complete.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} complete subjects, need at least 2")));
    }

    let kf = k as f64;
    let nf = n as f64;
    let mut rank_sums = vec![0.0; k];
    let mut ties = 0.0;
    for row in &complete {
        for (j, r) in average_ranks(row).into_iter().enumerate() {
            rank_sums[j] += r;
        }
        ties += tie_sizes(row)
            .into_iter()
            .map(|t| (t * t * t - t) as f64)
            .sum::<f64>();
    }
    let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * ss - 3.0 * nf * (kf + 1.0);
    let correction = 1.0 - ties / (nf * (kf * kf * kf - kf));
    let df = kf - 1.0;

    let (chi2, degenerate) = if correction <= 1e-12 {
        (0.0, true)
    } else {
        ((raw / correction).max(0.0), false)
    };
    let p = if chi2 > 0.0 {
        1.0 - ChiSquared::new(df).expect("df > 0").cdf(chi2)
    } else {
        1.0
    };
    let mut res = TestResult::new(TestMethod::Friedman, chi2, p, n);
    res.df = Some(df);
    res.effect_size = Some((chi2 / (nf * df)).clamp(0.0, 1.0));
    res.degenerate = degenerate;
    Ok(res)
}

/// Kolmogorov–Smirnov D = sup |F_a - F_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut sa: Vec<f64> = a.to_vec();
    let mut sb: Vec<f64> = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let v = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= v {
            i += 1;
        }
        while j < sb.len() && sb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS p-value (Kolmogorov distribution with the
/// Stephens small-sample adjustment).
pub fn ks_asymptotic_p(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    kolmogorov_q(lambda)
}

fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for j in 1..=100 {
        let jf = j as f64;
        let term = sign * 2.0 * (a2 * jf * jf).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev || term.abs() <= 1e-16 * sum.abs() {
            return sum.clamp(0.0, 1.0);
        }
        prev = term.abs();
        sign = -sign;
    }
    1.0
}

/// Two-sample KS test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS test needs two non-empty samples".into()));
    }
    let d = ks_statistic(a, b);
    let p = ks_asymptotic_p(d, a.len(), b.len());
    Ok(TestResult::new(TestMethod::KolmogorovSmirnov, d, p, a.len() + b.len()))
}
