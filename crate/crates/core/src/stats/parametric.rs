use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use super::{complete_pairs, mean, variance, TestMethod, TestResult};
use crate::{Error, Result};

fn t_two_sided(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Welch's unequal-variance t-test; the statistic is mean(b) - mean(a)
/// scaled, so a positive t means the second group is larger.
///
/// A group may have zero variance as long as the combined standard error
/// is positive.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData("welch_t needs n >= 2 in each group".into()));
    }
    let (va, vb) = (variance(a), variance(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        return Err(Error::Argument("welch_t: both groups have zero variance".into()));
    }
    let diff = mean(b) - mean(a);
    let t = diff / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let mut res = TestResult::new(TestMethod::WelchT, t, t_two_sided(t, df), a.len() + b.len());
    res.df = Some(df);
    res.effect_size = Some(diff);
    let q = StudentsT::new(0.0, 1.0, df).expect("df").inverse_cdf(0.975);
    res.ci95 = Some((diff - q * se2.sqrt(), diff + q * se2.sqrt()));
    Ok(res)
}

/// Paired t-test on `y - x`.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    let pairs = complete_pairs(x, y)?;
    if pairs.len() < 2 {
        return Err(Error::InsufficientData("paired_t needs at least 2 complete pairs".into()));
    }
    let d: Vec<f64> = pairs.iter().map(|(a, b)| b - a).collect();
    let n = d.len() as f64;
    let md = mean(&d);
    let sd = variance(&d).sqrt();
    if sd == 0.0 {
        return Err(Error::Argument("paired_t: differences have zero variance".into()));
    }
    let se = sd / n.sqrt();
    let t = md / se;
    let df = n - 1.0;
    let mut res = TestResult::new(TestMethod::PairedT, t, t_two_sided(t, df), d.len());
    res.df = Some(df);
    res.effect_size = Some(md);
    let q = StudentsT::new(0.0, 1.0, df).expect("df").inverse_cdf(0.975);
    res.ci95 = Some((md - q * se, md + q * se));
    Ok(res)
}

/// Pearson chi-square on a 2x2 table, no continuity correction.
pub fn chi_square_2x2(counts: [[f64; 2]; 2]) -> Result<TestResult> {
    if counts.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::Argument("contingency counts must be non-negative".into()));
    }
    let rows = [counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]];
    let cols = [counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]];
    let total = rows[0] + rows[1];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return Err(Error::InsufficientData("2x2 table has an empty margin".into()));
    }
    let mut chi2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] * cols[j] / total;
            chi2 += (counts[i][j] - e).powi(2) / e;
        }
    }
    let p = 1.0 - ChiSquared::new(1.0).expect("df").cdf(chi2);
    let mut res = TestResult::new(TestMethod::ChiSquare2x2, chi2, p, total as usize);
    res.df = Some(1.0);
    // difference in success proportions, second row minus first
    res.effect_size = Some(counts[1][0] / rows[1] - counts[0][0] / rows[0]);
    Ok(res)
}

/// One-sample z-test of a proportion against `null`, with a Wilson 95%
/// interval. `effect_size` is the observed proportion minus `null`.
pub fn proportion_test(successes: usize, n: usize, null: f64) -> Result<TestResult> {
    if n == 0 || successes > n {
        return Err(Error::Argument(format!("invalid proportion {successes}/{n}")));
    }
    if !(0.0..1.0).contains(&null) || null == 0.0 {
        return Err(Error::Argument(format!("null proportion {null} outside (0, 1)")));
    }
    let nf = n as f64;
    let phat = successes as f64 / nf;
    let z = (phat - null) / (null * (1.0 - null) / nf).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = 2.0 * (1.0 - normal.cdf(z.abs()));
    let zc = normal.inverse_cdf(0.975);
    let denom = 1.0 + zc * zc / nf;
    let centre = (phat + zc * zc / (2.0 * nf)) / denom;
    let half = zc * (phat * (1.0 - phat) / nf + zc * zc / (4.0 * nf * nf)).sqrt() / denom;
    let mut res = TestResult::new(TestMethod::Proportion, z, p, n);
    res.effect_size = Some(phat - null);
    res.ci95 = Some((centre - half, centre + half));
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn welch_identical_groups() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn welch_zero_variance_both() {
        assert!(welch_t(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn welch_hand_values() {
        // mean diff 13/3, se^2 = (1/3)/3 -> se = 1/3, t = 13, df = 2
        let r = welch_t(&[10.0, 10.0, 10.0], &[14.0, 14.0, 15.0]).unwrap();
        assert_abs_diff_eq!(r.statistic, 13.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.df.unwrap(), 2.0, epsilon = 1e-9);
        // two-sided t(2) tail at 13: 1 - 13/sqrt(171)
        assert_abs_diff_eq!(r.p_value, 1.0 - 13.0 / 171f64.sqrt(), epsilon = 1e-9);
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn chi_square_hand_value() {
        let r = chi_square_2x2([[10.0, 0.0], [0.0, 10.0]]).unwrap();
        assert_abs_diff_eq!(r.statistic, 20.0, epsilon = 1e-12);
        assert!(chi_square_2x2([[0.0, 0.0], [1.0, 1.0]]).is_err());
        assert!(chi_square_2x2([[-1.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn paired_t_sign() {
        let r = paired_t(&[1.0, 2.0, 3.0], &[2.0, 3.5, 4.0]).unwrap();
        assert!(r.statistic > 0.0);
        assert!(paired_t(&[1.0, 2.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn proportion_wilson() {
        let r = proportion_test(50, 100, 0.5).unwrap();
        assert_eq!(r.statistic, 0.0);
        let (lo, hi) = r.ci95.unwrap();
        assert!(lo < 0.5 && hi > 0.5);
        assert!(proportion_test(3, 2, 0.5).is_err());
    }
}
