use super::{average_ranks, complete_pairs};
use crate::{Error, Result};

/// Largest |r| fed to `atanh` by [`fisher_z_mean`].
pub const FISHER_CLAMP: f64 = 1.0 - 1e-7;

fn pearson_pairs(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} complete pairs, need at least 3",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson_pairs(&complete_pairs(x, y)?)
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    let pairs = complete_pairs(x, y)?;
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} complete pairs, need at least 3",
            pairs.len()
        )));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let rx = average_ranks(&xs);
    let ry = average_ranks(&ys);
    let ranked: Vec<(f64, f64)> = rx.into_iter().zip(ry).collect();
    pearson_pairs(&ranked)
}

/// Mean correlation via Fisher's z: `tanh(mean(atanh(r)))`.
///
/// Perfect correlations are clamped to ±[`FISHER_CLAMP`] with a warning.
pub fn fisher_z_mean(rs: &[f64]) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::InsufficientData("no correlations to aggregate".into()));
    }
    let mut clamped = 0usize;
    let mut sum = 0.0;
    for &r in rs {
        if !r.is_finite() || r.abs() > 1.0 {
            return Err(Error::Argument(format!("correlation {r} outside [-1, 1]")));
        }
        let c = if r.abs() > FISHER_CLAMP {
            clamped += 1;
            FISHER_CLAMP.copysign(r)
        } else {
            r
        };
        sum += c.atanh();
    }
    if clamped > 0 {
        log::debug!("fisher_z_mean: clamped {clamped} perfect correlation(s) to ±{FISHER_CLAMP}");
    }
    let z = (sum / rs.len() as f64).tanh();
    // tanh(atanh(1 - 1e-7)) loses a few ulps; report an exact 1 back when
    // every input was perfect in the same direction.
    if clamped == rs.len() && rs.iter().all(|&r| r == rs[0]) {
        return Ok(rs[0]);
    }
    Ok(z)
}
