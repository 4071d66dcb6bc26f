use rand::distributions::Distribution;
use statrs::distribution::Normal;

use super::ItemData;
use crate::stats::RngStream;
use crate::{Error, Result};

/// Draw `n` rows from an orthogonal linear factor model. `loadings[i]` lists
/// item `i`'s loadings on each factor; the unique variance makes every item
/// unit-variance.
pub fn simulate_factor_data(loadings: &[Vec<f64>], n: usize, rng: &RngStream) -> Result<ItemData> {
    let k = loadings.first().map_or(0, Vec::len);
    if loadings.iter().any(|l| l.len() != k) {
        return Err(Error::Argument("ragged loading matrix".into()));
    }
    let uniq: Vec<f64> = loadings
        .iter()
        .map(|l| {
            let common: f64 = l.iter().map(|x| x * x).sum();
            if common > 1.0 {
                Err(Error::Argument("communality above 1".into()))
            } else {
                Ok((1.0 - common).sqrt())
            }
        })
        .collect::<Result<_>>()?;
    let z = Normal::new(0.0, 1.0).expect("standard normal");
    let mut r = rng.rng();
    let rows = (0..n)
        .map(|_| {
            let f: Vec<f64> = (0..k).map(|_| z.sample(&mut r)).collect();
            loadings
                .iter()
                .zip(&uniq)
                .map(|(l, u)| l.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() + u * z.sample(&mut r))
                .collect()
        })
        .collect();
    let variables = (0..loadings.len()).map(|i| format!("i{:02}", i + 1)).collect();
    ItemData::new(variables, rows)
}

/// Loadings for `blocks` orthogonal blocks of `per_block` items each.
pub fn block_loadings(blocks: usize, per_block: usize, loading: f64) -> Vec<Vec<f64>> {
    (0..blocks * per_block)
        .map(|i| (0..blocks).map(|b| if i / per_block == b { loading } else { 0.0 }).collect())
        .collect()
}
