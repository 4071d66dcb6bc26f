use rand::Rng;
use rayon::prelude::*;

use super::RngStream;
use crate::{Error, Result};

/// Monte-Carlo p-value with add-one smoothing: `(1 + hits) / (1 + n)`.
pub fn smoothed_p(hits: usize, n_iter: usize) -> f64 {
    (1 + hits) as f64 / (1 + n_iter) as f64
}

/// Relative slack used when comparing permuted statistics with the observed
/// one, so that bit-level noise in equal statistics still counts as a tie.
const TIE_EPS: f64 = 1e-12;

/// Paired permutation test: each iteration independently swaps the two
/// members of every pair with probability 1/2 and recomputes `statistic`.
///
/// Returns `(1 + #{perm >= observed}) / (1 + n_iter)`. Iteration `i` draws
/// from `rng.substream(i)`, so the result does not depend on how rayon
/// schedules the work.
pub fn paired_permutation_p<T, F>(
    statistic: F,
    pairs: &[(T, T)],
    n_iter: usize,
    rng: RngStream,
) -> Result<f64>
where
    T: Sync,
    F: Fn(&[(&T, &T)]) -> f64 + Sync,
{
    if pairs.len() < 2 {
        return Err(Error::Argument(format!(
            "permutation test needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    if n_iter < 100 {
        return Err(Error::Argument(format!("n_iter must be >= 100, got {n_iter}")));
    }
    let identity: Vec<(&T, &T)> = pairs.iter().map(|(a, b)| (a, b)).collect();
    let observed = statistic(&identity);
    let threshold = observed - TIE_EPS * observed.abs().max(1.0);

    let hits: usize = (0..n_iter as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.substream(i).rng();
            let swapped: Vec<(&T, &T)> = pairs
                .iter()
                .map(|(a, b)| if r.gen::<bool>() { (b, a) } else { (a, b) })
                .collect();
            usize::from(statistic(&swapped) >= threshold)
        })
        .sum();
    Ok(smoothed_p(hits, n_iter))
}
