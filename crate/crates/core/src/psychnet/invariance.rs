use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::glasso::{ebic_select, EbicOptions, GaussianGraphModel, ItemData};
use crate::stats::{bh_adjust, smoothed_p, RngStream};
use crate::{Error, Result};

/// Sum of absolute partial correlations from each item to the other
/// members of its community.
pub fn network_loadings(model: &GaussianGraphModel, labels: &[usize]) -> Result<Vec<f64>> {
    let p = model.n_vars();
    if labels.len() != p {
        return Err(Error::Argument(format!("partition covers {} items, model has {p}", labels.len())));
    }
    Ok((0..p)
        .map(|i| {
            (0..p)
                .filter(|&j| j != i && labels[j] == labels[i])
                .map(|j| model.pcor(i, j).abs())
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceOptions {
    pub n_perm: usize,
    pub alpha: f64,
    pub ebic: EbicOptions,
}

impl Default for InvarianceOptions {
    fn default() -> Self {
        Self {
            n_perm: 1000,
            alpha: 0.05,
            ebic: EbicOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub item: String,
    /// Community, numbered from 1.
    pub dimension: usize,
    pub loading_a: f64,
    pub loading_b: f64,
    /// loading_a - loading_b
    pub difference: f64,
    pub p_raw: f64,
    pub p_bh: f64,
    pub noninvariant: bool,
    /// "A > B" or "A < B" when noninvariant.
    pub direction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub items: Vec<InvarianceRow>,
    pub n_perm: usize,
    /// Permutations whose re-estimation failed (left out of the p-values).
    pub n_failed: usize,
    pub alpha: f64,
    pub warnings: Vec<String>,
}

impl InvarianceReport {
    pub fn flagged(&self) -> Vec<&str> {
        self.items.iter().filter(|r| r.noninvariant).map(|r| r.item.as_str()).collect()
    }
}

fn loading_difference(a: &ItemData, b: &ItemData, labels: &[usize], opts: &EbicOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let la = network_loadings(&ebic_select(a, None, opts)?, labels)?;
    let lb = network_loadings(&ebic_select(b, None, opts)?, labels)?;
    Ok((la, lb))
}

/// Permutation test of per-item network loading differences between two
/// groups under a fixed community partition.
pub fn metric_invariance(
    a: &ItemData,
    b: &ItemData,
    labels: &[usize],
    names: (&str, &str),
    opts: &InvarianceOptions,
    rng: &RngStream,
) -> Result<InvarianceReport> {
    if a.variables != b.variables {
        return Err(Error::Argument("groups must share the same item set".into()));
    }
    if opts.n_perm == 0 {
        return Err(Error::Argument("n_perm must be positive".into()));
    }
    let p = a.n_vars();
    let mut warnings = Vec::new();
    let (ca, cb) = (a.complete_rows().len(), b.complete_rows().len());
    for (name, n) in [(names.0, ca), (names.1, cb)] {
        if n < p {
            let w = format!("group {name} has {n} complete rows for {p} items");
            log::warn!("{w}");
            warnings.push(w);
        }
    }
    let (la, lb) = loading_difference(a, b, labels, &opts.ebic)?;
    let observed: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x - y).collect();

    let pooled: Vec<Vec<f64>> = a.rows.iter().chain(&b.rows).cloned().collect();
    let na = a.rows.len();
    let perms: Vec<Option<Vec<f64>>> = (0..opts.n_perm as u64)
        .into_par_iter()
        .map(|i| {
            let mut idx: Vec<usize> = (0..pooled.len()).collect();
            idx.shuffle(&mut rng.substream(i).rng());
            let pa = ItemData {
                variables: a.variables.clone(),
                rows: idx[..na].iter().map(|&k| pooled[k].clone()).collect(),
            };
            let pb = ItemData {
                variables: a.variables.clone(),
                rows: idx[na..].iter().map(|&k| pooled[k].clone()).collect(),
            };
            loading_difference(&pa, &pb, labels, &opts.ebic)
                .ok()
                .map(|(x, y)| x.iter().zip(&y).map(|(u, v)| u - v).collect())
        })
        .collect();
    let ok: Vec<&Vec<f64>> = perms.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::InsufficientData("every permutation failed to re-estimate".into()));
    }
    let p_raw: Vec<f64> = (0..p)
        .map(|i| {
            let obs = observed[i].abs();
            let hits = ok.iter().filter(|d| d[i].abs() >= obs - 1e-12 * obs.max(1.0)).count();
            smoothed_p(hits, ok.len())
        })
        .collect();
    let p_bh = bh_adjust(&p_raw)?;
    let items = (0..p)
        .map(|i| {
            let noninvariant = p_bh[i] < opts.alpha;
            InvarianceRow {
                item: a.variables[i].clone(),
                dimension: labels[i] + 1,
                loading_a: la[i],
                loading_b: lb[i],
                difference: observed[i],
                p_raw: p_raw[i],
                p_bh: p_bh[i],
                noninvariant,
                direction: noninvariant.then(|| if observed[i] > 0.0 { "A > B" } else { "A < B" }.to_string()),
            }
        })
        .collect();
    Ok(InvarianceReport {
        group_a: names.0.to_string(),
        group_b: names.1.to_string(),
        n_a: na,
        n_b: b.rows.len(),
        items,
        n_perm: opts.n_perm,
        n_failed: perms.len() - ok.len(),
        alpha: opts.alpha,
        warnings,
    })
}
