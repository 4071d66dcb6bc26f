use std::collections::BTreeMap;

use pathfinding::matrix::Matrix;
use pathfinding::prelude::kuhn_munkres;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::glasso::{correlation_matrix, ebic_select, EbicOptions, GaussianGraphModel, ItemData};
use super::walktrap::walktrap;
use crate::graph::{louvain, WeightedGraph};
use crate::stats::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgaOptions {
    pub ebic: EbicOptions,
    pub walktrap_steps: usize,
    /// Run Louvain on the absolute correlation matrix first and report a
    /// single dimension when it finds one community.
    pub unidimensional_check: bool,
    pub louvain_seed: u64,
}

impl Default for EgaOptions {
    fn default() -> Self {
        Self {
            ebic: EbicOptions::default(),
            walktrap_steps: 4,
            unidimensional_check: true,
            louvain_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgaMethod {
    Walktrap,
    Unidimensional,
    /// The network had no edges; every item is its own community.
    EmptyNetwork,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgaResult {
    pub model: GaussianGraphModel,
    /// Community per variable, in variable order, numbered from 0.
    pub labels: Vec<usize>,
    pub n_dims: usize,
    pub modularity: f64,
    pub method: EgaMethod,
    pub degenerate: bool,
}

impl EgaResult {
    pub fn partition(&self) -> BTreeMap<String, usize> {
        self.model.variables.iter().cloned().zip(self.labels.iter().copied()).collect()
    }
}

fn n_labels(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

/// Glasso network selected by EBIC, then walktrap communities.
pub fn ega(data: &ItemData, opts: &EgaOptions) -> Result<EgaResult> {
    if data.n_vars() < 2 {
        return Err(Error::InsufficientData("EGA needs at least 2 variables".into()));
    }
    let model = ebic_select(data, None, &opts.ebic)?;
    let p = model.n_vars();
    if model.n_edges() == 0 {
        return Ok(EgaResult {
            labels: (0..p).collect(),
            n_dims: p,
            modularity: 0.0,
            method: EgaMethod::EmptyNetwork,
            degenerate: true,
            model,
        });
    }
    if opts.unidimensional_check {
        let (r, _) = correlation_matrix(data)?;
        let mut g = WeightedGraph::new(p);
        for i in 0..p {
            for j in i + 1..p {
                g.add_edge(i, j, r[(i, j)].abs())?;
            }
        }
        let (labels, _) = louvain(&g, 1.0, &RngStream::new(opts.louvain_seed));
        if n_labels(&labels) == 1 {
            return Ok(EgaResult {
                labels: vec![0; p],
                n_dims: 1,
                modularity: 0.0,
                method: EgaMethod::Unidimensional,
                degenerate: false,
                model,
            });
        }
    }
    let (labels, q) = walktrap(&model, opts.walktrap_steps)?;
    Ok(EgaResult {
        n_dims: n_labels(&labels),
        labels,
        modularity: q,
        method: EgaMethod::Walktrap,
        degenerate: false,
        model,
    })
}

/// Relabel `other` onto `reference` by maximum-overlap matching; clusters
/// without a partner get fresh labels above the reference range.
pub fn align_to_reference(reference: &[usize], other: &[usize]) -> Vec<usize> {
    let kr = n_labels(reference);
    let ko = n_labels(other);
    let k = kr.max(ko);
    if k == 0 {
        return Vec::new();
    }
    let mut overlap = Matrix::new(k, k, 0i64);
    for (&r, &o) in reference.iter().zip(other) {
        overlap[(o, r)] += 1;
    }
    let (_, assign) = kuhn_munkres(&overlap);
    let map: Vec<usize> = (0..ko).map(|o| if assign[o] < kr { assign[o] } else { kr + o }).collect();
    other.iter().map(|&o| map[o]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// Rows drawn with replacement.
    Nonparametric,
    /// The sample itself every time (diagnostic).
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Removal {
    /// Drop every unstable item of a round at once.
    Batch,
    /// Drop only the least stable item per round.
    OneAtATime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootOptions {
    pub n_boot: usize,
    pub threshold: f64,
    pub removal: Removal,
    pub resampling: Resampling,
    pub ega: EgaOptions,
}

impl Default for BootOptions {
    fn default() -> Self {
        Self {
            n_boot: 500,
            threshold: 0.70,
            removal: Removal::Batch,
            resampling: Resampling::Nonparametric,
            ega: EgaOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRound {
    pub rates: BTreeMap<String, f64>,
    pub n_failed: usize,
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Replication rates of the retained items in the final round.
    pub rates: BTreeMap<String, f64>,
    pub removed_items: Vec<String>,
    pub final_partition: BTreeMap<String, usize>,
    pub n_dims: usize,
    pub rounds: Vec<StabilityRound>,
    pub n_boot: usize,
    pub threshold: f64,
    pub resampling: Resampling,
}

fn item_rates(data: &ItemData, reference: &[usize], opts: &BootOptions, rng: &RngStream) -> Result<(Vec<f64>, usize)> {
    let n = data.rows.len();
    let fits: Vec<Option<Vec<usize>>> = (0..opts.n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let sample = match opts.resampling {
                Resampling::Identity => data.clone(),
                Resampling::Nonparametric => {
                    let mut r = rng.substream(b).rng();
                    let idx: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();
                    data.select_rows(&idx)
                }
            };
            ega(&sample, &opts.ega).ok().map(|e| align_to_reference(reference, &e.labels))
        })
        .collect();
    let ok: Vec<&Vec<usize>> = fits.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::InsufficientData("every bootstrap EGA failed".into()));
    }
    let rates = (0..data.n_vars())
        .map(|i| ok.iter().filter(|l| l[i] == reference[i]).count() as f64 / ok.len() as f64)
        .collect();
    Ok((rates, fits.len() - ok.len()))
}

/// Item stability by bootstrap EGA with iterative removal of items whose
/// replication rate is below the threshold.
pub fn boot_ega(data: &ItemData, opts: &BootOptions, rng: &RngStream) -> Result<StabilityReport> {
    if opts.n_boot < 100 {
        return Err(Error::Argument(format!("n_boot must be at least 100, got {}", opts.n_boot)));
    }
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(Error::Argument("threshold must be in [0, 1]".into()));
    }
    let mut keep: Vec<usize> = (0..data.n_vars()).collect();
    let mut rounds = Vec::new();
    let mut removed_items = Vec::new();
    let mut round = 0u64;
    loop {
        let current = data.select_vars(&keep);
        let reference = ega(&current, &opts.ega)?;
        let (rates, n_failed) = item_rates(&current, &reference.labels, opts, &rng.substream(round))?;
        round += 1;
        let mut unstable: Vec<usize> = (0..keep.len()).filter(|&i| rates[i] < opts.threshold).collect();
        if opts.removal == Removal::OneAtATime && unstable.len() > 1 {
            let worst = *unstable
                .iter()
                .min_by(|&&a, &&b| rates[a].total_cmp(&rates[b]).then(a.cmp(&b)))
                .expect("non-empty");
            unstable = vec![worst];
        }
        let removed: Vec<String> = unstable.iter().map(|&i| current.variables[i].clone()).collect();
        let rate_map: BTreeMap<String, f64> = current.variables.iter().cloned().zip(rates.iter().copied()).collect();
        rounds.push(StabilityRound {
            rates: rate_map.clone(),
            n_failed,
            removed: removed.clone(),
        });
        if unstable.is_empty() {
            return Ok(StabilityReport {
                rates: rate_map,
                removed_items,
                final_partition: reference.partition(),
                n_dims: reference.n_dims,
                rounds,
                n_boot: opts.n_boot,
                threshold: opts.threshold,
                resampling: opts.resampling,
            });
        }
        removed_items.extend(removed);
        keep = keep
            .iter()
            .enumerate()
            .filter(|(i, _)| !unstable.contains(i))
            .map(|(_, &k)| k)
            .collect();
        if keep.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "only {} stable item(s) left after removing {}",
                keep.len(),
                removed_items.join(", ")
            )));
        }
    }
}
