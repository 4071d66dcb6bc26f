use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::SemanticNetwork;
use crate::graph::{best_partition_exhaustive, louvain as louvain_core};
use crate::stats::{wilcoxon_signed_rank, RngStream, TestResult};
use crate::{Error, Result};

/// Exhaustive search is run alongside Louvain up to this many nodes.
pub const EXHAUSTIVE_MAX_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub labels: BTreeMap<String, usize>,
    pub modularity: f64,
    pub n_communities: usize,
    /// For small graphs, whether Q equals the exhaustive optimum; `None`
    /// when the graph is too large to check.
    pub certified_optimal: Option<bool>,
}

/// Weighted Louvain with seeded node order.
pub fn louvain(net: &SemanticNetwork, resolution: f64, rng: &RngStream) -> Result<Partition> {
    if net.n_nodes() == 0 {
        return Err(Error::InsufficientData(format!("network `{}` is empty", net.label)));
    }
    let (names, g) = net.weighted_graph();
    let (labels, q) = louvain_core(&g, resolution, rng);
    let certified_optimal = if names.len() <= EXHAUSTIVE_MAX_NODES {
        let (_, best) = best_partition_exhaustive(&g, resolution)?;
        Some(q >= best - 1e-9)
    } else {
        None
    };
    Ok(Partition {
        n_communities: labels.iter().max().map_or(0, |m| m + 1),
        labels: names.into_iter().zip(labels).collect(),
        modularity: q,
        certified_optimal,
    })
}

pub fn write_partition(p: &Partition) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "community"]).expect("in-memory");
    for (n, c) in &p.labels {
        w.write_record([n.as_str(), &c.to_string()]).expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub node_jaccard: f64,
    /// |A \ B| / |A|
    pub node_unique_a: f64,
    pub node_unique_b: f64,
    /// Edge indices on the subgraphs induced by the shared nodes; `None`
    /// when those subgraphs have no edges.
    pub edge_jaccard: Option<f64>,
    pub edge_unique_a: Option<f64>,
    pub edge_unique_b: Option<f64>,
    pub shared_nodes: usize,
    pub shared_edges: usize,
}

fn set_indices<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Option<(f64, f64, f64, usize)> {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        return None;
    }
    let frac = |s: &BTreeSet<T>| if s.is_empty() { 0.0 } else { (s.len() - inter) as f64 / s.len() as f64 };
    Some((inter as f64 / union as f64, frac(a), frac(b), inter))
}

pub fn node_edge_overlap(a: &SemanticNetwork, b: &SemanticNetwork) -> Result<Overlap> {
    if a.n_nodes() == 0 || b.n_nodes() == 0 {
        return Err(Error::InsufficientData("overlap needs two non-empty networks".into()));
    }
    let (nj, nua, nub, shared) = set_indices(a.nodes(), b.nodes()).expect("non-empty");
    let common: BTreeSet<&String> = a.nodes().intersection(b.nodes()).collect();
    let induced = |n: &SemanticNetwork| -> BTreeSet<(String, String)> {
        n.edges()
            .filter(|(x, y, _)| common.contains(&x.to_string()) && common.contains(&y.to_string()))
            .map(|(x, y, _)| (x.to_string(), y.to_string()))
            .collect()
    };
    let (ea, eb) = (induced(a), induced(b));
    let edge = set_indices(&ea, &eb);
    Ok(Overlap {
        node_jaccard: nj,
        node_unique_a: nua,
        node_unique_b: nub,
        edge_jaccard: edge.map(|e| e.0),
        edge_unique_a: edge.map(|e| e.1),
        edge_unique_b: edge.map(|e| e.2),
        shared_nodes: shared,
        shared_edges: edge.map_or(0, |e| e.3),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityComparison {
    pub cues: Vec<String>,
    pub degree_a: Vec<f64>,
    pub degree_b: Vec<f64>,
    pub test: TestResult,
}

fn normalized_degree(net: &SemanticNetwork, node: &str) -> f64 {
    let n = net.n_nodes();
    if n < 2 {
        0.0
    } else {
        net.degree(node) as f64 / (n - 1) as f64
    }
}

/// Wilcoxon signed-rank on normalized degree of the shared cues present in
/// both networks.
pub fn compare_centrality(a: &SemanticNetwork, b: &SemanticNetwork, shared_cues: &BTreeSet<String>) -> Result<CentralityComparison> {
    let cues: Vec<String> = shared_cues.iter().filter(|c| a.contains(c) && b.contains(c)).cloned().collect();
    if cues.len() < 3 {
        return Err(Error::InsufficientData(format!("{} shared cues present in both networks, need 3", cues.len())));
    }
    let degree_a: Vec<f64> = cues.iter().map(|c| normalized_degree(a, c)).collect();
    let degree_b: Vec<f64> = cues.iter().map(|c| normalized_degree(b, c)).collect();
    let test = wilcoxon_signed_rank(&degree_a, &degree_b)?;
    Ok(CentralityComparison {
        cues,
        degree_a,
        degree_b,
        test,
    })
}

/// Keep the elements labelled in both maps, as parallel label vectors, and
/// report how many were dropped from either side.
pub fn align_labelings<A: Clone, B: Clone>(a: &BTreeMap<String, A>, b: &BTreeMap<String, B>) -> (Vec<A>, Vec<B>, usize) {
    let mut la = Vec::new();
    let mut lb = Vec::new();
    for (k, v) in a {
        if let Some(w) = b.get(k) {
            la.push(v.clone());
            lb.push(w.clone());
        }
    }
    let dropped = a.len() + b.len() - 2 * la.len();
    (la, lb, dropped)
}

/// Cell counts plus row and column margins.
type Contingency = (HashMap<(usize, usize), f64>, Vec<f64>, Vec<f64>);

fn contingency<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<Contingency> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Argument("labelings must be non-empty and of equal length".into()));
    }
    let mut ia: HashMap<&A, usize> = HashMap::new();
    let mut ib: HashMap<&B, usize> = HashMap::new();
    let mut table = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        let n = ia.len();
        let i = *ia.entry(x).or_insert(n);
        let n = ib.len();
        let j = *ib.entry(y).or_insert(n);
        *table.entry((i, j)).or_insert(0.0) += 1.0;
    }
    let mut rows = vec![0.0; ia.len()];
    let mut cols = vec![0.0; ib.len()];
    for (&(i, j), &c) in &table {
        rows[i] += c;
        cols[j] += c;
    }
    Ok((table, rows, cols))
}

/// Adjusted Rand index.
pub fn ari<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<f64> {
    let (table, rows, cols) = contingency(a, b)?;
    let c2 = |x: f64| x * (x - 1.0) / 2.0;
    let index: f64 = table.values().map(|&c| c2(c)).sum();
    let sa: f64 = rows.iter().map(|&x| c2(x)).sum();
    let sb: f64 = cols.iter().map(|&x| c2(x)).sum();
    let total = c2(a.len() as f64);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    if (max - expected).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VMeasure {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v: f64,
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts.iter().filter(|&&c| c > 0.0).map(|&c| -(c / n) * (c / n).ln()).sum()
}

/// Homogeneity, completeness and V with `a` as the reference classes and
/// `b` as the clusters (natural-log entropies).
pub fn v_measure<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<VMeasure> {
    let (table, rows, cols) = contingency(a, b)?;
    let n = a.len() as f64;
    let (hc, hk) = (entropy(&rows, n), entropy(&cols, n));
    // H(C|K) and H(K|C)
    let mut hc_k = 0.0;
    let mut hk_c = 0.0;
    for (&(i, j), &c) in &table {
        hc_k -= c / n * (c / cols[j]).ln();
        hk_c -= c / n * (c / rows[i]).ln();
    }
    let homogeneity = if hc > 0.0 { 1.0 - hc_k / hc } else { 1.0 };
    let completeness = if hk > 0.0 { 1.0 - hk_c / hk } else { 1.0 };
    let v = if homogeneity + completeness > 0.0 {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    } else {
        0.0
    };
    Ok(VMeasure {
        homogeneity: homogeneity.clamp(0.0, 1.0),
        completeness: completeness.clamp(0.0, 1.0),
        v: v.clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAgreement {
    pub ari: f64,
    pub v_measure: VMeasure,
    pub n: usize,
    pub dropped: usize,
}

/// ARI and V-measure of two node labelings on their shared nodes.
pub fn cluster_agreement<A, B>(reference: &BTreeMap<String, A>, other: &BTreeMap<String, B>) -> Result<ClusterAgreement>
where
    A: Clone + Eq + Hash,
    B: Clone + Eq + Hash,
{
    let (a, b, dropped) = align_labelings(reference, other);
    Ok(ClusterAgreement {
        ari: ari(&a, &b)?,
        v_measure: v_measure(&a, &b)?,
        n: a.len(),
        dropped,
    })
}
