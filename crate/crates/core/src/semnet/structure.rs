use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SemanticNetwork;
use crate::stats::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    /// Mean local clustering over all nodes; nodes of degree < 2 count as 0.
    pub clustering: f64,
    /// Mean shortest path length over ordered node pairs of the largest
    /// connected component.
    pub path_length: f64,
    pub lcc_size: usize,
}

pub(crate) fn clustering(adj: &[Vec<usize>]) -> f64 {
    if adj.is_empty() {
        return 0.0;
    }
    let sets: Vec<HashSet<usize>> = adj.iter().map(|l| l.iter().copied().collect()).collect();
    let total: f64 = adj
        .iter()
        .map(|nb| {
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (x, &u) in nb.iter().enumerate() {
                for &v in &nb[x + 1..] {
                    if sets[u].contains(&v) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .sum();
    total / adj.len() as f64
}

fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut out = Vec::new();
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    q.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Largest component; among equally large ones the one whose sorted member
/// list is lexicographically smallest. Indices follow sorted node names, so
/// comparing index lists compares name lists.
pub(crate) fn largest_component(adj: &[Vec<usize>]) -> Vec<usize> {
    components(adj)
        .into_iter()
        .fold(None::<Vec<usize>>, |best, c| match best {
            Some(b) if b.len() > c.len() || (b.len() == c.len() && b <= c) => Some(b),
            _ => Some(c),
        })
        .unwrap_or_default()
}

pub(crate) fn mean_path_length(adj: &[Vec<usize>], comp: &[usize]) -> Option<f64> {
    if comp.len() < 2 {
        return None;
    }
    let sum: u64 = comp
        .par_iter()
        .map(|&s| {
            let mut dist = vec![u32::MAX; adj.len()];
            dist[s] = 0;
            let mut q = VecDeque::from([s]);
            let mut acc = 0u64;
            while let Some(u) = q.pop_front() {
                acc += dist[u] as u64;
                for &v in &adj[u] {
                    if dist[v] == u32::MAX {
                        dist[v] = dist[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            acc
        })
        .sum();
    let n = comp.len() as f64;
    Some(sum as f64 / (n * (n - 1.0)))
}

fn stats_from(adj: &[Vec<usize>]) -> Result<(f64, f64, usize)> {
    let lcc = largest_component(adj);
    let l = mean_path_length(adj, &lcc)
        .ok_or_else(|| Error::InsufficientData("largest connected component has fewer than 2 nodes".into()))?;
    Ok((clustering(adj), l, lcc.len()))
}

/// Clustering and path length on the unweighted skeleton.
pub fn global_stats(net: &SemanticNetwork) -> Result<GlobalStats> {
    if net.n_nodes() == 0 {
        return Err(Error::InsufficientData(format!("network `{}` is empty", net.label)));
    }
    let (_, adj) = net.skeleton();
    let (c, l, lcc) = stats_from(&adj)?;
    Ok(GlobalStats {
        n_nodes: net.n_nodes(),
        n_edges: net.n_edges(),
        clustering: c,
        path_length: l,
        lcc_size: lcc,
    })
}

/// Double-edge swaps on an unweighted edge list over `0..n`; returns the
/// rewired edge list. `10 * |E|` swaps are attempted; swaps creating a
/// self-loop or a duplicate edge are rejected.
pub(crate) fn rewire_edges(edges: &[(usize, usize)], rng: &RngStream) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let m = edges.len();
    if m < 2 {
        return edges;
    }
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let mut r = rng.rng();
    for _ in 0..10 * m {
        let i = r.gen_range(0..m);
        let j = r.gen_range(0..m);
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (c, d) = if r.gen::<bool>() { edges[j] } else { (edges[j].1, edges[j].0) };
        // (a,b),(c,d) -> (a,d),(c,b)
        if a == d || c == b {
            continue;
        }
        let e1 = (a.min(d), a.max(d));
        let e2 = (c.min(b), c.max(b));
        if e1 == e2 || present.contains(&e1) || present.contains(&e2) {
            continue;
        }
        present.remove(&edges[i]);
        present.remove(&edges[j]);
        present.insert(e1);
        present.insert(e2);
        edges[i] = e1;
        edges[j] = e2;
    }
    edges.sort_unstable();
    edges
}

/// Degree-preserving randomization; the result is unweighted (weight 1).
pub fn degree_preserving_rewire(net: &SemanticNetwork, rng: &RngStream) -> Result<SemanticNetwork> {
    if net.n_edges() < 2 {
        return Err(Error::InsufficientData("rewiring needs at least 2 edges".into()));
    }
    let (names, edges) = index_edges(net);
    let mut out = SemanticNetwork::new(format!("{} (rewired)", net.label));
    for n in &names {
        out.add_node(n);
    }
    for (a, b) in rewire_edges(&edges, rng) {
        out.set_edge(&names[a], &names[b], 1);
    }
    Ok(out)
}

fn index_edges(net: &SemanticNetwork) -> (Vec<String>, Vec<(usize, usize)>) {
    let (names, adj) = net.skeleton();
    let edges = adj
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
        .collect();
    (names, edges)
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallWorldStats {
    pub c: f64,
    pub l: f64,
    pub c_rand: f64,
    pub l_rand: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub n_random: usize,
}

/// Small-world coefficients against `n_random` degree-preserving nulls,
/// each drawn from its own substream of `rng`.
pub fn small_world(net: &SemanticNetwork, n_random: usize, rng: &RngStream) -> Result<SmallWorldStats> {
    if n_random == 0 {
        return Err(Error::Argument("n_random must be positive".into()));
    }
    let (names, edges) = index_edges(net);
    let adj = adjacency(names.len(), &edges);
    let (c, l, lcc) = stats_from(&adj)?;
    if lcc < 3 {
        return Err(Error::InsufficientData("largest connected component has fewer than 3 nodes".into()));
    }
    let nulls: Vec<(f64, f64)> = (0..n_random as u64)
        .into_par_iter()
        .map(|i| {
            let rewired = rewire_edges(&edges, &rng.substream(i));
            let adj = adjacency(names.len(), &rewired);
            let (c, l, _) = stats_from(&adj).expect("rewiring keeps an edge");
            (c, l)
        })
        .collect();
    let c_rand = nulls.iter().map(|x| x.0).sum::<f64>() / n_random as f64;
    let l_rand = nulls.iter().map(|x| x.1).sum::<f64>() / n_random as f64;
    if c_rand <= 0.0 {
        return Err(Error::InsufficientData("random networks have zero clustering; gamma undefined".into()));
    }
    let gamma = c / c_rand;
    let lambda = l / l_rand;
    Ok(SmallWorldStats {
        c,
        l,
        c_rand,
        l_rand,
        gamma,
        lambda,
        sigma: gamma / lambda,
        n_random,
    })
}
