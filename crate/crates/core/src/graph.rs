//! Weighted undirected graphs on `0..n` and modularity-based community
//! detection shared by the network modules.

use rand::seq::SliceRandom;

use crate::stats::RngStream;
use crate::{Error, Result};

/// Symmetric weighted adjacency. `self_weight[i]` is the diagonal entry
/// `A_ii`; an undirected self-loop of weight `w` contributes `2w`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_weight: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            self_weight: vec![0.0; n],
        }
    }

    /// Build from undirected `(i, j, w)` triples; repeated pairs accumulate.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut g = Self::new(n);
        for (i, j, w) in edges {
            g.add_edge(i, j, w)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        let n = self.len();
        if i >= n || j >= n {
            return Err(Error::Argument(format!("edge ({i}, {j}) outside 0..{n}")));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::Argument(format!("edge ({i}, {j}) has invalid weight {w}")));
        }
        if w == 0.0 {
            return Ok(());
        }
        if i == j {
            self.self_weight[i] += 2.0 * w;
            return Ok(());
        }
        for (a, b) in [(i, j), (j, i)] {
            match self.adj[a].iter_mut().find(|(k, _)| *k == b) {
                Some(e) => e.1 += w,
                None => self.adj[a].push((b, w)),
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn self_weight(&self, i: usize) -> f64 {
        self.self_weight[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|e| e.1).sum::<f64>() + self.self_weight[i]
    }

    /// Sum of all degrees (twice the total edge weight).
    pub fn total_degree(&self) -> f64 {
        (0..self.len()).map(|i| self.degree(i)).sum()
    }

    pub fn edge_weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.self_weight[i];
        }
        self.adj[i].iter().find(|(k, _)| *k == j).map_or(0.0, |e| e.1)
    }
}

/// Newman modularity of `labels` with resolution `gamma`; 0 for a graph
/// without edges.
pub fn modularity(g: &WeightedGraph, labels: &[usize], gamma: f64) -> f64 {
    let m2 = g.total_degree();
    if m2 <= 0.0 {
        return 0.0;
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut inside = vec![0.0; k];
    let mut tot = vec![0.0; k];
    for i in 0..g.len() {
        let c = labels[i];
        tot[c] += g.degree(i);
        inside[c] += g.self_weight(i);
        for &(j, w) in g.neighbors(i) {
            if labels[j] == c {
                inside[c] += w;
            }
        }
    }
    inside.iter().zip(&tot).map(|(a, t)| a / m2 - gamma * (t / m2).powi(2)).sum()
}

/// Relabel so communities are numbered by first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// One level of local moves. Returns true if any node moved.
fn local_moves(g: &WeightedGraph, labels: &mut [usize], gamma: f64, order: &[usize]) -> bool {
    let n = g.len();
    let m2 = g.total_degree();
    let deg: Vec<f64> = (0..n).map(|i| g.degree(i)).collect();
    let mut tot = vec![0.0; n];
    for i in 0..n {
        tot[labels[i]] += deg[i];
    }
    let mut moved_any = false;
    let mut link = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    loop {
        let mut moved = false;
        for &i in order {
            let own = labels[i];
            touched.clear();
            for &(j, w) in g.neighbors(i) {
                let c = labels[j];
                if link[c] == 0.0 && !touched.contains(&c) {
                    touched.push(c);
                }
                link[c] += w;
            }
            tot[own] -= deg[i];
            let gain = |c: usize, link_c: f64| link_c - gamma * tot[c] * deg[i] / m2;
            let mut best = own;
            let mut best_gain = gain(own, link[own]);
            touched.sort_unstable();
            for &c in &touched {
                let gc = gain(c, link[c]);
                if gc > best_gain + 1e-12 {
                    best = c;
                    best_gain = gc;
                }
            }
            tot[best] += deg[i];
            if best != own {
                labels[i] = best;
                moved = true;
                moved_any = true;
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            link[own] = 0.0;
        }
        if !moved {
            return moved_any;
        }
    }
}

fn aggregate(g: &WeightedGraph, labels: &[usize], k: usize) -> WeightedGraph {
    let mut agg = WeightedGraph::new(k);
    for i in 0..g.len() {
        agg.self_weight[labels[i]] += g.self_weight(i);
        for &(j, w) in g.neighbors(i) {
            let (a, b) = (labels[i], labels[j]);
            if a == b {
                agg.self_weight[a] += w;
            } else if a < b {
                agg.add_edge(a, b, w).expect("in range");
            }
        }
    }
    agg
}

/// Louvain community detection. Nodes are visited in an order shuffled by
/// `rng`; a node only moves on a strictly positive modularity gain, so ties
/// keep the coarser assignment. Returns canonical labels and Q.
pub fn louvain(g: &WeightedGraph, gamma: f64, rng: &RngStream) -> (Vec<usize>, f64) {
    let n = g.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    if g.total_degree() <= 0.0 {
        let labels: Vec<usize> = (0..n).collect();
        return (labels, 0.0);
    }
    let mut r = rng.rng();
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level = g.clone();
    loop {
        let mut labels: Vec<usize> = (0..level.len()).collect();
        let mut order: Vec<usize> = (0..level.len()).collect();
        order.shuffle(&mut r);
        if !local_moves(&level, &mut labels, gamma, &order) {
            break;
        }
        let labels = canonical_labels(&labels);
        let k = labels.iter().max().map_or(0, |m| m + 1);
        for m in membership.iter_mut() {
            *m = labels[*m];
        }
        level = aggregate(&level, &labels, k);
        if k == 1 {
            break;
        }
    }
    let membership = canonical_labels(&membership);
    let q = modularity(g, &membership, gamma);
    (membership, q)
}

/// Exhaustive modularity maximum over all set partitions (restricted growth
/// strings). Only feasible for small graphs.
pub fn best_partition_exhaustive(g: &WeightedGraph, gamma: f64) -> Result<(Vec<usize>, f64)> {
    let n = g.len();
    if n > 10 {
        return Err(Error::Argument(format!("exhaustive search over {n} nodes is too large")));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut labels = vec![0usize; n];
    let mut best = (labels.clone(), modularity(g, &labels, gamma));
    // restricted growth strings: labels[i] <= max(labels[..i]) + 1
    loop {
        let mut i = n - 1;
        loop {
            let cap = labels[..i].iter().max().map_or(0, |m| m + 1);
            if i > 0 && labels[i] < cap {
                labels[i] += 1;
                for l in labels.iter_mut().skip(i + 1) {
                    *l = 0;
                }
                break;
            }
            if i <= 1 {
                return Ok(best);
            }
            i -= 1;
        }
        let q = modularity(g, &labels, gamma);
        let k = labels.iter().max().unwrap() + 1;
        let best_k = best.0.iter().max().unwrap() + 1;
        if q > best.1 + 1e-12 || ((q - best.1).abs() <= 1e-12 && k < best_k) {
            best = (labels.clone(), q);
        }
    }
}
