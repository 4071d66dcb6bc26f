use std::collections::{BTreeMap, BTreeSet};

use super::GaussianGraphModel;
use crate::graph::{canonical_labels, modularity, WeightedGraph};
use crate::{Error, Result};

/// Absolute partial correlations as an undirected weighted graph.
pub fn abs_weight_graph(model: &GaussianGraphModel) -> WeightedGraph {
    let p = model.n_vars();
    let mut g = WeightedGraph::new(p);
    for i in 0..p {
        for j in i + 1..p {
            let w = model.pcor(i, j).abs();
            if w > 0.0 {
                g.add_edge(i, j, w).expect("valid weight");
            }
        }
    }
    g
}

struct Community {
    size: f64,
    /// Mean t-step transition distribution of the members, scaled by
    /// D^{-1/2} so squared Euclidean distance is the walk distance.
    prob: Vec<f64>,
}

fn delta_sigma(a: &Community, b: &Community, n: f64) -> f64 {
    let r2: f64 = a.prob.iter().zip(&b.prob).map(|(x, y)| (x - y).powi(2)).sum();
    a.size * b.size / (a.size + b.size) * r2 / n
}

/// Random-walk agglomerative clustering on a weighted graph. Every vertex
/// gets a self-loop weighted by its mean incident edge weight (1 when
/// isolated); adjacent communities are merged by smallest increase in
/// mean squared walk distance, and the dendrogram is cut at maximum
/// modularity (earliest level on ties). Returns canonical labels and Q.
pub fn walktrap_graph(g: &WeightedGraph, steps: usize) -> Result<(Vec<usize>, f64)> {
    let n = g.len();
    if n < 2 {
        return Err(Error::InsufficientData("walktrap needs at least 2 vertices".into()));
    }
    if steps == 0 {
        return Err(Error::Argument("walktrap needs at least one step".into()));
    }
    // transition matrix with loops
    let mut p = vec![vec![0.0; n]; n];
    let mut deg = vec![0.0; n];
    for i in 0..n {
        let nb = g.neighbors(i);
        let loop_w = if nb.is_empty() {
            1.0
        } else {
            nb.iter().map(|e| e.1).sum::<f64>() / nb.len() as f64
        };
        p[i][i] = loop_w;
        for &(j, w) in nb {
            p[i][j] = w;
        }
        deg[i] = p[i].iter().sum();
        for v in &mut p[i] {
            *v /= deg[i];
        }
    }
    let mut pt = p.clone();
    for _ in 1..steps {
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for (k, &pik) in pt[i].iter().enumerate() {
                if pik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    next[i][j] += pik * p[k][j];
                }
            }
        }
        pt = next;
    }
    let mut comms: BTreeMap<usize, Community> = (0..n)
        .map(|i| {
            let prob = (0..n).map(|k| pt[i][k] / deg[k].sqrt()).collect();
            (i, Community { size: 1.0, prob })
        })
        .collect();
    let mut members: Vec<usize> = (0..n).collect();
    let mut adjacent: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        for &(j, _) in g.neighbors(i) {
            if i < j {
                adjacent.insert((i, j));
            }
        }
    }
    let nf = n as f64;
    let mut cache: BTreeMap<(usize, usize), f64> = adjacent
        .iter()
        .map(|&(a, b)| ((a, b), delta_sigma(&comms[&a], &comms[&b], nf)))
        .collect();

    let mut best_labels = canonical_labels(&members);
    let mut best_q = modularity(g, &members, 1.0);
    let mut next_id = n;
    while let Some((&(a, b), _)) = cache
        .iter()
        .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(y.0)))
    {
        let ca = comms.remove(&a).expect("live");
        let cb = comms.remove(&b).expect("live");
        let size = ca.size + cb.size;
        let prob = ca.prob.iter().zip(&cb.prob).map(|(x, y)| (ca.size * x + cb.size * y) / size).collect();
        let c = next_id;
        next_id += 1;
        comms.insert(c, Community { size, prob });
        for m in &mut members {
            if *m == a || *m == b {
                *m = c;
            }
        }
        let neighbours: BTreeSet<usize> = cache
            .keys()
            .filter(|(x, y)| *x == a || *x == b || *y == a || *y == b)
            .map(|&(x, y)| if x == a || x == b { y } else { x })
            .filter(|&o| o != a && o != b)
            .collect();
        cache.retain(|&(x, y), _| x != a && x != b && y != a && y != b);
        for o in neighbours {
            let key = (o.min(c), o.max(c));
            cache.insert(key, delta_sigma(&comms[&o], &comms[&c], nf));
        }
        let q = modularity(g, &canonical_labels(&members), 1.0);
        if q > best_q + 1e-12 {
            best_q = q;
            best_labels = canonical_labels(&members);
        }
    }
    Ok((best_labels, best_q))
}

/// Walktrap on |partial correlation| weights.
pub fn walktrap(model: &GaussianGraphModel, steps: usize) -> Result<(Vec<usize>, f64)> {
    walktrap_graph(&abs_weight_graph(model), steps)
}
