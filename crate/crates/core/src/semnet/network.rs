use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{AssociationDataset, Lexicon};
use crate::graph::WeightedGraph;
use crate::{Error, Result};

/// Undirected weighted association network. Each edge is stored once with
/// its endpoints in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticNetwork {
    pub label: String,
    nodes: BTreeSet<String>,
    edges: BTreeMap<(String, String), u32>,
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl SemanticNetwork {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn add_node(&mut self, node: &str) {
        self.nodes.insert(node.to_string());
    }

    /// Insert or overwrite an edge; self-loops and zero weights are ignored.
    pub fn set_edge(&mut self, a: &str, b: &str, weight: u32) {
        if a == b || weight == 0 {
            return;
        }
        self.add_node(a);
        self.add_node(b);
        self.edges.insert(key(a, b), weight);
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<u32> {
        self.edges.get(&key(a, b)).copied()
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.edges.iter().map(|((a, b), w)| (a.as_str(), b.as_str(), *w))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    pub fn degree(&self, node: &str) -> usize {
        self.edges.keys().filter(|(a, b)| a == node || b == node).count()
    }

    /// Node names in index order plus the unweighted neighbor lists.
    pub fn skeleton(&self) -> (Vec<String>, Vec<Vec<usize>>) {
        let names: Vec<String> = self.nodes.iter().cloned().collect();
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); names.len()];
        for (a, b) in self.edges.keys() {
            let (i, j) = (index[a.as_str()], index[b.as_str()]);
            adj[i].push(j);
            adj[j].push(i);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        (names, adj)
    }

    pub fn weighted_graph(&self) -> (Vec<String>, WeightedGraph) {
        let names: Vec<String> = self.nodes.iter().cloned().collect();
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let g = WeightedGraph::from_edges(
            names.len(),
            self.edges.iter().map(|((a, b), w)| (index[a.as_str()], index[b.as_str()], *w as f64)),
        )
        .expect("indices in range");
        (names, g)
    }

    fn drop_isolated(&mut self) {
        let touched: BTreeSet<&String> = self.edges.keys().flat_map(|(a, b)| [a, b]).collect();
        self.nodes = self.nodes.iter().filter(|n| touched.contains(n)).cloned().collect();
    }
}

/// Cue -> response frequencies as a weighted digraph, collapsed to an
/// undirected network whose weight is the larger of the two directions.
pub fn build_network(assoc: &AssociationDataset) -> Result<SemanticNetwork> {
    if assoc.records.is_empty() {
        return Err(Error::InsufficientData(format!("association set `{}` is empty", assoc.source)));
    }
    let mut directed: BTreeMap<(&str, &str), u32> = BTreeMap::new();
    let mut net = SemanticNetwork::new(assoc.source.clone());
    for rec in &assoc.records {
        net.add_node(&rec.cue);
        for r in rec.responses.iter().flatten() {
            net.add_node(r);
            if *r != rec.cue {
                *directed.entry((rec.cue.as_str(), r.as_str())).or_default() += 1;
            }
        }
    }
    for (&(a, b), &w) in &directed {
        let back = directed.get(&(b, a)).copied().unwrap_or(0);
        net.set_edge(a, b, w.max(back));
    }
    Ok(net)
}

/// Drop nodes outside the lexicon together with their edges.
pub fn filter_lexicon(net: &SemanticNetwork, lexicon: &Lexicon) -> SemanticNetwork {
    let mut out = SemanticNetwork::new(net.label.clone());
    out.nodes = net.nodes.iter().filter(|n| lexicon.contains(n)).cloned().collect();
    out.edges = net
        .edges
        .iter()
        .filter(|((a, b), _)| out.nodes.contains(a) && out.nodes.contains(b))
        .map(|(k, w)| (k.clone(), *w))
        .collect();
    out
}

/// Drop edges lighter than `min_weight`, then nodes left without edges.
pub fn filter_weight(net: &SemanticNetwork, min_weight: u32) -> SemanticNetwork {
    let mut out = net.clone();
    out.edges.retain(|_, w| *w >= min_weight);
    out.drop_isolated();
    out
}

/// Lexicon filter followed by the weight filter.
pub fn filter_network(net: &SemanticNetwork, lexicon: &Lexicon, min_weight: u32) -> Result<SemanticNetwork> {
    if lexicon.is_empty() {
        return Err(Error::Validation(vec!["lexicon is empty".into()]));
    }
    Ok(filter_weight(&filter_lexicon(net, lexicon), min_weight))
}

pub fn write_edge_list(net: &SemanticNetwork) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node_a", "node_b", "weight"]).expect("in-memory");
    for (a, b, wt) in net.edges() {
        w.write_record([a, b, &wt.to_string()]).expect("in-memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf8")
}

pub fn read_edge_list(path: &Path) -> Result<SemanticNetwork> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut net = SemanticNetwork::new(label);
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path.display(), k + 2, e.to_string()))?;
        if rec.len() < 3 {
            return Err(Error::parse(path.display(), k + 2, "expected node_a,node_b,weight"));
        }
        let w: u32 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path.display(), k + 2, format!("bad weight `{}`", &rec[2])))?;
        if rec[0] == rec[1] {
            return Err(Error::parse(path.display(), k + 2, "self-loop"));
        }
        net.set_edge(rec[0].trim(), rec[1].trim(), w);
    }
    Ok(net)
}

/// A word with an optional ground-truth category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEntry {
    pub word: String,
    pub category: Option<String>,
}

/// One word per line, optionally followed by a comma- or tab-separated
/// category. A leading `word[,category]` header is skipped.
pub fn parse_wordlist(text: &str) -> Vec<WordEntry> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(2, [',', '\t']);
        let word = parts.next().unwrap_or("").trim().to_lowercase();
        let category = parts.next().map(|c| c.trim().to_string()).filter(|c| !c.is_empty());
        if i == 0 && word == "word" {
            continue;
        }
        out.push(WordEntry { word, category });
    }
    out
}

pub fn load_wordlist(path: &Path) -> Result<Vec<WordEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_wordlist(&text))
}
