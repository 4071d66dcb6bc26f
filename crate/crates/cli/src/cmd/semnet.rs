use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::bail;
use clap::Args;
use serde::{Deserialize, Serialize};
use twinpsy::dataio::{load_association_file, load_lexicon, AssociationDescriptives};
use twinpsy::semnet::*;
use twinpsy::stats::{RngStream, TestResult};

use super::file_label;
use crate::config::{required, resolve, GlobalOpts};
use crate::report::{num, table, Reporter};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemnetArgs {
    /// Association CSVs (cue,R1,R2,R3), one network per file.
    #[arg(long = "assoc", num_args = 1..)]
    pub assoc: Option<Vec<PathBuf>>,
    /// Keep only nodes in this word list.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Word list with categories, for agreement of communities with them.
    #[arg(long)]
    pub wordlist: Option<PathBuf>,
    /// Drop edges produced fewer than this many times.
    #[arg(long)]
    pub min_weight: Option<u32>,
    /// Label (file stem) of the reference network; defaults to the first.
    #[arg(long)]
    pub reference: Option<String>,
    /// Degree-preserving nulls per small-world estimate.
    #[arg(long)]
    pub n_random: Option<usize>,
    #[arg(long)]
    pub resolution: Option<f64>,
}

#[derive(Serialize)]
struct NetworkReport {
    label: String,
    descriptives: AssociationDescriptives,
    global: Option<GlobalStats>,
    small_world: Option<SmallWorldStats>,
    communities: Option<Partition>,
    category_agreement: Option<ClusterAgreement>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct PairReport {
    reference: String,
    other: String,
    overlap: Option<Overlap>,
    centrality: Option<CentralityComparison>,
    community_agreement: Option<ClusterAgreement>,
    warnings: Vec<String>,
}

fn keep<T>(r: twinpsy::Result<T>, what: &str, warnings: &mut Vec<String>) -> Option<T> {
    r.map_err(|e| {
        log::warn!("{what}: {e}");
        warnings.push(format!("{what}: {e}"));
    })
    .ok()
}

pub fn run(g: &GlobalOpts, args: &SemnetArgs) -> anyhow::Result<()> {
    let cfg = resolve(g, args, "semnet")?;
    super::init_workers(&cfg);
    let a = &cfg.args;
    let paths = required(&a.assoc, "assoc")?;
    if paths.is_empty() {
        bail!("--assoc needs at least one file");
    }
    let lexicon = a.lexicon.as_deref().map(load_lexicon).transpose()?;
    let wordlist = a.wordlist.as_deref().map(load_wordlist).transpose()?;
    let categories: BTreeMap<String, String> = wordlist
        .iter()
        .flatten()
        .filter_map(|w| w.category.clone().map(|c| (w.word.clone(), c)))
        .collect();
    let min_weight = a.min_weight.unwrap_or(1);
    let n_random = a.n_random.unwrap_or(100);
    let resolution = a.resolution.unwrap_or(1.0);
    let root = RngStream::new(cfg.seed);

    let mut rep = Reporter::new(&cfg.out, "semnet", cfg.echo("semnet"))?;
    let mut nets = Vec::new();
    let mut reports = Vec::new();
    let mut cues = Vec::new();
    for path in paths {
        let label = file_label(path);
        let assoc = load_association_file(path)?;
        let raw = build_network(&assoc)?;
        let mut net = match &lexicon {
            Some(lex) => filter_network(&raw, lex, min_weight)?,
            None => filter_weight(&raw, min_weight),
        };
        net.label = label.clone();
        rep.csv(&format!("edges_{label}.csv"), &write_edge_list(&net))?;

        let mut warnings = Vec::new();
        let global = keep(global_stats(&net), "global stats", &mut warnings);
        let small_world = keep(
            small_world(&net, n_random, &root.fork(&format!("small_world/{label}"))),
            "small world",
            &mut warnings,
        );
        let communities = keep(
            louvain(&net, resolution, &root.fork(&format!("louvain/{label}"))),
            "louvain",
            &mut warnings,
        );
        if let Some(p) = &communities {
            rep.csv(&format!("communities_{label}.csv"), &write_partition(p))?;
        }
        let category_agreement = match (&communities, categories.is_empty()) {
            (Some(p), false) => keep(cluster_agreement(&categories, &p.labels), "category agreement", &mut warnings),
            _ => None,
        };
        cues.push(assoc.records.iter().map(|r| r.cue.clone()).collect::<BTreeSet<_>>());
        reports.push(NetworkReport {
            label,
            descriptives: assoc.descriptives(),
            global,
            small_world,
            communities,
            category_agreement,
            warnings,
        });
        nets.push(net);
    }

    let ref_idx = match &a.reference {
        Some(r) => nets
            .iter()
            .position(|n| &n.label == r)
            .ok_or_else(|| anyhow::anyhow!("reference network `{r}` is not among the inputs"))?,
        None => 0,
    };
    let mut pairs = Vec::new();
    for (k, other) in nets.iter().enumerate().filter(|(k, _)| *k != ref_idx) {
        let reference = &nets[ref_idx];
        let mut warnings = Vec::new();
        let shared: BTreeSet<String> = cues[ref_idx].intersection(&cues[k]).cloned().collect();
        let community_agreement = match (&reports[ref_idx].communities, &reports[k].communities) {
            (Some(pa), Some(pb)) => keep(cluster_agreement(&pa.labels, &pb.labels), "community agreement", &mut warnings),
            _ => None,
        };
        pairs.push(PairReport {
            reference: reference.label.clone(),
            other: other.label.clone(),
            overlap: keep(node_edge_overlap(reference, other), "overlap", &mut warnings),
            centrality: keep(compare_centrality(reference, other, &shared), "centrality", &mut warnings),
            community_agreement,
            warnings,
        });
    }

    rep.csv(
        "descriptives.csv",
        &table(
            &["network", "n_cues", "total_responses", "unique_responses", "missing_rate"],
            reports.iter().map(|r| {
                let d = &r.descriptives;
                vec![
                    r.label.clone(),
                    d.n_cues.to_string(),
                    d.total_responses.to_string(),
                    d.unique_responses.to_string(),
                    num(d.missing_rate),
                ]
            }),
        )?,
    )?;
    rep.csv(
        "global_stats.csv",
        &table(
            &[
                "network", "nodes", "edges", "lcc_size", "clustering", "path_length", "modularity", "communities",
                "c_rand", "l_rand", "gamma", "lambda", "sigma",
            ],
            reports.iter().map(|r| {
                let gs = r.global.as_ref();
                let sw = r.small_world.as_ref();
                let cm = r.communities.as_ref();
                vec![
                    r.label.clone(),
                    gs.map(|g| g.n_nodes.to_string()).unwrap_or_default(),
                    gs.map(|g| g.n_edges.to_string()).unwrap_or_default(),
                    gs.map(|g| g.lcc_size.to_string()).unwrap_or_default(),
                    num(gs.map(|g| g.clustering)),
                    num(gs.map(|g| g.path_length)),
                    num(cm.map(|c| c.modularity)),
                    cm.map(|c| c.n_communities.to_string()).unwrap_or_default(),
                    num(sw.map(|s| s.c_rand)),
                    num(sw.map(|s| s.l_rand)),
                    num(sw.map(|s| s.gamma)),
                    num(sw.map(|s| s.lambda)),
                    num(sw.map(|s| s.sigma)),
                ]
            }),
        )?,
    )?;
    let test_cells = |t: Option<&TestResult>| {
        vec![
            num(t.map(|t| t.statistic)),
            num(t.map(|t| t.p_value)),
            num(t.and_then(|t| t.effect_size)),
            t.map(|t| t.n.to_string()).unwrap_or_default(),
        ]
    };
    rep.csv(
        "comparisons.csv",
        &table(
            &[
                "reference", "other", "node_jaccard", "node_unique_ref", "node_unique_other", "edge_jaccard",
                "edge_unique_ref", "edge_unique_other", "ari", "v_measure", "degree_w", "degree_p", "degree_r",
                "degree_n",
            ],
            pairs.iter().map(|p| {
                let o = p.overlap.as_ref();
                let c = p.community_agreement.as_ref();
                let mut row = vec![
                    p.reference.clone(),
                    p.other.clone(),
                    num(o.map(|o| o.node_jaccard)),
                    num(o.map(|o| o.node_unique_a)),
                    num(o.map(|o| o.node_unique_b)),
                    num(o.and_then(|o| o.edge_jaccard)),
                    num(o.and_then(|o| o.edge_unique_a)),
                    num(o.and_then(|o| o.edge_unique_b)),
                    num(c.map(|c| c.ari)),
                    num(c.map(|c| c.v_measure.v)),
                ];
                row.extend(test_cells(p.centrality.as_ref().map(|c| &c.test)));
                row
            }),
        )?,
    )?;
    rep.json("semnet.json", &serde_json::json!({ "networks": reports, "comparisons": pairs }))?;
    rep.finish()
}
