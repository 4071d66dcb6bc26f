use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use twinpsy::dataio::{load_conllu, load_dictionaries, load_embeddings};
use twinpsy::ddr::*;
use twinpsy::stats::RngStream;

use crate::config::{required, resolve, GlobalOpts};
use crate::report::{num, table, Reporter};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdrArgs {
    /// Corpus supplying doc_id / participant_id / condition.
    #[arg(long)]
    pub conllu: Option<PathBuf>,
    /// Embeddings JSONL holding document and dictionary-term vectors.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Dictionary file, or a directory of `*.txt` dictionaries.
    #[arg(long)]
    pub dicts: Option<PathBuf>,
    /// Conditions to compare pairwise (default: all).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub conditions: Option<Vec<String>>,
    #[arg(long)]
    pub n_perm: Option<usize>,
}

pub fn run(g: &GlobalOpts, args: &DdrArgs) -> anyhow::Result<()> {
    let cfg = resolve(g, args, "ddr")?;
    super::init_workers(&cfg);
    let a = &cfg.args;
    let corpus = load_conllu(required(&a.conllu, "conllu")?)?;
    let store = load_embeddings(required(&a.embeddings, "embeddings")?)?;
    let dicts = load_dictionaries(required(&a.dicts, "dicts")?)?;
    let conditions = a.conditions.clone().unwrap_or_else(|| corpus.conditions());
    let n_perm = a.n_perm.unwrap_or(1000);
    let root = RngStream::new(cfg.seed);
    let mut rep = Reporter::new(&cfg.out, "ddr", cfg.echo("ddr"))?;

    let constructs: Vec<ConstructVector> = dicts
        .iter()
        .map(|d| construct_vector(d, &store))
        .collect::<twinpsy::Result<_>>()?;
    for c in &constructs {
        if c.n_terms_missing > 0 {
            log::warn!("{}: {} of {} terms have no vector", c.name, c.n_terms_missing, c.n_terms_missing + c.n_terms_found);
        }
    }
    let rows = score_documents(&DocMeta::from_corpus(&corpus), &store, &constructs)?;
    rep.csv("similarity.csv", &write_similarity_csv(&rows)?)?;

    let mut comparisons = Vec::new();
    for c in &constructs {
        for (i, ca) in conditions.iter().enumerate() {
            for cb in &conditions[i + 1..] {
                let rng = root.fork(&format!("ecdf/{}/{ca}/{cb}", c.name));
                match compare_construct(&rows, &c.name, ca, cb, n_perm, &rng) {
                    Ok(r) => comparisons.push(r),
                    Err(e) => log::warn!("{} {ca} vs {cb}: {e}", c.name),
                }
            }
        }
    }
    rep.csv(
        "constructs.csv",
        &table(
            &["construct", "terms_found", "terms_missing"],
            constructs
                .iter()
                .map(|c| vec![c.name.clone(), c.n_terms_found.to_string(), c.n_terms_missing.to_string()]),
        )?,
    )?;
    rep.csv(
        "ecdf.csv",
        &table(
            &["construct", "condition_a", "condition_b", "n", "ks_d", "p_asymptotic", "p_permutation"],
            comparisons.iter().map(|c| {
                vec![
                    c.construct.clone(),
                    c.condition_a.clone(),
                    c.condition_b.clone(),
                    c.result.n.to_string(),
                    num(c.result.d),
                    num(c.result.p_asymptotic),
                    num(c.result.p_permutation),
                ]
            }),
        )?,
    )?;
    let coverage: Vec<_> = constructs
        .iter()
        .map(|c| {
            serde_json::json!({
                "construct": c.name,
                "terms_found": c.n_terms_found,
                "missing_terms": c.missing_terms,
            })
        })
        .collect();
    rep.json("ddr.json", &serde_json::json!({ "constructs": coverage, "comparisons": comparisons }))?;
    rep.finish()
}
