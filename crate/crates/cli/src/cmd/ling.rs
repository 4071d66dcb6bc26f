use std::path::PathBuf;

use anyhow::bail;
use clap::Args;
use serde::{Deserialize, Serialize};
use twinpsy::dataio::{attach_entity_spans, load_conllu, Document};
use twinpsy::linguistics::*;
use twinpsy::stats::RngStream;

use crate::config::{required, resolve, GlobalOpts};
use crate::report::{num, table, Reporter};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LingArgs {
    /// Annotated corpus with doc_id / participant_id / condition comments.
    #[arg(long)]
    pub conllu: Option<PathBuf>,
    /// Sidecar entity spans (JSON), replacing spans from MISC.
    #[arg(long)]
    pub entities: Option<PathBuf>,
    /// Conditions to compare, in order (default: all, first is the reference).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub conditions: Option<Vec<String>>,
    #[arg(long)]
    pub hdd_sample: Option<usize>,
    /// Count punctuation when computing dependency distances.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub punct_in_indices: Option<bool>,
    #[arg(long)]
    pub n_perm: Option<usize>,
}

pub fn run(g: &GlobalOpts, args: &LingArgs) -> anyhow::Result<()> {
    let cfg = resolve(g, args, "ling")?;
    super::init_workers(&cfg);
    let a = &cfg.args;
    let path = required(&a.conllu, "conllu")?;
    let mut corpus = load_conllu(path)?;
    if let Some(e) = &a.entities {
        attach_entity_spans(&mut corpus, e)?;
    }
    let conditions = a.conditions.clone().unwrap_or_else(|| corpus.conditions());
    if conditions.is_empty() {
        bail!("{}: no conditions found", path.display());
    }
    let opts = ProfileOptions {
        hdd_sample_size: a.hdd_sample.unwrap_or(HDD_SAMPLE_SIZE),
        punct_in_indices: a.punct_in_indices.unwrap_or(false),
    };
    let n_perm = a.n_perm.unwrap_or(1000);
    let root = RngStream::new(cfg.seed);
    let mut rep = Reporter::new(&cfg.out, "ling", cfg.echo("ling"))?;

    let cp = profile_corpus(&corpus, &opts);
    for (doc, why) in &cp.failed {
        log::warn!("document {doc} skipped: {why}");
    }
    rep.csv("profiles.csv", &write_profiles_csv(&cp.profiles)?)?;
    let summary = summarize(&cp.profiles, &conditions);
    rep.csv(
        "summary.csv",
        &table(
            &["condition", "metric", "mean", "sd", "n"],
            summary
                .iter()
                .map(|s| vec![s.condition.clone(), s.metric.name().to_string(), num(s.mean), num(s.sd), s.n.to_string()]),
        )?,
    )?;

    let mut comparisons = Vec::new();
    if conditions.len() >= 2 {
        for m in Metric::ALL {
            match compare_conditions(&cp.profiles, m, &conditions) {
                Ok(c) => comparisons.push(c),
                Err(e) => log::warn!("{}: {e}", m.name()),
            }
        }
    }
    rep.csv(
        "friedman.csv",
        &table(
            &["metric", "n", "chi2", "df", "p", "kendall_w"],
            comparisons.iter().map(|c| {
                vec![
                    c.metric.name().to_string(),
                    c.n.to_string(),
                    num(c.friedman.statistic),
                    num(c.friedman.df),
                    num(c.friedman.p_value),
                    num(c.friedman.effect_size),
                ]
            }),
        )?,
    )?;
    rep.csv(
        "pairwise.csv",
        &table(
            &["metric", "a", "b", "n", "statistic", "p", "p_bh", "r"],
            comparisons.iter().flat_map(|c| {
                c.pairwise.iter().map(move |p| {
                    vec![
                        c.metric.name().to_string(),
                        p.a.clone(),
                        p.b.clone(),
                        p.test.n.to_string(),
                        num(p.test.statistic),
                        num(p.test.p_value),
                        num(p.p_bh),
                        num(p.test.effect_size),
                    ]
                })
            }),
        )?,
    )?;

    let docs = |c: &str| -> Vec<&Document> { corpus.documents.iter().filter(|d| d.condition == c).collect() };
    let mut divergences = Vec::new();
    let reference = &conditions[0];
    for other in &conditions[1..] {
        for feature in [Feature::NerLabels, Feature::PosBigrams] {
            let label = format!("divergence/{other}/{}", serde_json::to_value(feature)?.as_str().unwrap_or_default());
            match group_divergence(&docs(other), &docs(reference), feature, n_perm, &root.fork(&label)) {
                Ok(d) => divergences.push(d),
                Err(e) => log::warn!("{label}: {e}"),
            }
        }
    }
    rep.csv(
        "divergence.csv",
        &table(
            &["subject", "comparison", "feature", "n", "jsd", "p"],
            divergences.iter().map(|d| {
                vec![
                    d.subject.clone(),
                    d.comparison.clone(),
                    serde_json::to_value(d.feature).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    d.n.to_string(),
                    num(d.divergence),
                    num(d.p),
                ]
            }),
        )?,
    )?;
    rep.json(
        "ling.json",
        &serde_json::json!({
            "models": corpus.models,
            "conditions": conditions,
            "summary": summary,
            "comparisons": comparisons,
            "divergence": divergences,
            "hdd_excluded": cp.hdd_excluded,
            "failed": cp.failed,
        }),
    )?;
    rep.finish()
}
