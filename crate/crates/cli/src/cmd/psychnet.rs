use std::path::PathBuf;

use anyhow::bail;
use clap::Args;
use serde::{Deserialize, Serialize};
use twinpsy::psychnet::*;
use twinpsy::stats::RngStream;

use crate::config::{required, resolve, GlobalOpts};
use crate::report::{num, table, Reporter};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsychnetArgs {
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Channels to analyse as groups; the first is the reference.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub channels: Option<Vec<String>>,
    /// Restrict to items of these tasks (default: every numeric/ordinal item).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub tasks: Option<Vec<String>>,
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Minimum replication rate for an item to stay.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub n_perm: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// EBIC hyperparameter.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Serialize)]
struct ChannelReport {
    channel: String,
    ega: EgaResult,
    stability: StabilityReport,
}

pub fn run(g: &GlobalOpts, args: &PsychnetArgs) -> anyhow::Result<()> {
    let cfg = resolve(g, args, "psychnet")?;
    super::init_workers(&cfg);
    let a = &cfg.args;
    let channels = required(&a.channels, "channels")?;
    if channels.is_empty() {
        bail!("--channels needs at least one channel");
    }
    let twins: Vec<String> = channels.iter().filter(|c| c.as_str() != "human").cloned().collect();
    let ds = super::load_dataset(required(&a.responses, "responses")?, required(&a.items, "items")?, &twins)?;
    let items: Vec<String> = ds
        .items
        .iter()
        .filter(|m| m.kind.is_scalar())
        .filter(|m| a.tasks.as_ref().is_none_or(|t| t.contains(&m.task_id)))
        .map(|m| m.item_id.clone())
        .collect();
    if items.len() < 2 {
        bail!("need at least two numeric or ordinal items, found {}", items.len());
    }

    let mut ebic = EbicOptions::default();
    if let Some(gm) = a.gamma {
        ebic.gamma = gm;
    }
    let ega_opts = EgaOptions {
        ebic,
        ..Default::default()
    };
    let boot_opts = BootOptions {
        n_boot: a.n_boot.unwrap_or(500),
        threshold: a.threshold.unwrap_or(0.70),
        ega: ega_opts,
        ..Default::default()
    };
    let inv_opts = InvarianceOptions {
        n_perm: a.n_perm.unwrap_or(1000),
        alpha: a.alpha.unwrap_or(0.05),
        ebic,
    };
    let root = RngStream::new(cfg.seed);
    let mut rep = Reporter::new(&cfg.out, "psychnet", cfg.echo("psychnet"))?;

    let mut data = Vec::new();
    let mut reports = Vec::new();
    for ch in channels {
        let d = ItemData::from_dataset(&ds, ch, &items)?;
        let e = ega(&d, &ega_opts)?;
        let s = boot_ega(&d, &boot_opts, &root.fork(&format!("boot_ega/{ch}")))?;
        data.push(d);
        reports.push(ChannelReport {
            channel: ch.clone(),
            ega: e,
            stability: s,
        });
    }

    // Invariance on the reference's stable items under its final partition.
    let reference = &reports[0];
    let keep: Vec<usize> = data[0]
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| reference.stability.final_partition.contains_key(*v))
        .map(|(i, _)| i)
        .collect();
    let labels: Vec<usize> = keep
        .iter()
        .map(|&i| reference.stability.final_partition[&data[0].variables[i]])
        .collect();
    let mut invariance = Vec::new();
    for (k, other) in reports.iter().enumerate().skip(1) {
        let r = metric_invariance(
            &data[0].select_vars(&keep),
            &data[k].select_vars(&keep),
            &labels,
            (&reference.channel, &other.channel),
            &inv_opts,
            &root.fork(&format!("invariance/{}", other.channel)),
        );
        match r {
            Ok(r) => invariance.push(r),
            Err(e) => log::warn!("invariance {} vs {}: {e}", reference.channel, other.channel),
        }
    }

    let mut dim_rows = Vec::new();
    let mut edge_rows = Vec::new();
    for r in &reports {
        let m = &r.ega.model;
        for (i, v) in m.variables.iter().enumerate() {
            dim_rows.push(vec![
                r.channel.clone(),
                v.clone(),
                (r.ega.labels[i] + 1).to_string(),
                r.stability.final_partition.get(v).map(|d| (d + 1).to_string()).unwrap_or_default(),
                num(r.stability.rounds.first().and_then(|rd| rd.rates.get(v).copied())),
                r.stability.removed_items.contains(v).to_string(),
            ]);
            for j in i + 1..m.variables.len() {
                let w = m.partial_correlations[i][j];
                if w != 0.0 {
                    edge_rows.push(vec![r.channel.clone(), v.clone(), m.variables[j].clone(), num(w)]);
                }
            }
        }
    }
    rep.csv(
        "dimensions.csv",
        &table(&["channel", "item", "ega_dimension", "stable_dimension", "replication_rate", "removed"], dim_rows)?,
    )?;
    rep.csv("edges.csv", &table(&["channel", "from", "to", "partial_correlation"], edge_rows)?)?;
    rep.csv(
        "structure.csv",
        &table(
            &["channel", "n_items", "n_dims", "method", "modularity", "lambda", "edges", "stable_dims", "removed"],
            reports.iter().map(|r| {
                vec![
                    r.channel.clone(),
                    r.ega.model.variables.len().to_string(),
                    r.ega.n_dims.to_string(),
                    serde_json::to_value(r.ega.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    num(r.ega.modularity),
                    num(r.ega.model.lambda),
                    r.ega.model.n_edges().to_string(),
                    r.stability.n_dims.to_string(),
                    r.stability.removed_items.len().to_string(),
                ]
            }),
        )?,
    )?;
    let mut inv_rows = Vec::new();
    for r in &invariance {
        for row in &r.items {
            inv_rows.push(vec![
                r.group_a.clone(),
                r.group_b.clone(),
                row.item.clone(),
                row.dimension.to_string(),
                num(row.loading_a),
                num(row.loading_b),
                num(row.difference),
                num(row.p_raw),
                num(row.p_bh),
                row.noninvariant.to_string(),
                row.direction.clone().unwrap_or_default(),
            ]);
        }
    }
    rep.csv(
        "invariance.csv",
        &table(
            &[
                "group_a", "group_b", "item", "dimension", "loading_a", "loading_b", "difference", "p_raw", "p_bh",
                "noninvariant", "direction",
            ],
            inv_rows,
        )?,
    )?;
    rep.json("psychnet.json", &serde_json::json!({ "channels": reports, "invariance": invariance }))?;
    rep.finish()
}
