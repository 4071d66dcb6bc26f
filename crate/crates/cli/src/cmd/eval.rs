use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use twinpsy::stats::RngStream;
use twinpsy::twin_eval::*;

use crate::config::{required, resolve, GlobalOpts};
use crate::report::{num, table, Reporter};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalArgs {
    /// Long-format responses: participant_id, item_id, human, <twin channels>.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    /// Item metadata CSV.
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Twin channel column(s) to evaluate.
    #[arg(long = "twin-channel", value_delimiter = ',', num_args = 1..)]
    pub twin_channel: Option<Vec<String>>,
    /// spearman (default) or pearson.
    #[arg(long)]
    pub method: Option<String>,
    /// Simulated twin channels per random baseline.
    #[arg(long)]
    pub n_sets: Option<usize>,
    /// Replication experiments (TOML or JSON).
    #[arg(long)]
    pub experiments: Option<PathBuf>,
}

#[derive(Serialize)]
struct ChannelReport {
    accuracy: Option<AccuracyReport>,
    item_correlations: CorrelationReport,
    profile_correlations: CorrelationReport,
    slopes: SlopeReport,
    replication: Option<Vec<Result<ReplicationOutcome, String>>>,
}

pub fn run(g: &GlobalOpts, args: &EvalArgs) -> anyhow::Result<()> {
    let cfg = resolve(g, args, "eval")?;
    super::init_workers(&cfg);
    let a = &cfg.args;
    let channels = required(&a.twin_channel, "twin-channel")?;
    if channels.is_empty() {
        bail!("--twin-channel needs at least one channel");
    }
    let method: CorrelationMethod = match &a.method {
        Some(m) => serde_json::from_value(serde_json::Value::String(m.to_ascii_lowercase()))
            .with_context(|| format!("unknown correlation method `{m}`"))?,
        None => CorrelationMethod::default(),
    };
    let ds = super::load_dataset(required(&a.responses, "responses")?, required(&a.items, "items")?, channels)?;
    let spec = a.experiments.as_deref().map(ExperimentSpec::load).transpose()?;
    if let Some(s) = &spec {
        s.validate(&ds)?;
    }
    let n_sets = a.n_sets.unwrap_or(1000);
    let root = RngStream::new(cfg.seed);
    let mut rep = Reporter::new(&cfg.out, "eval", cfg.echo("eval"))?;

    let mut baselines = Vec::new();
    for metric in [BaselineMetric::Accuracy, BaselineMetric::ItemCorr, BaselineMetric::ProfileCorr] {
        let name = serde_json::to_value(metric)?.as_str().unwrap_or("metric").to_string();
        match random_baseline(&ds, metric, n_sets, &root.fork(&format!("baseline/{name}")), method) {
            Ok(b) => baselines.push((name, b)),
            Err(e) => log::warn!("baseline {name}: {e}"),
        }
    }

    let mut reports = Vec::new();
    for ch in channels {
        let accuracy = task_accuracy(&ds, ch)
            .map_err(|e| log::warn!("accuracy {ch}: {e}"))
            .ok();
        let replication = match &spec {
            Some(s) => Some(replication_report(&ds, ch, s)?),
            None => None,
        };
        reports.push((
            ch.clone(),
            ChannelReport {
                accuracy,
                item_correlations: item_level_correlations(&ds, ch, method)?,
                profile_correlations: profile_correlations(&ds, ch, method)?,
                slopes: error_slopes(&ds, ch)?,
                replication,
            },
        ));
    }
    let human_replication = match &spec {
        Some(s) => Some(replication_report(&ds, &ds.human_channel, s)?),
        None => None,
    };

    let mut acc_rows = Vec::new();
    let mut item_rows = Vec::new();
    let mut corr_rows = Vec::new();
    let mut slope_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for (ch, r) in &reports {
        if let Some(acc) = &r.accuracy {
            for t in &acc.tasks {
                acc_rows.push(vec![ch.clone(), t.task.clone(), num(t.mean), t.n_respondents.to_string()]);
            }
            for (item, v) in &acc.per_item {
                item_rows.push(vec![ch.clone(), item.clone(), num(*v)]);
            }
        }
        for rep_corr in [&r.item_correlations, &r.profile_correlations] {
            let level = serde_json::to_value(rep_corr.level)?.as_str().unwrap_or_default().to_string();
            for e in &rep_corr.entries {
                corr_rows.push(vec![ch.clone(), level.clone(), e.task.clone(), e.unit.clone(), num(e.rho), e.n.to_string()]);
            }
        }
        for s in &r.slopes.tasks {
            slope_rows.push(vec![
                ch.clone(),
                s.task.clone(),
                num(s.slope),
                num(s.intercept),
                num(s.ci95.0),
                num(s.ci95.1),
                s.n.to_string(),
            ]);
        }
        summary_rows.push(vec![
            ch.clone(),
            num(r.accuracy.as_ref().map(|a| a.overall)),
            num(r.item_correlations.overall),
            num(r.profile_correlations.overall),
        ]);
    }
    rep.csv("summary.csv", &table(&["channel", "accuracy", "item_corr", "profile_corr"], summary_rows)?)?;
    rep.csv("accuracy_tasks.csv", &table(&["channel", "task", "accuracy", "n_respondents"], acc_rows)?)?;
    rep.csv("accuracy_items.csv", &table(&["channel", "item_id", "accuracy"], item_rows)?)?;
    rep.csv("correlations.csv", &table(&["channel", "level", "task", "unit", "rho", "n"], corr_rows)?)?;
    rep.csv(
        "error_slopes.csv",
        &table(&["channel", "task", "slope", "intercept", "ci_lo", "ci_hi", "n"], slope_rows)?,
    )?;
    rep.csv(
        "baselines.csv",
        &table(
            &["metric", "lo", "hi", "mean", "n_sets", "n_valid"],
            baselines.iter().map(|(m, b)| {
                vec![m.clone(), num(b.lo), num(b.hi), num(b.mean), b.n_sets.to_string(), b.n_valid.to_string()]
            }),
        )?,
    )?;
    if spec.is_some() {
        let mut rows = Vec::new();
        let all = human_replication
            .iter()
            .map(|r| (ds.human_channel.clone(), r))
            .chain(reports.iter().filter_map(|(ch, r)| r.replication.as_ref().map(|x| (ch.clone(), x))));
        for (ch, outcomes) in all {
            for o in outcomes {
                rows.push(match o {
                    Ok(o) => vec![
                        ch.clone(),
                        o.experiment.clone(),
                        num(o.effect),
                        num(o.test.statistic),
                        num(o.test.p_value),
                        o.test.n.to_string(),
                        o.replicated.to_string(),
                        String::new(),
                    ],
                    Err(e) => vec![ch.clone(), String::new(), String::new(), String::new(), String::new(), String::new(), "false".into(), e.clone()],
                });
            }
        }
        rep.csv(
            "replication.csv",
            &table(&["channel", "experiment", "effect", "statistic", "p", "n", "replicated", "error"], rows)?,
        )?;
    }
    let channels_json: serde_json::Map<String, serde_json::Value> = reports
        .iter()
        .map(|(ch, r)| Ok((ch.clone(), serde_json::to_value(r)?)))
        .collect::<anyhow::Result<_>>()?;
    rep.json(
        "eval.json",
        &serde_json::json!({
            "channels": channels_json,
            "baselines": baselines.into_iter().collect::<std::collections::BTreeMap<_, _>>(),
            "human_replication": human_replication,
        }),
    )?;
    rep.finish()
}
