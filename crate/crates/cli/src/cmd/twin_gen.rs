use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use twinpsy::dataio::ItemMeta;
use twinpsy::twin_gen::*;
use twinpsy::Error;

use crate::config::{required, resolve, GlobalOpts};
use crate::report::{table, Reporter};

#[derive(Subcommand, Debug)]
pub enum TwinGenCommand {
    /// Render persona prompts to prompts.jsonl.
    Render(RenderArgs),
    /// Send rendered prompts to an endpoint, or replay them from a cassette.
    Run(RunArgs),
    /// Parse replies into a long-format twin response file.
    Parse(ParseArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderArgs {
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Participants to render (default: all).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub participants: Option<Vec<String>>,
    /// demographics_only, task_only, demographics_plus_task or feature_rich.
    #[arg(long)]
    pub condition: Option<String>,
    /// Item ids to ask.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub ask: Option<Vec<String>>,
    /// Ask every item of these tasks.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub ask_tasks: Option<Vec<String>>,
    /// Further items withheld from the persona.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub mask: Option<Vec<String>>,
    /// t1, t2, t3a or t3b.
    #[arg(long)]
    pub template: Option<String>,
    /// Response date for t2 (and optionally t3).
    #[arg(long)]
    pub date: Option<String>,
    #[arg(long)]
    pub word_cap: Option<usize>,
    /// One prompt per asked item instead of one per participant.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub per_item: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    /// prompts.jsonl from `twin-gen render`.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Endpoint config (TOML or JSON).
    #[arg(long)]
    pub endpoint: Option<PathBuf>,
    /// Cassette JSONL to replay from or record into.
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    /// live, record or replay (default: replay when a cassette is given).
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub backoff_ms: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseArgs {
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// replies.jsonl from `twin-gen run`.
    #[arg(long)]
    pub replies: Option<PathBuf>,
    /// Column name of the twin channel in the output.
    #[arg(long)]
    pub channel: Option<String>,
    /// Accept only replies that are a bare JSON object.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict: Option<bool>,
}

/// One line of replies.jsonl.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplyRecord {
    pub index: usize,
    pub participant_id: String,
    pub text: Option<String>,
    pub error: Option<String>,
    pub retries: u32,
    pub usage: Option<Usage>,
}

pub fn run(g: &GlobalOpts, c: &TwinGenCommand) -> anyhow::Result<()> {
    match c {
        TwinGenCommand::Render(a) => render(g, a),
        TwinGenCommand::Run(a) => run_prompts(g, a),
        TwinGenCommand::Parse(a) => parse(g, a),
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: invalid record", path.display(), i + 1)))
        .collect()
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn render(g: &GlobalOpts, args: &RenderArgs) -> anyhow::Result<()> {
    let cfg = resolve(g, args, "twin-gen.render")?;
    let a = &cfg.args;
    let ds = super::load_dataset(required(&a.responses, "responses")?, required(&a.items, "items")?, &[])?;
    let condition = match &a.condition {
        Some(c) => PersonaCondition::parse(c).with_context(|| format!("unknown persona condition `{c}`"))?,
        None => PersonaCondition::FeatureRich,
    };
    let template = match &a.template {
        Some(t) => TemplateId::parse(t).with_context(|| format!("unknown template `{t}`"))?,
        None => TemplateId::T1,
    };
    let mut ask: Vec<&ItemMeta> = Vec::new();
    for id in a.ask.iter().flatten() {
        let i = ds.item_index(id).with_context(|| format!("asked item `{id}` is not in the item metadata"))?;
        ask.push(&ds.items[i]);
    }
    for t in a.ask_tasks.iter().flatten() {
        let idx = ds.task_items(t);
        if idx.is_empty() {
            bail!("task `{t}` has no items");
        }
        ask.extend(idx.into_iter().map(|i| &ds.items[i]).filter(|m| !ask.iter().any(|q| q.item_id == m.item_id)).collect::<Vec<_>>());
    }
    if ask.is_empty() {
        bail!("nothing to ask: give --ask or --ask-tasks");
    }
    let mut mask: Vec<String> = ask.iter().map(|m| m.item_id.clone()).collect();
    for m in a.mask.iter().flatten() {
        if !mask.contains(m) {
            mask.push(m.clone());
        }
    }
    let opts = RenderOptions {
        temporal_context: a.date.clone(),
        word_cap: a.word_cap.unwrap_or(RenderOptions::default().word_cap),
    };
    let participants = a.participants.clone().unwrap_or_else(|| ds.participants.clone());
    let groups: Vec<Vec<&ItemMeta>> = if a.per_item.unwrap_or(false) {
        ask.iter().map(|m| vec![*m]).collect()
    } else {
        vec![ask.clone()]
    };

    let mut bundles = Vec::new();
    for p in &participants {
        let persona = build_persona(&ds, p, condition, &mask)?;
        for qs in &groups {
            bundles.push(render_prompt(&persona, qs, template, &opts)?);
        }
    }
    let mut rep = Reporter::new(&cfg.out, "twin-gen render", cfg.echo("twin-gen render"))?;
    rep.raw("prompts.jsonl", &to_jsonl(&bundles)?)?;
    rep.csv(
        "prompts.csv",
        &table(
            &["index", "participant_id", "template", "questions", "system_chars", "user_chars"],
            bundles.iter().enumerate().map(|(i, b)| {
                vec![
                    i.to_string(),
                    b.participant_id.clone(),
                    format!("{:?}", b.template_id),
                    b.expected_schema.iter().map(|q| q.items.len()).sum::<usize>().to_string(),
                    b.system.chars().count().to_string(),
                    b.user.chars().count().to_string(),
                ]
            }),
        )?,
    )?;
    rep.finish()
}

fn run_prompts(g: &GlobalOpts, args: &RunArgs) -> anyhow::Result<()> {
    let cfg = resolve(g, args, "twin-gen.run")?;
    let a = &cfg.args;
    let bundles: Vec<PromptBundle> = read_jsonl(required(&a.prompts, "prompts")?)?;
    let endpoint = EndpointConfig::load(required(&a.endpoint, "endpoint")?)?;
    let mode = a
        .mode
        .clone()
        .unwrap_or_else(|| if a.cassette.is_some() { "replay".into() } else { "live".into() });
    let mut policy = RetryPolicy::default();
    if let Some(r) = a.max_retries {
        policy.max_retries = r;
    }
    if let Some(b) = a.backoff_ms {
        policy.initial_backoff_ms = b;
    }
    let requests: Vec<ChatRequest> = bundles.iter().map(|b| ChatRequest::from_bundle(b, &endpoint)).collect();
    let parallelism = cfg.workers.unwrap_or(endpoint.parallelism);

    let mut rep = Reporter::new(&cfg.out, "twin-gen run", cfg.echo("twin-gen run"))?;
    let results = match mode.as_str() {
        "replay" => {
            let path = required(&a.cassette, "cassette")?;
            let t = ReplayTransport {
                cassette: Cassette::load(path)?,
            };
            run_batch(&t, &requests, &policy, parallelism)?
        }
        "record" => {
            let t = RecordingTransport::new(HttpTransport::new(&endpoint)?);
            let out = run_batch(&t, &requests, &policy, parallelism)?;
            let path = a.cassette.clone().unwrap_or_else(|| rep.dir().join("cassette.jsonl"));
            t.cassette().save(&path)?;
            log::info!("recorded {} replies to {}", t.cassette().len(), path.display());
            out
        }
        "live" => run_batch(&HttpTransport::new(&endpoint)?, &requests, &policy, parallelism)?,
        other => bail!("unknown mode `{other}` (expected live, record or replay)"),
    };

    let mut failures = 0;
    let records: Vec<ReplyRecord> = bundles
        .iter()
        .zip(results)
        .enumerate()
        .map(|(index, (b, r))| match r {
            Ok(c) => ReplyRecord {
                index,
                participant_id: b.participant_id.clone(),
                text: Some(c.text),
                error: None,
                retries: c.retries,
                usage: c.usage,
            },
            Err(e) => {
                failures += 1;
                let retries = match &e {
                    Error::Transport { retries, .. } => *retries,
                    _ => 0,
                };
                ReplyRecord {
                    index,
                    participant_id: b.participant_id.clone(),
                    text: None,
                    error: Some(e.to_string()),
                    retries,
                    usage: None,
                }
            }
        })
        .collect();
    if failures > 0 {
        log::warn!("{failures} of {} requests failed", records.len());
    }
    rep.raw("replies.jsonl", &to_jsonl(&records)?)?;
    rep.finish()
}

fn parse(g: &GlobalOpts, args: &ParseArgs) -> anyhow::Result<()> {
    let cfg = resolve(g, args, "twin-gen.parse")?;
    let a = &cfg.args;
    let bundles: Vec<PromptBundle> = read_jsonl(required(&a.prompts, "prompts")?)?;
    let replies: Vec<ReplyRecord> = read_jsonl(required(&a.replies, "replies")?)?;
    let channel = a.channel.clone().unwrap_or_else(|| "twin".into());
    let opts = ParseOptions {
        strict: a.strict.unwrap_or(false),
    };

    let mut cells = Vec::new();
    let mut log_rows = Vec::new();
    let mut seen = BTreeSet::new();
    for r in &replies {
        let b = bundles
            .get(r.index)
            .with_context(|| format!("reply {} has no matching prompt", r.index))?;
        if b.participant_id != r.participant_id {
            bail!("reply {} is for {}, prompt is for {}", r.index, r.participant_id, b.participant_id);
        }
        let (status, invalid, message) = match (&r.text, &r.error) {
            (Some(text), _) => match parse_twin_response(text, &b.expected_schema, &opts) {
                Ok(set) => {
                    for (item, ans) in &set.answers {
                        if seen.insert((r.participant_id.clone(), item.clone())) {
                            cells.push(vec![r.participant_id.clone(), item.clone(), ans.to_cell()]);
                        }
                    }
                    let msg = set.invalid.values().cloned().collect::<Vec<_>>().join("; ");
                    ("ok", set.invalid.len(), msg)
                }
                Err(e @ Error::SchemaViolation(_)) => ("schema_violation", 0, e.to_string()),
                Err(e) => ("parse_error", 0, e.to_string()),
            },
            (None, e) => ("transport_error", 0, e.clone().unwrap_or_default()),
        };
        log_rows.push(vec![
            r.index.to_string(),
            r.participant_id.clone(),
            status.to_string(),
            invalid.to_string(),
            message,
        ]);
    }
    let mut rep = Reporter::new(&cfg.out, "twin-gen parse", cfg.echo("twin-gen parse"))?;
    rep.raw(
        &format!("responses_{channel}.csv"),
        &table(&["participant_id", "item_id", channel.as_str()], cells)?,
    )?;
    rep.csv("parse_log.csv", &table(&["index", "participant_id", "status", "invalid", "message"], log_rows)?)?;
    rep.finish()
}
