use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataio::{Answer, ItemKind, ItemMeta, ResponseDataset};
use crate::stats::{fisher_z_mean, pearson, spearman};
use crate::{Error, Result};

pub(crate) type Grid = [Vec<Option<Answer>>];

/// Accuracy of one twin answer against the human answer: exact match for
/// discrete items, `1 - |twin - human| / (max - min)` for scalar items.
pub fn item_accuracy(human: &Answer, twin: &Answer, meta: &ItemMeta) -> Result<f64> {
    for a in [human, twin] {
        meta.check_answer(a).map_err(|e| Error::Validation(vec![e]))?;
    }
    match (meta.kind, human, twin) {
        (ItemKind::Text, _, _) => Err(Error::Config(format!("item {} is free text and cannot be scored", meta.item_id))),
        (_, Answer::Choice(h), Answer::Choice(t)) => Ok(if h == t { 1.0 } else { 0.0 }),
        (_, Answer::Value(h), Answer::Value(t)) => {
            let width = meta.width().unwrap_or(0.0);
            if width <= 0.0 {
                return Err(Error::Config(format!("item {} has a zero-width range", meta.item_id)));
            }
            Ok((1.0 - (t - h).abs() / width).clamp(0.0, 1.0))
        }
        _ => Err(Error::Validation(vec![format!("item {}: mismatched answer types", meta.item_id)])),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAccuracy {
    pub task: String,
    /// Mean over respondents of their within-task mean item accuracy.
    pub mean: f64,
    pub n_respondents: usize,
    pub per_respondent: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub channel: String,
    /// Mean accuracy per item over respondents with a complete pair.
    pub per_item: BTreeMap<String, f64>,
    pub tasks: Vec<TaskAccuracy>,
    /// Tasks without any complete scorable pair.
    pub skipped_tasks: Vec<String>,
    /// Mean of task means.
    pub overall: f64,
}

pub(crate) fn scorable(meta: &ItemMeta) -> bool {
    meta.kind != ItemKind::Text
}

pub(crate) fn accuracy_from(ds: &ResponseDataset, channel: &str, twin: &Grid) -> Result<AccuracyReport> {
    let human = ds.human();
    let mut per_item = BTreeMap::new();
    for (i, meta) in ds.items.iter().enumerate().filter(|(_, m)| scorable(m)) {
        let mut acc = Vec::new();
        for p in 0..ds.participants.len() {
            if let (Some(h), Some(t)) = (&human[p][i], &twin[p][i]) {
                acc.push(item_accuracy(h, t, meta)?);
            }
        }
        if !acc.is_empty() {
            per_item.insert(meta.item_id.clone(), acc.iter().sum::<f64>() / acc.len() as f64);
        }
    }

    let mut tasks = Vec::new();
    let mut skipped = Vec::new();
    for task in ds.tasks() {
        let items: Vec<usize> = ds.task_items(&task).into_iter().filter(|&i| scorable(&ds.items[i])).collect();
        let mut per_respondent = BTreeMap::new();
        for (p, pid) in ds.participants.iter().enumerate() {
            let mut acc = Vec::new();
            for &i in &items {
                if let (Some(h), Some(t)) = (&human[p][i], &twin[p][i]) {
                    acc.push(item_accuracy(h, t, &ds.items[i])?);
                }
            }
            if !acc.is_empty() {
                per_respondent.insert(pid.clone(), acc.iter().sum::<f64>() / acc.len() as f64);
            }
        }
        if per_respondent.is_empty() {
            skipped.push(task);
            continue;
        }
        let mean = per_respondent.values().sum::<f64>() / per_respondent.len() as f64;
        tasks.push(TaskAccuracy {
            task,
            mean,
            n_respondents: per_respondent.len(),
            per_respondent,
        });
    }
    if tasks.is_empty() {
        return Err(Error::InsufficientData(format!("channel {channel}: no complete human/twin pairs")));
    }
    let overall = tasks.iter().map(|t| t.mean).sum::<f64>() / tasks.len() as f64;
    Ok(AccuracyReport {
        channel: channel.to_string(),
        per_item,
        tasks,
        skipped_tasks: skipped,
        overall,
    })
}

/// Item accuracy averaged within task per respondent, then across
/// respondents, then across tasks.
pub fn task_accuracy(ds: &ResponseDataset, twin_channel: &str) -> Result<AccuracyReport> {
    accuracy_from(ds, twin_channel, ds.channel(twin_channel)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    #[default]
    Spearman,
    Pearson,
}

impl CorrelationMethod {
    fn apply(self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            CorrelationMethod::Spearman => spearman(x, y),
            CorrelationMethod::Pearson => pearson(x, y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationLevel {
    Item,
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    /// Item id (item level) or participant id (profile level).
    pub unit: String,
    pub task: String,
    pub rho: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub unit: String,
    pub task: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineInterval {
    pub lo: f64,
    pub hi: f64,
    pub mean: f64,
    pub n_sets: usize,
    /// Sets where the metric was defined.
    pub n_valid: usize,
    pub interval: String,
    pub null_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub channel: String,
    pub level: CorrelationLevel,
    pub method: CorrelationMethod,
    pub entries: Vec<CorrelationEntry>,
    pub excluded: Vec<Exclusion>,
    /// Fisher-z mean of all entries.
    pub overall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineInterval>,
}

impl CorrelationReport {
    /// Fisher-z mean per task.
    pub fn by_task(&self) -> BTreeMap<String, f64> {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for e in &self.entries {
            groups.entry(e.task.clone()).or_default().push(e.rho);
        }
        groups
            .into_iter()
            .filter_map(|(k, v)| fisher_z_mean(&v).ok().map(|m| (k, m)))
            .collect()
    }

    fn finish(mut self) -> Self {
        let rs: Vec<f64> = self.entries.iter().map(|e| e.rho).collect();
        self.overall = fisher_z_mean(&rs).ok();
        self
    }
}

fn exclusion_reason(e: &Error) -> String {
    match e {
        Error::InsufficientData(_) => "fewer than 3 complete pairs".into(),
        Error::UndefinedCorrelation(_) => "zero variance".into(),
        other => other.to_string(),
    }
}

pub(crate) fn item_correlations_from(
    ds: &ResponseDataset,
    channel: &str,
    twin: &Grid,
    method: CorrelationMethod,
) -> CorrelationReport {
    let human = ds.human();
    let mut report = CorrelationReport {
        channel: channel.to_string(),
        level: CorrelationLevel::Item,
        method,
        entries: Vec::new(),
        excluded: Vec::new(),
        overall: None,
        baseline: None,
    };
    for (i, meta) in ds.items.iter().enumerate().filter(|(_, m)| scorable(m)) {
        let (mut hs, mut ts) = (Vec::new(), Vec::new());
        for p in 0..ds.participants.len() {
            if let (Some(h), Some(t)) = (&human[p][i], &twin[p][i]) {
                hs.extend(h.as_f64());
                ts.extend(t.as_f64());
            }
        }
        match method.apply(&hs, &ts) {
            Ok(rho) => report.entries.push(CorrelationEntry {
                unit: meta.item_id.clone(),
                task: meta.task_id.clone(),
                rho,
                n: hs.len(),
            }),
            Err(e) => report.excluded.push(Exclusion {
                unit: meta.item_id.clone(),
                task: meta.task_id.clone(),
                reason: exclusion_reason(&e),
            }),
        }
    }
    report.finish()
}

/// Between-subject association per item across participants.
pub fn item_level_correlations(ds: &ResponseDataset, twin_channel: &str, method: CorrelationMethod) -> Result<CorrelationReport> {
    Ok(item_correlations_from(ds, twin_channel, ds.channel(twin_channel)?, method))
}

pub(crate) fn profile_correlations_from(
    ds: &ResponseDataset,
    channel: &str,
    twin: &Grid,
    method: CorrelationMethod,
) -> CorrelationReport {
    let human = ds.human();
    let mut report = CorrelationReport {
        channel: channel.to_string(),
        level: CorrelationLevel::Profile,
        method,
        entries: Vec::new(),
        excluded: Vec::new(),
        overall: None,
        baseline: None,
    };
    for task in ds.tasks() {
        let items: Vec<usize> = ds.task_items(&task).into_iter().filter(|&i| scorable(&ds.items[i])).collect();
        for (p, pid) in ds.participants.iter().enumerate() {
            let (mut hs, mut ts) = (Vec::new(), Vec::new());
            for &i in &items {
                if let (Some(h), Some(t)) = (&human[p][i], &twin[p][i]) {
                    let meta = &ds.items[i];
                    if let (Some(hv), Some(tv)) = (meta.normalized(h), meta.normalized(t)) {
                        hs.push(hv);
                        ts.push(tv);
                    }
                }
            }
            if hs.is_empty() {
                continue;
            }
            match method.apply(&hs, &ts) {
                Ok(rho) => report.entries.push(CorrelationEntry {
                    unit: pid.clone(),
                    task: task.clone(),
                    rho,
                    n: hs.len(),
                }),
                Err(e) => report.excluded.push(Exclusion {
                    unit: pid.clone(),
                    task: task.clone(),
                    reason: exclusion_reason(&e),
                }),
            }
        }
    }
    report.finish()
}

/// Within-person association across the items of each task, on
/// range-normalized answers. Fewer than three complete items is an exclusion.
pub fn profile_correlations(ds: &ResponseDataset, twin_channel: &str, method: CorrelationMethod) -> Result<CorrelationReport> {
    Ok(profile_correlations_from(ds, twin_channel, ds.channel(twin_channel)?, method))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSlope {
    pub task: String,
    pub slope: f64,
    pub intercept: f64,
    pub ci95: (f64, f64),
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub channel: String,
    pub tasks: Vec<TaskSlope>,
    pub excluded: Vec<Exclusion>,
}

/// OLS slope of `twin - human` on `human` over the scalar items of a task.
pub fn error_slope(ds: &ResponseDataset, twin_channel: &str, task: &str) -> Result<TaskSlope> {
    let mut xs = Vec::new();
    let mut ts = Vec::new();
    for i in ds.task_items(task) {
        if !ds.items[i].kind.is_scalar() {
            continue;
        }
        for (_, h, t) in ds.item_pairs(twin_channel, i)? {
            if let (Answer::Value(h), Answer::Value(t)) = (h, t) {
                xs.push(*h);
                ts.push(*t);
            }
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("task {task}: {n} numeric pairs, need at least 3")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let es: Vec<f64> = xs.iter().zip(&ts).map(|(h, t)| t - h).collect();
    let me = es.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateRegressor(format!("task {task}: human responses have zero variance")));
    }
    // slope(twin - human ~ human) = slope(twin ~ human) - 1; this form is
    // exact for constant and proportional twins.
    let mt = ts.iter().sum::<f64>() / nf;
    let sxt: f64 = xs.iter().zip(&ts).map(|(x, t)| (x - mx) * (t - mt)).sum();
    let slope = sxt / sxx - 1.0;
    let intercept = me - slope * mx;
    let ssr: f64 = xs.iter().zip(&es).map(|(x, e)| (e - intercept - slope * x).powi(2)).sum();
    let ci95 = if n > 2 {
        let se = (ssr / (nf - 2.0) / sxx).sqrt();
        let q = StudentsT::new(0.0, 1.0, nf - 2.0).expect("df").inverse_cdf(0.975);
        (slope - q * se, slope + q * se)
    } else {
        (slope, slope)
    };
    Ok(TaskSlope {
        task: task.to_string(),
        slope,
        intercept,
        ci95,
        n,
    })
}

/// [`error_slope`] for every task that has enough scalar pairs.
pub fn error_slopes(ds: &ResponseDataset, twin_channel: &str) -> Result<SlopeReport> {
    ds.channel(twin_channel)?;
    let mut tasks = Vec::new();
    let mut excluded = Vec::new();
    for task in ds.tasks() {
        if !ds.task_items(&task).iter().any(|&i| ds.items[i].kind.is_scalar()) {
            continue;
        }
        match error_slope(ds, twin_channel, &task) {
            Ok(s) => tasks.push(s),
            Err(e) => excluded.push(Exclusion {
                unit: task.clone(),
                task,
                reason: e.to_string(),
            }),
        }
    }
    Ok(SlopeReport {
        channel: twin_channel.to_string(),
        tasks,
        excluded,
    })
}
