use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::LinguisticProfile;
use crate::stats::{bh_adjust, friedman, mean, variance, wilcoxon_signed_rank, TestResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sentences,
    AvgSentenceLength,
    Mdd,
    MddNormalized,
    Depth,
    Hdd,
    NeDensity,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Sentences,
        Metric::AvgSentenceLength,
        Metric::Mdd,
        Metric::MddNormalized,
        Metric::Depth,
        Metric::Hdd,
        Metric::NeDensity,
    ];

    pub fn value(self, p: &LinguisticProfile) -> Option<f64> {
        match self {
            Metric::Sentences => Some(p.n_sentences as f64),
            Metric::AvgSentenceLength => Some(p.avg_sentence_length),
            Metric::Mdd => p.mdd,
            Metric::MddNormalized => p.mdd_normalized,
            Metric::Depth => Some(p.mean_depth),
            Metric::Hdd => p.hdd,
            Metric::NeDensity => Some(p.ne_density),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sentences => "sentences",
            Metric::AvgSentenceLength => "avg_sentence_length",
            Metric::Mdd => "mdd",
            Metric::MddNormalized => "mdd_normalized",
            Metric::Depth => "depth",
            Metric::Hdd => "hdd",
            Metric::NeDensity => "ne_density",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub metric: Metric,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// Mean and SD of every metric per condition (conditions in the given order).
pub fn summarize(profiles: &[LinguisticProfile], conditions: &[String]) -> Vec<ConditionSummary> {
    let mut out = Vec::new();
    for c in conditions {
        for m in Metric::ALL {
            let xs: Vec<f64> = profiles.iter().filter(|p| &p.condition == c).filter_map(|p| m.value(p)).collect();
            if xs.is_empty() {
                continue;
            }
            out.push(ConditionSummary {
                condition: c.clone(),
                metric: m,
                mean: mean(&xs),
                sd: if xs.len() > 1 { variance(&xs).sqrt() } else { 0.0 },
                n: xs.len(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub a: String,
    pub b: String,
    pub test: TestResult,
    pub p_bh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: Metric,
    pub conditions: Vec<String>,
    /// Participants with a value in every condition.
    pub n: usize,
    pub friedman: TestResult,
    pub pairwise: Vec<PairwiseRow>,
}

/// Participant x condition matrix of a metric; documents of the same
/// participant and condition are averaged. Participants missing any
/// condition are dropped.
fn participant_matrix(profiles: &[LinguisticProfile], metric: Metric, conditions: &[String]) -> Vec<Vec<f64>> {
    let mut cells: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for p in profiles {
        let Some(j) = conditions.iter().position(|c| c == &p.condition) else {
            continue;
        };
        if let Some(v) = metric.value(p) {
            cells.entry(&p.participant_id).or_insert_with(|| vec![Vec::new(); conditions.len()])[j].push(v);
        }
    }
    cells
        .into_values()
        .filter(|row| row.iter().all(|c| !c.is_empty()))
        .map(|row| row.iter().map(|c| mean(c)).collect())
        .collect()
}

/// Friedman test across conditions with Kendall's W, then BH-adjusted
/// pairwise Wilcoxon signed-rank tests.
pub fn compare_conditions(profiles: &[LinguisticProfile], metric: Metric, conditions: &[String]) -> Result<MetricComparison> {
    if conditions.len() < 2 {
        return Err(Error::Argument("need at least two conditions".into()));
    }
    let rows = participant_matrix(profiles, metric, conditions);
    let fr = friedman(&rows)?;
    let mut pairwise = Vec::new();
    for i in 0..conditions.len() {
        for j in i + 1..conditions.len() {
            let x: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let y: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            pairwise.push(PairwiseRow {
                a: conditions[i].clone(),
                b: conditions[j].clone(),
                test: wilcoxon_signed_rank(&x, &y)?,
                p_bh: f64::NAN,
            });
        }
    }
    let adj = bh_adjust(&pairwise.iter().map(|r| r.test.p_value).collect::<Vec<_>>())?;
    for (r, p) in pairwise.iter_mut().zip(adj) {
        r.p_bh = p;
    }
    Ok(MetricComparison {
        metric,
        conditions: conditions.to_vec(),
        n: rows.len(),
        friedman: fr,
        pairwise,
    })
}
