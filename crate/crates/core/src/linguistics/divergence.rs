use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::metrics::{ner_label_profile, pos_bigram_profile};
use crate::dataio::Document;
use crate::stats::{paired_permutation_p, RngStream};
use crate::{Error, Result};

pub type Distribution = BTreeMap<String, f64>;

fn check_distribution(p: &Distribution, name: &str) -> Result<()> {
    if p.values().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::Argument(format!("{name} has a negative or non-finite mass")));
    }
    let total: f64 = p.values().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Argument(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

fn jsd_unchecked(p: &Distribution, q: &Distribution) -> f64 {
    let keys: BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    let mut total = 0.0;
    for k in keys {
        let a = p.get(k).copied().unwrap_or(0.0);
        let b = q.get(k).copied().unwrap_or(0.0);
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).log2();
        }
    }
    total.clamp(0.0, 1.0)
}

/// Base-2 Jensen–Shannon divergence over the union of both supports.
pub fn jsd(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    Ok(jsd_unchecked(p, q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    NerLabels,
    PosBigrams,
}

impl Feature {
    fn profile(self, doc: &Document) -> Distribution {
        match self {
            Feature::NerLabels => ner_label_profile(doc),
            Feature::PosBigrams => pos_bigram_profile(doc).unwrap_or_default(),
        }
    }
}

/// Mean of the non-empty distributions, or None if all are empty.
fn mean_distribution<'a>(ds: impl Iterator<Item = &'a Distribution>) -> Option<Distribution> {
    let mut acc = Distribution::new();
    let mut n = 0usize;
    for d in ds.filter(|d| !d.is_empty()) {
        for (k, v) in d {
            *acc.entry(k.clone()).or_default() += v;
        }
        n += 1;
    }
    (n > 0).then(|| acc.into_iter().map(|(k, v)| (k, v / n as f64)).collect())
}

fn mean_jsd(pairs: &[(&Distribution, &Distribution)]) -> f64 {
    match (
        mean_distribution(pairs.iter().map(|p| p.0)),
        mean_distribution(pairs.iter().map(|p| p.1)),
    ) {
        (Some(a), Some(b)) => jsd_unchecked(&a, &b),
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceResult {
    pub subject: String,
    pub comparison: String,
    pub feature: Feature,
    /// Participants present in both conditions.
    pub n: usize,
    pub divergence: f64,
    /// None with a single matched participant (nothing to permute).
    pub p: Option<f64>,
    /// Participants found in only one of the two conditions.
    pub unmatched: Vec<String>,
}

/// Per-participant mean distribution; several documents from one
/// participant are averaged.
fn by_participant(docs: &[&Document], feature: Feature) -> BTreeMap<String, Distribution> {
    let mut grouped: BTreeMap<String, Vec<Distribution>> = BTreeMap::new();
    for d in docs {
        grouped.entry(d.participant_id.clone()).or_default().push(feature.profile(d));
    }
    grouped
        .into_iter()
        .map(|(k, v)| (k, mean_distribution(v.iter()).unwrap_or_default()))
        .collect()
}

/// JSD between the two conditions' mean feature distributions, with a
/// permutation p that swaps condition labels within participant.
/// Documents without any feature (e.g. no entities) are left out of the
/// condition means.
pub fn group_divergence(
    a: &[&Document],
    b: &[&Document],
    feature: Feature,
    n_perm: usize,
    rng: &RngStream,
) -> Result<DivergenceResult> {
    let pa = by_participant(a, feature);
    let pb = by_participant(b, feature);
    let unmatched: Vec<String> = pa.keys().filter(|k| !pb.contains_key(*k)).chain(pb.keys().filter(|k| !pa.contains_key(*k))).cloned().collect();
    let pairs: Vec<(Distribution, Distribution)> = pa
        .iter()
        .filter_map(|(k, da)| pb.get(k).map(|db| (da.clone(), db.clone())))
        .collect();
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no participant appears in both conditions".into()));
    }
    let refs: Vec<(&Distribution, &Distribution)> = pairs.iter().map(|(x, y)| (x, y)).collect();
    if mean_distribution(refs.iter().map(|p| p.0)).is_none() || mean_distribution(refs.iter().map(|p| p.1)).is_none() {
        return Err(Error::InsufficientData("a condition has no documents with this feature".into()));
    }
    let divergence = mean_jsd(&refs);
    let p = if pairs.len() > 1 {
        Some(paired_permutation_p(mean_jsd, &pairs, n_perm, *rng)?)
    } else {
        None
    };
    let cond = |docs: &[&Document]| docs.first().map(|d| d.condition.clone()).unwrap_or_default();
    Ok(DivergenceResult {
        subject: match feature {
            Feature::NerLabels => "NER".into(),
            Feature::PosBigrams => "POS bigrams".into(),
        },
        comparison: format!("{} vs {}", cond(a), cond(b)),
        feature,
        n: pairs.len(),
        divergence,
        p,
        unmatched,
    })
}
