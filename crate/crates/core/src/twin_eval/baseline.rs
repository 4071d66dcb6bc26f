use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{accuracy_from, item_correlations_from, profile_correlations_from, BaselineInterval, CorrelationMethod};
use crate::dataio::{Answer, ItemKind, ItemMeta, ResponseDataset};
use crate::stats::{mean, quantile_sorted, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMetric {
    Accuracy,
    ItemCorr,
    ProfileCorr,
}

impl BaselineMetric {
    pub fn codomain(self) -> (f64, f64) {
        match self {
            BaselineMetric::Accuracy => (0.0, 1.0),
            _ => (-1.0, 1.0),
        }
    }
}

/// One draw from the uniform null for an item: uniform over options for
/// discrete items, over the feasible range for numeric items, and over the
/// integers in range for ordinal items with integer bounds.
pub fn null_answer<R: Rng>(meta: &ItemMeta, rng: &mut R) -> Option<Answer> {
    match meta.kind {
        ItemKind::Text => None,
        ItemKind::Binary | ItemKind::Categorical => Some(Answer::Choice(rng.gen_range(0..meta.options.len()))),
        ItemKind::Numeric | ItemKind::Ordinal => {
            let (lo, hi) = meta.range?;
            if meta.kind == ItemKind::Ordinal && lo.fract() == 0.0 && hi.fract() == 0.0 {
                Some(Answer::Value(rng.gen_range(lo as i64..=hi as i64) as f64))
            } else {
                Some(Answer::Value(rng.gen_range(lo..=hi)))
            }
        }
    }
}

fn simulate(ds: &ResponseDataset, rng: &RngStream) -> Vec<Vec<Option<Answer>>> {
    let mut r = rng.rng();
    ds.human()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&ds.items)
                .map(|(h, meta)| h.as_ref().and_then(|_| null_answer(meta, &mut r)))
                .collect()
        })
        .collect()
}

fn metric_value(ds: &ResponseDataset, grid: &[Vec<Option<Answer>>], metric: BaselineMetric, method: CorrelationMethod) -> Option<f64> {
    match metric {
        BaselineMetric::Accuracy => accuracy_from(ds, "null", grid).ok().map(|r| r.overall),
        BaselineMetric::ItemCorr => item_correlations_from(ds, "null", grid, method).overall,
        BaselineMetric::ProfileCorr => profile_correlations_from(ds, "null", grid, method).overall,
    }
}

/// Percentile interval of `metric` over `n_sets` twin channels drawn from
/// the uniform null, each from its own substream of `rng`.
pub fn random_baseline(
    ds: &ResponseDataset,
    metric: BaselineMetric,
    n_sets: usize,
    rng: &RngStream,
    method: CorrelationMethod,
) -> Result<BaselineInterval> {
    if n_sets == 0 {
        return Err(Error::Argument("n_sets must be positive".into()));
    }
    let mut values: Vec<f64> = (0..n_sets as u64)
        .into_par_iter()
        .filter_map(|s| {
            let grid = simulate(ds, &rng.substream(s));
            metric_value(ds, &grid, metric, method)
        })
        .collect();
    if values.is_empty() {
        return Err(Error::InsufficientData(format!("{metric:?} undefined in every simulated set")));
    }
    values.sort_by(f64::total_cmp);
    Ok(BaselineInterval {
        lo: quantile_sorted(&values, 0.025),
        hi: quantile_sorted(&values, 0.975),
        mean: mean(&values),
        n_sets,
        n_valid: values.len(),
        interval: "percentile 2.5/97.5".into(),
        null_model: "uniform over options or feasible range".into(),
    })
}
