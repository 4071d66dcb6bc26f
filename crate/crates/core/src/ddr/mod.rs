//! Dictionary-based construct scoring of document embeddings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{AnnotatedCorpus, ConstructDictionary, EmbeddingStore};
use crate::stats::{ks_asymptotic_p, ks_statistic, paired_permutation_p, RngStream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructVector {
    pub name: String,
    pub vector: Vec<f64>,
    pub n_terms_found: usize,
    pub n_terms_missing: usize,
    pub missing_terms: Vec<String>,
}

/// Elementwise mean of the dictionary terms present in `store`.
pub fn construct_vector(dict: &ConstructDictionary, store: &EmbeddingStore) -> Result<ConstructVector> {
    let mut sum = vec![0.0; store.dim];
    let mut found = 0usize;
    let mut missing_terms = Vec::new();
    for t in &dict.terms {
        match store.get(t) {
            Some(v) => {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                found += 1;
            }
            None => missing_terms.push(t.clone()),
        }
    }
    if found == 0 {
        return Err(Error::Coverage(dict.name.clone()));
    }
    Ok(ConstructVector {
        name: dict.name.clone(),
        vector: sum.into_iter().map(|s| s / found as f64).collect(),
        n_terms_found: found,
        n_terms_missing: missing_terms.len(),
        missing_terms,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("dimension mismatch: {} vs {}", a.len(), b.len())));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Argument("cosine of a zero-norm vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub fn text_similarity(doc_vec: &[f64], construct: &ConstructVector) -> Result<f64> {
    cosine(doc_vec, &construct.vector)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    pub doc_id: String,
    pub participant_id: String,
    pub condition: String,
}

impl DocMeta {
    pub fn from_corpus(corpus: &AnnotatedCorpus) -> Vec<DocMeta> {
        corpus
            .documents
            .iter()
            .map(|d| DocMeta {
                doc_id: d.doc_id.clone(),
                participant_id: d.participant_id.clone(),
                condition: d.condition.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub doc_id: String,
    pub participant_id: String,
    pub condition: String,
    pub construct: String,
    pub cosine: f64,
}

/// Cosine of every document against every construct. A document without
/// an embedding, or with a zero vector, is a validation error naming it.
pub fn score_documents(docs: &[DocMeta], store: &EmbeddingStore, constructs: &[ConstructVector]) -> Result<Vec<SimilarityRow>> {
    let mut problems = Vec::new();
    let mut rows = Vec::new();
    for d in docs {
        let Some(v) = store.get(&d.doc_id) else {
            problems.push(format!("document `{}` has no embedding", d.doc_id));
            continue;
        };
        if norm(v) == 0.0 {
            problems.push(format!("document `{}` has a zero-norm embedding", d.doc_id));
            continue;
        }
        for c in constructs {
            rows.push(SimilarityRow {
                doc_id: d.doc_id.clone(),
                participant_id: d.participant_id.clone(),
                condition: d.condition.clone(),
                construct: c.name.clone(),
                cosine: text_similarity(v, c)?,
            });
        }
    }
    if problems.is_empty() {
        Ok(rows)
    } else {
        Err(Error::Validation(problems))
    }
}

pub fn write_similarity_csv(rows: &[SimilarityRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["doc_id", "condition", "construct", "cosine"])
        .map_err(|e| Error::Argument(e.to_string()))?;
    for r in rows {
        w.write_record([r.doc_id.as_str(), r.condition.as_str(), r.construct.as_str(), &r.cosine.to_string()])
            .map_err(|e| Error::Argument(e.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Argument(e.to_string()))?).expect("utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfResult {
    pub d: f64,
    pub p_asymptotic: f64,
    pub p_permutation: f64,
    pub n: usize,
}

/// KS distance between two paired samples, with a permutation p that swaps
/// the two values within each pair.
pub fn ecdf_compare(a: &[f64], b: &[f64], n_perm: usize, rng: &RngStream) -> Result<EcdfResult> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    let stat = |p: &[(&f64, &f64)]| {
        let x: Vec<f64> = p.iter().map(|q| *q.0).collect();
        let y: Vec<f64> = p.iter().map(|q| *q.1).collect();
        ks_statistic(&x, &y)
    };
    let d = ks_statistic(a, b);
    Ok(EcdfResult {
        d,
        p_asymptotic: ks_asymptotic_p(d, a.len(), b.len()),
        p_permutation: paired_permutation_p(stat, &pairs, n_perm, *rng)?,
        n: a.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructComparison {
    pub construct: String,
    pub condition_a: String,
    pub condition_b: String,
    pub result: EcdfResult,
    /// Participants missing from one of the two conditions.
    pub unmatched: Vec<String>,
}

/// Pairs per-participant mean similarities between two conditions and runs
/// [`ecdf_compare`].
pub fn compare_construct(
    rows: &[SimilarityRow],
    construct: &str,
    cond_a: &str,
    cond_b: &str,
    n_perm: usize,
    rng: &RngStream,
) -> Result<ConstructComparison> {
    let collect = |cond: &str| {
        let mut m: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.construct == construct && r.condition == cond) {
            m.entry(&r.participant_id).or_default().push(r.cosine);
        }
        m.into_iter()
            .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
            .collect::<BTreeMap<&str, f64>>()
    };
    let (ma, mb) = (collect(cond_a), collect(cond_b));
    let unmatched = ma
        .keys()
        .filter(|k| !mb.contains_key(*k))
        .chain(mb.keys().filter(|k| !ma.contains_key(*k)))
        .map(|k| k.to_string())
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = ma.iter().filter_map(|(k, x)| mb.get(k).map(|y| (*x, *y))).unzip();
    Ok(ConstructComparison {
        construct: construct.to_string(),
        condition_a: cond_a.to_string(),
        condition_b: cond_b.to_string(),
        result: ecdf_compare(&a, &b, n_perm, rng)?,
        unmatched,
    })
}
