use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{AnnotatedCorpus, Document, Sentence};
use crate::{Error, Result};

pub const HDD_SAMPLE_SIZE: usize = 42;

fn counted_sentences(doc: &Document) -> impl Iterator<Item = &Sentence> {
    doc.sentences.iter().filter(|s| s.tokens.iter().any(|t| t.is_counted()))
}

fn n_counted(doc: &Document) -> usize {
    doc.counted_tokens().count()
}

/// Mean counted tokens per sentence; sentences with no counted token are
/// left out of the denominator.
pub fn avg_sentence_length(doc: &Document) -> Result<f64> {
    let n_sent = counted_sentences(doc).count();
    if n_sent == 0 {
        return Err(Error::InsufficientData(format!("{}: no sentence has a counted token", doc.doc_id)));
    }
    Ok(n_counted(doc) as f64 / n_sent as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mdd {
    pub mdd: f64,
    pub mdd_normalized: f64,
    pub n_dependencies: usize,
}

/// Mean dependency distance. Indices run over counted tokens only unless
/// `punct_in_indices` is set; dependents are always counted tokens, and a
/// dependency whose head is not counted is skipped.
pub fn mdd_with(doc: &Document, punct_in_indices: bool) -> Result<Mdd> {
    let mut total = 0usize;
    let mut n = 0usize;
    for s in &doc.sentences {
        let mut pos = vec![None; s.tokens.len()];
        let mut k = 0usize;
        for (i, t) in s.tokens.iter().enumerate() {
            if punct_in_indices || t.is_counted() {
                k += 1;
                pos[i] = Some(k);
            }
        }
        for (i, t) in s.tokens.iter().enumerate() {
            if t.head == 0 || !t.is_counted() || !s.tokens[t.head - 1].is_counted() {
                continue;
            }
            if let (Some(a), Some(b)) = (pos[i], pos[t.head - 1]) {
                total += a.abs_diff(b);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!("{}: no dependencies between counted tokens", doc.doc_id)));
    }
    let mdd = total as f64 / n as f64;
    Ok(Mdd {
        mdd,
        mdd_normalized: mdd / avg_sentence_length(doc)?,
        n_dependencies: n,
    })
}

pub fn mdd(doc: &Document) -> Result<Mdd> {
    mdd_with(doc, false)
}

/// Steps from a token to its sentence root (root = 0).
fn token_depth(s: &Sentence, i: usize, context: &str) -> Result<usize> {
    let mut cur = i;
    for steps in 0..=s.tokens.len() {
        let h = s.tokens[cur].head;
        if h == 0 {
            return Ok(steps);
        }
        cur = h - 1;
    }
    Err(Error::Structural {
        context: context.to_string(),
        message: format!("cyclic head chain at token {}", i + 1),
    })
}

/// Mean depth of the counted tokens.
pub fn dependency_depth(doc: &Document) -> Result<f64> {
    let mut total = 0usize;
    let mut n = 0usize;
    for s in &doc.sentences {
        for (i, t) in s.tokens.iter().enumerate() {
            if t.is_counted() {
                total += token_depth(s, i, &format!("{} sentence {}", doc.doc_id, s.id))?;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(format!("{}: no counted tokens", doc.doc_id)));
    }
    Ok(total as f64 / n as f64)
}

/// P(type with frequency f is absent from a size-s draw out of N).
fn miss_probability(n: usize, f: usize, s: usize) -> f64 {
    if n - f < s {
        return 0.0;
    }
    (0..s).map(|i| (n - f - i) as f64 / (n - i) as f64).product()
}

/// HD-D over case-folded forms of a token list.
pub fn hdd_tokens<S: AsRef<str>>(tokens: &[S], sample_size: usize) -> Result<f64> {
    let n = tokens.len();
    if sample_size == 0 {
        return Err(Error::Argument("sample size must be positive".into()));
    }
    if n < sample_size {
        return Err(Error::InsufficientData(format!("{n} tokens, HD-D needs {sample_size}")));
    }
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for t in tokens {
        *freq.entry(t.as_ref().to_lowercase()).or_default() += 1;
    }
    let expected: f64 = freq.values().map(|&f| 1.0 - miss_probability(n, f, sample_size)).sum();
    Ok(expected / sample_size as f64)
}

pub fn hdd(doc: &Document, sample_size: usize) -> Result<f64> {
    let forms: Vec<&str> = doc.counted_tokens().map(|t| t.form.as_str()).collect();
    hdd_tokens(&forms, sample_size).map_err(|e| match e {
        Error::InsufficientData(m) => Error::InsufficientData(format!("{}: {m}", doc.doc_id)),
        e => e,
    })
}

/// Entity spans per counted token.
pub fn ne_density(doc: &Document) -> Result<f64> {
    let n = n_counted(doc);
    if n == 0 {
        return Err(Error::InsufficientData(format!("{}: no counted tokens", doc.doc_id)));
    }
    Ok(doc.entities.len() as f64 / n as f64)
}

/// Relative frequency of within-sentence tag pairs of counted tokens,
/// keyed `"A-B"`.
pub fn pos_bigram_profile(doc: &Document) -> Result<BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in &doc.sentences {
        let tags: Vec<&str> = s.tokens.iter().filter(|t| t.is_counted()).map(|t| t.tag.as_str()).collect();
        for w in tags.windows(2) {
            *counts.entry(format!("{}-{}", w[0], w[1])).or_default() += 1;
        }
    }
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(Error::InsufficientData(format!("{}: no sentence has two counted tokens", doc.doc_id)));
    }
    Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / total as f64)).collect())
}

/// Relative frequency of entity labels; empty when the document has none.
pub fn ner_label_profile(doc: &Document) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for e in &doc.entities {
        *counts.entry(e.label.clone()).or_default() += 1;
    }
    let total = doc.entities.len() as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / total)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticProfile {
    pub doc_id: String,
    pub participant_id: String,
    pub condition: String,
    /// Sentences with at least one counted token.
    pub n_sentences: usize,
    pub n_tokens: usize,
    pub avg_sentence_length: f64,
    pub mdd: Option<f64>,
    pub mdd_normalized: Option<f64>,
    pub mean_depth: f64,
    /// None when the document is shorter than the HD-D sample.
    pub hdd: Option<f64>,
    pub ne_density: f64,
    pub pos_bigrams: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub hdd_sample_size: usize,
    pub punct_in_indices: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            hdd_sample_size: HDD_SAMPLE_SIZE,
            punct_in_indices: false,
        }
    }
}

pub fn profile_document(doc: &Document, opts: &ProfileOptions) -> Result<LinguisticProfile> {
    let asl = avg_sentence_length(doc)?;
    let dist = match mdd_with(doc, opts.punct_in_indices) {
        Ok(m) => Some(m),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    let hdd = match hdd(doc, opts.hdd_sample_size) {
        Ok(h) => Some(h),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(LinguisticProfile {
        doc_id: doc.doc_id.clone(),
        participant_id: doc.participant_id.clone(),
        condition: doc.condition.clone(),
        n_sentences: counted_sentences(doc).count(),
        n_tokens: n_counted(doc),
        avg_sentence_length: asl,
        mdd: dist.map(|m| m.mdd),
        mdd_normalized: dist.map(|m| m.mdd_normalized),
        mean_depth: dependency_depth(doc)?,
        hdd,
        ne_density: ne_density(doc)?,
        pos_bigrams: pos_bigram_profile(doc).unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusProfiles {
    pub profiles: Vec<LinguisticProfile>,
    /// Documents too short for HD-D.
    pub hdd_excluded: Vec<String>,
    /// Documents that could not be profiled at all, with the reason.
    pub failed: Vec<(String, String)>,
}

/// Profiles every document in parallel; output keeps corpus order.
pub fn profile_corpus(corpus: &AnnotatedCorpus, opts: &ProfileOptions) -> CorpusProfiles {
    let results: Vec<Result<LinguisticProfile>> =
        corpus.documents.par_iter().map(|d| profile_document(d, opts)).collect();
    let mut out = CorpusProfiles {
        profiles: Vec::new(),
        hdd_excluded: Vec::new(),
        failed: Vec::new(),
    };
    for (doc, r) in corpus.documents.iter().zip(results) {
        match r {
            Ok(p) => {
                if p.hdd.is_none() {
                    out.hdd_excluded.push(p.doc_id.clone());
                }
                out.profiles.push(p);
            }
            Err(e) => out.failed.push((doc.doc_id.clone(), e.to_string())),
        }
    }
    out
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per document; missing values are empty cells.
pub fn write_profiles_csv(profiles: &[LinguisticProfile]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "doc_id",
        "participant_id",
        "condition",
        "n_sentences",
        "n_tokens",
        "avg_sentence_length",
        "mdd",
        "mdd_normalized",
        "mean_depth",
        "hdd",
        "ne_density",
    ])
    .map_err(|e| Error::Argument(e.to_string()))?;
    for p in profiles {
        w.write_record([
            p.doc_id.clone(),
            p.participant_id.clone(),
            p.condition.clone(),
            p.n_sentences.to_string(),
            p.n_tokens.to_string(),
            p.avg_sentence_length.to_string(),
            opt(p.mdd),
            opt(p.mdd_normalized),
            p.mean_depth.to_string(),
            opt(p.hdd),
            p.ne_density.to_string(),
        ])
        .map_err(|e| Error::Argument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Argument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
