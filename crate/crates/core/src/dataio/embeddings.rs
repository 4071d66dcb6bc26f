use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense vectors keyed by token or document id, all of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStore {
    pub dim: usize,
    pub model: Option<String>,
    vectors: BTreeMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct Line {
    id: Option<String>,
    vector: Option<Vec<f64>>,
    model: Option<String>,
    dim: Option<usize>,
}

impl EmbeddingStore {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        let mut dim = None;
        for (id, v) in entries {
            check_vector(&id, &v, &mut dim)?;
            if vectors.insert(id.clone(), v).is_some() {
                return Err(Error::Validation(vec![format!("duplicate embedding id `{id}`")]));
            }
        }
        let dim = dim.ok_or_else(|| Error::Validation(vec!["embedding store is empty".into()]))?;
        Ok(Self {
            dim,
            model: None,
            vectors,
        })
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

fn check_vector(id: &str, v: &[f64], dim: &mut Option<usize>) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation(vec![format!("embedding `{id}` has a non-finite component")]));
    }
    match *dim {
        Some(d) if d != v.len() => Err(Error::Validation(vec![format!(
            "embedding `{id}` has dimension {}, expected {d}",
            v.len()
        )])),
        Some(_) => Ok(()),
        None if v.is_empty() => Err(Error::Validation(vec![format!("embedding `{id}` is empty")])),
        None => {
            *dim = Some(v.len());
            Ok(())
        }
    }
}

/// JSONL of `{"id": ..., "vector": [...]}`. An optional header, either an
/// object without a vector (`{"model": ..., "dim": ...}`) or `# model = ...`
/// / `# dim = ...` comment lines, pins the model id and the expected
/// dimension. Other `#` lines are ignored.
pub fn parse_embeddings(text: &str, source: &str) -> Result<EmbeddingStore> {
    let mut declared: Option<usize> = None;
    let mut model = None;
    let mut dim = None;
    let mut vectors = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(comment) = raw.trim_start().strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                match k.trim() {
                    "model" => model = Some(v.trim().to_string()),
                    "dim" => {
                        let d = v.trim().parse().map_err(|_| Error::parse(source, ln + 1, "invalid dim header"))?;
                        declared = Some(d);
                    }
                    _ => {}
                }
            }
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| Error::parse(source, ln + 1, e.to_string()))?;
        match (line.id, line.vector) {
            (Some(id), Some(v)) => {
                if dim.is_none() {
                    dim = declared;
                }
                check_vector(&id, &v, &mut dim)?;
                if vectors.insert(id.clone(), v).is_some() {
                    return Err(Error::Validation(vec![format!("duplicate embedding id `{id}`")]));
                }
            }
            (None, None) if vectors.is_empty() => {
                model = line.model.or(model);
                declared = line.dim.or(declared);
            }
            _ => return Err(Error::parse(source, ln + 1, "expected {\"id\", \"vector\"}")),
        }
    }
    let dim = dim.ok_or_else(|| Error::Validation(vec![format!("{source}: no embeddings")]))?;
    Ok(EmbeddingStore { dim, model, vectors })
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, &path.display().to_string())
}

pub fn write_embeddings(store: &EmbeddingStore) -> String {
    let mut out = String::new();
    if let Some(m) = &store.model {
        out.push_str(&format!("# model = {m}\n# dim = {}\n", store.dim));
    }
    for (id, v) in &store.vectors {
        out.push_str(&serde_json::json!({"id": id, "vector": v}).to_string());
        out.push('\n');
    }
    out
}
