use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One cue with up to three responses; an empty slot is `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub cue: String,
    pub responses: [Option<String>; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationDataset {
    pub source: String,
    pub records: Vec<AssociationRecord>,
}

/// Counts reported per source (cue count, response volume, missingness).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationDescriptives {
    pub source: String,
    pub n_cues: usize,
    pub total_responses: usize,
    pub unique_responses: usize,
    pub missing_rate: f64,
}

impl AssociationDataset {
    pub fn new(source: impl Into<String>, records: Vec<AssociationRecord>) -> Self {
        let records = records
            .into_iter()
            .map(|r| AssociationRecord {
                cue: r.cue.trim().to_lowercase(),
                responses: r.responses.map(|s| s.map(|t| t.trim().to_lowercase()).filter(|t| !t.is_empty())),
            })
            .collect();
        Self {
            source: source.into(),
            records,
        }
    }

    /// Empty response slots over `3 * records`.
    pub fn missing_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let empty: usize = self
            .records
            .iter()
            .map(|r| r.responses.iter().filter(|s| s.is_none()).count())
            .sum();
        empty as f64 / (3 * self.records.len()) as f64
    }

    pub fn descriptives(&self) -> AssociationDescriptives {
        let cues: BTreeSet<&str> = self.records.iter().map(|r| r.cue.as_str()).collect();
        let responses: Vec<&str> = self
            .records
            .iter()
            .flat_map(|r| r.responses.iter().flatten().map(String::as_str))
            .collect();
        let unique: BTreeSet<&str> = responses.iter().copied().collect();
        AssociationDescriptives {
            source: self.source.clone(),
            n_cues: cues.len(),
            total_responses: responses.len(),
            unique_responses: unique.len(),
            missing_rate: self.missing_rate(),
        }
    }
}

const MISSING_MARKERS: [&str; 4] = ["", "na", "nan", "no more responses"];

fn slot(raw: Option<&str>) -> Option<String> {
    let s = raw?.trim().to_lowercase();
    if MISSING_MARKERS.contains(&s.as_str()) {
        None
    } else {
        Some(s)
    }
}

/// Load a `cue, R1, R2, R3` CSV (header names matched case-insensitively;
/// other columns ignored). Missing R columns count as empty slots.
pub fn load_association_file(path: &Path) -> Result<AssociationDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(path.display(), 1, e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let cue_col = find("cue").ok_or_else(|| Error::parse(path.display(), 1, "missing `cue` column"))?;
    let r_cols = [find("R1"), find("R2"), find("R3")];

    let mut records = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path.display(), row + 2, e.to_string()))?;
        let cue = rec.get(cue_col).unwrap_or("").trim().to_lowercase();
        if cue.is_empty() {
            return Err(Error::parse(path.display(), row + 2, "empty cue"));
        }
        let responses = r_cols.map(|c| slot(c.and_then(|c| rec.get(c))));
        records.push(AssociationRecord { cue, responses });
    }
    let source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(AssociationDataset { source, records })
}

pub fn write_associations(ds: &AssociationDataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cue", "R1", "R2", "R3"]).expect("in-memory write");
    for r in &ds.records {
        let [a, b, c] = &r.responses;
        w.write_record([
            r.cue.as_str(),
            a.as_deref().unwrap_or(""),
            b.as_deref().unwrap_or(""),
            c.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
