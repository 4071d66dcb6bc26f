use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Flat set of admissible lowercased word forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    words: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            return Err(Error::Validation(vec!["lexicon is empty".into()]));
        }
        Ok(Self { words })
    }

    /// Exact lookup; multiword entries match with spaces or underscores.
    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word) || (word.contains(' ') && self.words.contains(&word.replace(' ', "_")))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Newline-delimited word list; `#` starts a comment line.
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    Lexicon::new(content_lines(&read(path)?))
}

pub fn write_lexicon(lex: &Lexicon) -> String {
    lex.iter().map(|w| format!("{w}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructDictionary {
    pub name: String,
    pub terms: Vec<String>,
}

impl ConstructDictionary {
    /// Lowercases and deduplicates terms, keeping first occurrence order.
    pub fn new<I, S>(name: impl Into<String>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let name = name.into();
        let mut seen = BTreeSet::new();
        let terms: Vec<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty() && seen.insert(t.clone()))
            .collect();
        if terms.is_empty() {
            return Err(Error::Validation(vec![format!("dictionary `{name}` has no terms")]));
        }
        Ok(Self { name, terms })
    }
}

fn parse_named_line(line: &str) -> Option<(&str, Vec<&str>)> {
    let (name, rest) = line.split_once(':')?;
    Some((name.trim(), rest.split(',').collect()))
}

/// Parse dictionaries from text. Lines of the form `name: a, b, c` each
/// define one dictionary; otherwise the whole file is one dictionary named
/// `default_name` with one term (or comma-separated terms) per line.
pub fn parse_dictionaries(text: &str, default_name: &str) -> Result<Vec<ConstructDictionary>> {
    let lines: Vec<&str> = content_lines(text).collect();
    if !lines.is_empty() && lines.iter().all(|l| l.contains(':')) {
        lines
            .iter()
            .map(|l| {
                let (name, terms) = parse_named_line(l).expect("contains ':'");
                ConstructDictionary::new(name, terms)
            })
            .collect()
    } else {
        let terms: Vec<&str> = lines.iter().flat_map(|l| l.split(',')).collect();
        Ok(vec![ConstructDictionary::new(default_name, terms)?])
    }
}

/// Load a single dictionary; a file holding several named dictionaries is
/// rejected (use [`load_dictionaries`]).
pub fn load_dictionary(path: &Path) -> Result<ConstructDictionary> {
    let mut dicts = load_dictionaries(path)?;
    if dicts.len() != 1 {
        return Err(Error::Validation(vec![format!(
            "{} defines {} dictionaries, expected one",
            path.display(),
            dicts.len()
        )]));
    }
    Ok(dicts.remove(0))
}

/// Load every dictionary in a file, or in every `*.txt` file of a directory
/// (sorted by file name).
pub fn load_dictionaries(path: &Path) -> Result<Vec<ConstructDictionary>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let mut out = Vec::new();
        for f in files {
            out.extend(load_dictionaries(&f)?);
        }
        return Ok(out);
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dictionaries(&read(path)?, &stem)
}

pub fn write_dictionary(dict: &ConstructDictionary) -> String {
    format!("{}: {}\n", dict.name, dict.terms.join(", "))
}
