//! CoNLL-U corpus reader and writer.
//!
//! Documents are delimited by `# newdoc id = ...`; `# participant_id = ...`
//! and `# condition = ...` comments attach to the current document and
//! `# model = ...` comments are collected as corpus-level provenance.
//! Entity spans ride in MISC as `NER=LABEL-B` / `NER=LABEL-I` (BIO), or can
//! be attached afterwards from a sidecar JSON file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    /// UPOS tag, or the language-specific tag when UPOS is `_`.
    pub tag: String,
    /// 1-based head position within the sentence; 0 is the root.
    pub head: usize,
    pub deprel: String,
    pub is_punct: bool,
    pub is_space: bool,
}

impl Token {
    /// Counted tokens exclude punctuation and whitespace.
    pub fn is_counted(&self) -> bool {
        !self.is_punct && !self.is_space
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn root(&self) -> usize {
        self.tokens.iter().position(|t| t.head == 0).expect("validated sentence has a root")
    }
}

/// Entity span over sentence tokens `[start, end)` (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub participant_id: String,
    pub condition: String,
    pub sentences: Vec<Sentence>,
    pub entities: Vec<EntitySpan>,
}

impl Document {
    pub fn counted_tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter()).filter(|t| t.is_counted())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotatedCorpus {
    pub documents: Vec<Document>,
    /// Annotator model identifiers found in `# model = ...` headers.
    pub models: Vec<String>,
}

impl AnnotatedCorpus {
    pub fn by_condition(&self, condition: &str) -> Vec<&Document> {
        self.documents.iter().filter(|d| d.condition == condition).collect()
    }

    pub fn conditions(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for d in &self.documents {
            if !out.contains(&d.condition) {
                out.push(d.condition.clone());
            }
        }
        out
    }
}

fn is_punct_tag(upos: &str, xpos: &str) -> bool {
    upos == "PUNCT" || (upos == "_" && (xpos == "PU" || xpos == "PUNCT"))
}

/// Check root count, head bounds and entity spans.
pub fn validate_sentence(sentence: &Sentence, context: &str) -> Result<()> {
    let roots = sentence.tokens.iter().filter(|t| t.head == 0).count();
    if roots != 1 {
        return Err(Error::Structural {
            context: format!("{context} sentence {}", sentence.id),
            message: format!("expected exactly one root, found {roots}"),
        });
    }
    if let Some(t) = sentence.tokens.iter().find(|t| t.head > sentence.tokens.len()) {
        return Err(Error::Structural {
            context: format!("{context} sentence {}", sentence.id),
            message: format!("head {} out of range for token `{}`", t.head, t.form),
        });
    }
    Ok(())
}

fn validate_spans(doc: &Document) -> Result<()> {
    let mut spans: Vec<&EntitySpan> = doc.entities.iter().collect();
    spans.sort_by_key(|s| (s.sentence, s.start));
    for s in &spans {
        let len = doc.sentences.get(s.sentence).map(|x| x.tokens.len());
        if len.is_none_or(|l| s.end > l) || s.start >= s.end {
            return Err(Error::Structural {
                context: format!("document {}", doc.doc_id),
                message: format!("entity span {}..{} in sentence {} out of bounds", s.start, s.end, s.sentence),
            });
        }
    }
    for w in spans.windows(2) {
        if w[0].sentence == w[1].sentence && w[1].start < w[0].end {
            return Err(Error::Structural {
                context: format!("document {}", doc.doc_id),
                message: format!("overlapping entity spans in sentence {}", w[0].sentence),
            });
        }
    }
    Ok(())
}

fn parse_ner(misc: &str) -> Option<(String, bool)> {
    let value = misc.split('|').find_map(|kv| kv.strip_prefix("NER="))?;
    if value == "O" || value.is_empty() {
        return None;
    }
    if let Some(l) = value.strip_suffix("-B") {
        Some((l.to_string(), true))
    } else if let Some(l) = value.strip_suffix("-I") {
        Some((l.to_string(), false))
    } else if let Some(l) = value.strip_prefix("B-") {
        Some((l.to_string(), true))
    } else if let Some(l) = value.strip_prefix("I-") {
        Some((l.to_string(), false))
    } else {
        Some((value.to_string(), true))
    }
}

struct Builder {
    docs: Vec<Document>,
    models: Vec<String>,
    default_doc: String,
    sent: Vec<Token>,
    sent_ner: Vec<Option<(String, bool)>>,
    sent_id: Option<String>,
    sent_line: usize,
}

impl Builder {
    fn current_doc(&mut self) -> &mut Document {
        if self.docs.is_empty() {
            self.docs.push(Document {
                doc_id: self.default_doc.clone(),
                participant_id: String::new(),
                condition: String::new(),
                sentences: Vec::new(),
                entities: Vec::new(),
            });
        }
        self.docs.last_mut().expect("non-empty")
    }

    fn flush_sentence(&mut self) -> Result<()> {
        if self.sent.is_empty() {
            self.sent_id = None;
            return Ok(());
        }
        let tokens = std::mem::take(&mut self.sent);
        let ner = std::mem::take(&mut self.sent_ner);
        let line = self.sent_line;
        let sent_id = self.sent_id.take();
        let doc = self.current_doc();
        let idx = doc.sentences.len();
        let id = sent_id.unwrap_or_else(|| format!("{}#{}", doc.doc_id, idx + 1));
        let sentence = Sentence { id, tokens };
        validate_sentence(&sentence, &format!("line {line}"))?;

        let mut open: Option<EntitySpan> = None;
        let mut spans = Vec::new();
        for (i, tag) in ner.into_iter().enumerate() {
            match tag {
                Some((label, begin)) => {
                    let continues = !begin && open.as_ref().is_some_and(|s| s.label == label && s.end == i);
                    if continues {
                        open.as_mut().expect("open span").end = i + 1;
                    } else {
                        spans.extend(open.take());
                        open = Some(EntitySpan {
                            sentence: idx,
                            start: i,
                            end: i + 1,
                            label,
                        });
                    }
                }
                None => spans.extend(open.take()),
            }
        }
        spans.extend(open);
        let doc = self.current_doc();
        doc.sentences.push(sentence);
        doc.entities.extend(spans);
        Ok(())
    }
}

fn comment_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.trim_start_matches('#').trim_start();
    let rest = rest.strip_prefix(key)?.trim_start();
    Some(rest.strip_prefix('=')?.trim())
}

pub fn parse_conllu(text: &str, source: &str) -> Result<AnnotatedCorpus> {
    let mut b = Builder {
        docs: Vec::new(),
        models: Vec::new(),
        default_doc: source.to_string(),
        sent: Vec::new(),
        sent_ner: Vec::new(),
        sent_id: None,
        sent_line: 0,
    };
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            b.flush_sentence()?;
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = comment_value(line, "newdoc id") {
                b.flush_sentence()?;
                b.docs.push(Document {
                    doc_id: v.to_string(),
                    participant_id: String::new(),
                    condition: String::new(),
                    sentences: Vec::new(),
                    entities: Vec::new(),
                });
            } else if let Some(v) = comment_value(line, "participant_id") {
                b.current_doc().participant_id = v.to_string();
            } else if let Some(v) = comment_value(line, "condition") {
                b.current_doc().condition = v.to_string();
            } else if let Some(v) = comment_value(line, "model") {
                if !b.models.iter().any(|m| m == v) {
                    b.models.push(v.to_string());
                }
            } else if let Some(v) = comment_value(line, "sent_id") {
                b.sent_id = Some(v.to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(source, line_no, format!("expected 10 tab-separated columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue; // multiword ranges and empty nodes
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(source, line_no, format!("bad token id `{}`", cols[0])))?;
        if b.sent.is_empty() {
            b.sent_line = line_no;
        }
        if id != b.sent.len() + 1 {
            return Err(Error::parse(source, line_no, format!("token id {id} out of sequence")));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| Error::parse(source, line_no, format!("bad head `{}`", cols[6])))?;
        let (upos, xpos) = (cols[3], cols[4]);
        let tag = if upos == "_" { xpos } else { upos };
        b.sent.push(Token {
            form: cols[1].to_string(),
            tag: tag.to_string(),
            head,
            deprel: cols[7].to_string(),
            is_punct: is_punct_tag(upos, xpos),
            is_space: upos == "SPACE" || cols[1].trim().is_empty(),
        });
        b.sent_ner.push(parse_ner(cols[9]));
    }
    b.flush_sentence()?;
    let corpus = AnnotatedCorpus {
        documents: b.docs,
        models: b.models,
    };
    for d in &corpus.documents {
        validate_spans(d)?;
    }
    Ok(corpus)
}

pub fn load_conllu(path: &Path) -> Result<AnnotatedCorpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "doc".into());
    parse_conllu(&text, &stem)
}

/// Replace entity spans with those from a sidecar JSON file mapping
/// `doc_id -> [{sentence, start, end, label}]`.
pub fn attach_entity_spans(corpus: &mut AnnotatedCorpus, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spans: BTreeMap<String, Vec<EntitySpan>> = serde_json::from_str(&text)?;
    for (doc_id, list) in spans {
        let doc = corpus
            .documents
            .iter_mut()
            .find(|d| d.doc_id == doc_id)
            .ok_or_else(|| Error::Validation(vec![format!("span file names unknown document `{doc_id}`")]))?;
        doc.entities = list;
        validate_spans(doc)?;
    }
    Ok(())
}

/// Serialize back to CoNLL-U with the header conventions read by
/// [`parse_conllu`]. Lemma, features and deps are written as `_`.
pub fn write_conllu(corpus: &AnnotatedCorpus) -> String {
    let mut out = String::new();
    for m in &corpus.models {
        out.push_str(&format!("# model = {m}\n"));
    }
    for d in &corpus.documents {
        out.push_str(&format!("# newdoc id = {}\n", d.doc_id));
        if !d.participant_id.is_empty() {
            out.push_str(&format!("# participant_id = {}\n", d.participant_id));
        }
        if !d.condition.is_empty() {
            out.push_str(&format!("# condition = {}\n", d.condition));
        }
        for (si, s) in d.sentences.iter().enumerate() {
            out.push_str(&format!("# sent_id = {}\n", s.id));
            for (ti, t) in s.tokens.iter().enumerate() {
                let ner = d
                    .entities
                    .iter()
                    .find(|e| e.sentence == si && (e.start..e.end).contains(&ti))
                    .map(|e| format!("NER={}-{}", e.label, if e.start == ti { "B" } else { "I" }))
                    .unwrap_or_else(|| "_".into());
                // treebank punctuation tags (e.g. CTB `PU`) go back to XPOS
                let (upos, xpos) = if t.is_punct && t.tag != "PUNCT" {
                    ("_", t.tag.as_str())
                } else {
                    (t.tag.as_str(), "_")
                };
                out.push_str(&format!(
                    "{}\t{}\t_\t{}\t{}\t_\t{}\t{}\t_\t{}\n",
                    ti + 1,
                    t.form,
                    upos,
                    xpos,
                    t.head,
                    t.deprel,
                    ner
                ));
            }
            out.push('\n');
        }
    }
    out
}
