use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::prompt::SchemaQuestion;
use crate::dataio::{format_number, Answer, ItemKind, ItemMeta};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TwinAnswerSet {
    /// item id -> validated answer
    pub answers: BTreeMap<String, Answer>,
    /// item id -> why the value was rejected; these cells count as missing
    pub invalid: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParseOptions {
    /// Require the whole reply to be one JSON object (no prose or fences).
    pub strict: bool,
}

/// First JSON object embedded in `raw`, skipping prose and code fences.
fn first_object(raw: &str) -> Option<Map<String, Value>> {
    let mut from = 0;
    while let Some(off) = raw[from..].find('{') {
        let start = from + off;
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(m))) = stream.next() {
            return Some(m);
        }
        from = start + 1;
    }
    None
}

fn get_ci<'a>(m: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    m.get(key)
        .or_else(|| m.iter().find(|(k, _)| k.trim().eq_ignore_ascii_case(key)).map(|(_, v)| v))
}

fn value_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Leading unsigned integer of "3 - Less than today", "3.", "3)" or "3".
fn leading_index(s: &str) -> Option<usize> {
    let digits: String = s.chars().take_while(char::is_ascii_digit).collect();
    if digits.is_empty() {
        return None;
    }
    let rest = s[digits.len()..].trim_start();
    if rest.is_empty() || rest.starts_with(['-', '.', ')', ':']) {
        digits.parse().ok()
    } else {
        None
    }
}

/// Leading number of "55", "4.5" or "5 - strongly agree".
fn leading_number(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let head = s.split(" - ").next()?.trim();
    head.parse().ok()
}

fn coerce(meta: &ItemMeta, v: &Value) -> std::result::Result<Answer, String> {
    let text = value_text(v).ok_or_else(|| format!("item {}: answer is not a scalar", meta.item_id))?;
    let answer = match meta.kind {
        ItemKind::Text => Answer::Text(text),
        ItemKind::Numeric | ItemKind::Ordinal => Answer::Value(
            leading_number(&text).ok_or_else(|| format!("item {}: `{text}` is not a number", meta.item_id))?,
        ),
        ItemKind::Binary | ItemKind::Categorical => {
            let by_label = meta.options.iter().position(|o| o.eq_ignore_ascii_case(&text)).or_else(|| {
                meta.options
                    .iter()
                    .enumerate()
                    .position(|(i, o)| format!("{} - {o}", i + 1).eq_ignore_ascii_case(&text))
            });
            match (by_label, leading_index(&text)) {
                (Some(i), _) => Answer::Choice(i),
                (None, Some(0)) => return Err(format!("item {}: option numbers start at 1", meta.item_id)),
                (None, Some(k)) => Answer::Choice(k - 1),
                (None, None) => return Err(format!("item {}: `{text}` is not one of its options", meta.item_id)),
            }
        }
    };
    meta.check_answer(&answer)?;
    Ok(answer)
}

/// Extract and validate a model reply against the expected schema.
///
/// Missing questions (or missing sub-answers of a matrix) raise a schema
/// violation listing them; values that fail the item's options or range
/// are kept in `invalid` and treated as missing.
pub fn parse_twin_response(raw: &str, schema: &[SchemaQuestion], opts: &ParseOptions) -> Result<TwinAnswerSet> {
    let obj = if opts.strict {
        match serde_json::from_str::<Value>(raw.trim()) {
            Ok(Value::Object(m)) => Some(m),
            _ => None,
        }
    } else {
        first_object(raw)
    };
    let obj = obj.ok_or_else(|| {
        let preview: String = raw.chars().take(80).collect();
        Error::ResponseParse(preview)
    })?;
    let mut missing = Vec::new();
    let mut set = TwinAnswerSet::default();
    for q in schema {
        let answers = get_ci(&obj, &q.qid).and_then(|v| match v {
            Value::Object(m) => get_ci(m, "Answers"),
            _ => None,
        });
        let Some(answers) = answers else {
            missing.push(q.qid.clone());
            continue;
        };
        for (k, item) in q.items.iter().enumerate() {
            let key = (k + 1).to_string();
            let v = match answers {
                Value::Object(m) => get_ci(m, &key),
                Value::Array(a) => a.get(k),
                scalar if q.items.len() == 1 => Some(scalar),
                _ => None,
            };
            match v {
                None => missing.push(if q.items.len() == 1 { q.qid.clone() } else { format!("{}.{key}", q.qid) }),
                Some(v) => match coerce(item, v) {
                    Ok(a) => {
                        set.answers.insert(item.item_id.clone(), a);
                    }
                    Err(e) => {
                        set.invalid.insert(item.item_id.clone(), e);
                    }
                },
            }
        }
    }
    if missing.is_empty() {
        Ok(set)
    } else {
        Err(Error::SchemaViolation(missing))
    }
}

/// JSON reply in the requested shape; the inverse of
/// [`parse_twin_response`] for a complete, valid answer set.
pub fn serialize_answer_set(schema: &[SchemaQuestion], set: &TwinAnswerSet) -> String {
    let mut root = Map::new();
    for q in schema {
        let mut answers = Map::new();
        for (k, item) in q.items.iter().enumerate() {
            if let Some(a) = set.answers.get(&item.item_id) {
                let text = match a {
                    Answer::Value(v) => format_number(*v),
                    other => item.answer_label(other),
                };
                answers.insert((k + 1).to_string(), Value::String(text));
            }
        }
        let mut entry = Map::new();
        entry.insert("Question Type".into(), Value::String(q.question_type.clone()));
        entry.insert("Answers".into(), Value::Object(answers));
        root.insert(q.qid.clone(), Value::Object(entry));
    }
    Value::Object(root).to_string()
}
