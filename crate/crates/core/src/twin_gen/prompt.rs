use serde::{Deserialize, Serialize};

use super::persona::{option_lines, question_type, PersonaProfile};
use crate::dataio::{format_number, ItemKind, ItemMeta};
use crate::{Error, Result};

const T1_SYSTEM: &str = include_str!("../../templates/t1_system.txt");
const T2_SYSTEM: &str = include_str!("../../templates/t2_system.txt");
const T3A_SYSTEM: &str = include_str!("../../templates/t3a_system.txt");
const T3B_SYSTEM: &str = include_str!("../../templates/t3b_system.txt");
const USER: &str = include_str!("../../templates/user.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateId {
    /// Closed-form survey items.
    T1,
    /// T1 with a fixed response date in the system text.
    T2,
    /// Free-text narrative, English, with a word cap.
    T3a,
    /// Free-text narrative, Chinese system text, with a word cap.
    T3b,
}

impl TemplateId {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "t1" => TemplateId::T1,
            "t2" => TemplateId::T2,
            "t3a" => TemplateId::T3a,
            "t3b" => TemplateId::T3b,
            _ => return None,
        })
    }

    fn is_free_text(self) -> bool {
        matches!(self, TemplateId::T3a | TemplateId::T3b)
    }
}

/// One numbered question of the answer schema; matrix questions carry
/// several items answered under keys "1", "2", ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaQuestion {
    pub qid: String,
    pub question_type: String,
    pub stem: String,
    pub items: Vec<ItemMeta>,
}

/// Groups consecutive items that share a `group` into one question.
pub fn build_schema(questions: &[&ItemMeta]) -> Vec<SchemaQuestion> {
    let mut out: Vec<SchemaQuestion> = Vec::new();
    for q in questions {
        if let (Some(g), Some(last)) = (&q.group, out.last_mut()) {
            if last.items.last().and_then(|i| i.group.as_ref()) == Some(g) {
                last.items.push((*q).clone());
                continue;
            }
        }
        let stem = match &q.group {
            Some(g) => g.clone(),
            None if q.text.is_empty() => q.item_id.clone(),
            None => q.text.clone(),
        };
        out.push(SchemaQuestion {
            qid: format!("Q{}", out.len() + 1),
            question_type: question_type(q),
            stem,
            items: vec![(*q).clone()],
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub participant_id: String,
    pub template_id: TemplateId,
    pub system: String,
    pub user: String,
    pub expected_schema: Vec<SchemaQuestion>,
    pub temporal_context: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Date text for T2 (required) and T3 (optional).
    pub temporal_context: Option<String>,
    /// Word cap for T3 answers.
    pub word_cap: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            temporal_context: None,
            word_cap: 60,
        }
    }
}

/// Single-pass `{key}` substitution, so substituted text is never rescanned.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        match vars.iter().find(|(k, _)| tail[1..].starts_with(k) && tail[1 + k.len()..].starts_with('}')) {
            Some((k, v)) => {
                out.push_str(v);
                rest = &tail[k.len() + 2..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn render_question(q: &SchemaQuestion) -> String {
    let mut out = format!("{}: {}\nQuestion Type: {}\n", q.qid, q.stem, q.question_type);
    let opts = option_lines(&q.items[0]);
    if !opts.is_empty() {
        out.push_str("Options:\n");
        for o in opts {
            out.push_str(&o);
            out.push('\n');
        }
    }
    for (k, item) in q.items.iter().enumerate() {
        if q.items.len() > 1 {
            out.push_str(&format!("{}. {}\n", k + 1, item.text));
        } else {
            out.push_str(&format!("{}. (single answer)\n", k + 1));
        }
        out.push_str("Answer: [Masked]\n");
    }
    out
}

fn answer_hint(q: &SchemaQuestion) -> String {
    let keys = if q.items.len() == 1 {
        "key \"1\"".to_string()
    } else {
        format!("keys \"1\" to \"{}\"", q.items.len())
    };
    let item = &q.items[0];
    let what = match item.kind {
        ItemKind::Binary | ItemKind::Categorical => format!("an option number from 1 to {}", item.options.len()),
        ItemKind::Numeric | ItemKind::Ordinal => {
            let (lo, hi) = item.range.unwrap_or((f64::NAN, f64::NAN));
            format!("a number from {} to {}", format_number(lo), format_number(hi))
        }
        ItemKind::Text => "your written answer".to_string(),
    };
    format!(
        "{}: \"Question Type\" is \"{}\"; \"Answers\" maps {keys} to {what}.",
        q.qid, q.question_type
    )
}

/// Render system and user text. Output depends only on the inputs.
pub fn render_prompt(
    persona: &PersonaProfile,
    questions: &[&ItemMeta],
    template: TemplateId,
    opts: &RenderOptions,
) -> Result<PromptBundle> {
    if questions.is_empty() {
        return Err(Error::Argument("no questions to ask".into()));
    }
    for q in questions {
        if persona.blocks.iter().any(|b| b.item_id == q.item_id) {
            return Err(Error::Argument(format!("item `{}` is both asked and shown in the persona", q.item_id)));
        }
        if template.is_free_text() != (q.kind == ItemKind::Text) {
            return Err(Error::Argument(format!(
                "item `{}` does not fit template {template:?}: T3 takes free-text items only, T1/T2 closed items only",
                q.item_id
            )));
        }
    }
    let date = opts.temporal_context.as_deref();
    let system = match (template, date) {
        (TemplateId::T1, None) => T1_SYSTEM.to_string(),
        (TemplateId::T1, Some(_)) => {
            return Err(Error::Argument("T1 takes no temporal context; use T2".into()));
        }
        (TemplateId::T2, Some(d)) => fill(T2_SYSTEM, &[("date", d)]),
        (TemplateId::T2, None) => return Err(Error::Argument("T2 needs a temporal context".into())),
        (TemplateId::T3a, d) => fill(
            T3A_SYSTEM,
            &[
                ("date_clause", &d.map(|d| format!(", as of {d}")).unwrap_or_default()),
                ("cap", &opts.word_cap.to_string()),
            ],
        ),
        (TemplateId::T3b, d) => fill(
            T3B_SYSTEM,
            &[
                ("date_clause", &d.map(|d| format!("（时间为{d}）")).unwrap_or_default()),
                ("cap", &opts.word_cap.to_string()),
            ],
        ),
    };
    if template.is_free_text() && opts.word_cap == 0 {
        return Err(Error::Argument("word cap must be positive".into()));
    }
    let schema = build_schema(questions);
    let rendered: Vec<String> = schema.iter().map(render_question).collect();
    let hints: Vec<String> = schema.iter().map(answer_hint).collect();
    let persona_text = persona.render();
    let questions_text = rendered.join("\n");
    let user = fill(
        USER,
        &[
            ("persona", persona_text.trim_end()),
            ("questions", questions_text.trim_end()),
            ("hints", &hints.join("\n")),
        ],
    );
    Ok(PromptBundle {
        participant_id: persona.participant_id.clone(),
        template_id: template,
        system,
        user,
        expected_schema: schema,
        temporal_context: opts.temporal_context.clone(),
    })
}
