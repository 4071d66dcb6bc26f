use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataio::{format_number, ItemKind, ItemMeta, ItemSource, ResponseDataset};
use crate::{Error, Result};

/// How much of a participant's record goes into the persona.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonaCondition {
    DemographicsOnly,
    /// Behavioral task answers or free-text memories only.
    TaskOnly,
    DemographicsPlusTask,
    /// Every non-masked item.
    FeatureRich,
}

impl PersonaCondition {
    pub fn sources(self) -> &'static [ItemSource] {
        match self {
            PersonaCondition::DemographicsOnly => &[ItemSource::Demographics],
            PersonaCondition::TaskOnly => &[ItemSource::Task],
            PersonaCondition::DemographicsPlusTask => &[ItemSource::Demographics, ItemSource::Task],
            PersonaCondition::FeatureRich => &[
                ItemSource::Demographics,
                ItemSource::Task,
                ItemSource::Psychological,
                ItemSource::Other,
            ],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "demographics_only" | "demographics" => PersonaCondition::DemographicsOnly,
            "task_only" | "task" => PersonaCondition::TaskOnly,
            "demographics_plus_task" => PersonaCondition::DemographicsPlusTask,
            "feature_rich" => PersonaCondition::FeatureRich,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaBlock {
    pub item_id: String,
    pub question: String,
    pub question_type: String,
    /// Option lines, already numbered ("1 - Yes").
    pub options: Vec<String>,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaProfile {
    pub participant_id: String,
    pub condition: PersonaCondition,
    pub blocks: Vec<PersonaBlock>,
    pub masked_items: Vec<String>,
}

pub(crate) fn question_type(meta: &ItemMeta) -> String {
    if !meta.question_type.is_empty() {
        return meta.question_type.clone();
    }
    match meta.kind {
        ItemKind::Binary | ItemKind::Categorical => "Single Choice",
        ItemKind::Ordinal => "Scale",
        ItemKind::Numeric => "Slider",
        ItemKind::Text => "Text Entry",
    }
    .to_string()
}

pub(crate) fn option_lines(meta: &ItemMeta) -> Vec<String> {
    match meta.kind {
        ItemKind::Binary | ItemKind::Categorical => {
            meta.options.iter().enumerate().map(|(i, o)| format!("{} - {o}", i + 1)).collect()
        }
        ItemKind::Numeric | ItemKind::Ordinal => match meta.range {
            Some((lo, hi)) => vec![format!("a number from {} to {}", format_number(lo), format_number(hi))],
            None => Vec::new(),
        },
        ItemKind::Text => Vec::new(),
    }
}

/// Persona blocks for one participant, in dataset item order. Items the
/// participant did not answer, items outside the condition's sources and
/// masked items are left out.
pub fn build_persona(
    ds: &ResponseDataset,
    participant: &str,
    condition: PersonaCondition,
    mask: &[String],
) -> Result<PersonaProfile> {
    let p = ds
        .participant_index(participant)
        .ok_or_else(|| Error::Argument(format!("unknown participant `{participant}`")))?;
    for m in mask {
        if ds.item_index(m).is_none() {
            return Err(Error::Argument(format!("masked item `{m}` is not in the dataset")));
        }
    }
    let masked: BTreeSet<&str> = mask.iter().map(String::as_str).collect();
    let sources = condition.sources();
    let human = ds.human();
    let blocks = ds
        .items
        .iter()
        .enumerate()
        .filter(|(_, m)| sources.contains(&m.source) && !masked.contains(m.item_id.as_str()))
        .filter_map(|(i, m)| {
            human[p][i].as_ref().map(|a| PersonaBlock {
                item_id: m.item_id.clone(),
                question: if m.text.is_empty() { m.item_id.clone() } else { m.text.clone() },
                question_type: question_type(m),
                options: option_lines(m),
                answer: m.answer_label(a),
            })
        })
        .collect();
    Ok(PersonaProfile {
        participant_id: participant.to_string(),
        condition,
        blocks,
        masked_items: mask.to_vec(),
    })
}

impl PersonaProfile {
    /// Question / Type / Options / Answer runs separated by blank lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, b) in self.blocks.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            out.push_str(&b.question);
            out.push_str("\nQuestion Type: ");
            out.push_str(&b.question_type);
            out.push('\n');
            if !b.options.is_empty() {
                out.push_str("Options:\n");
                for o in &b.options {
                    out.push_str(o);
                    out.push('\n');
                }
            }
            out.push_str("Answer: ");
            out.push_str(&b.answer);
            out.push('\n');
        }
        out
    }
}
