use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Binary,
    Categorical,
    Numeric,
    Ordinal,
    /// Free-text answer; only used as persona context, never scored.
    Text,
}

impl ItemKind {
    pub fn is_discrete(self) -> bool {
        matches!(self, ItemKind::Binary | ItemKind::Categorical)
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, ItemKind::Numeric | ItemKind::Ordinal)
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "binary" => ItemKind::Binary,
            "categorical" => ItemKind::Categorical,
            "numeric" => ItemKind::Numeric,
            "ordinal" => ItemKind::Ordinal,
            "text" => ItemKind::Text,
            _ => return None,
        })
    }

    fn as_str(self) -> &'static str {
        match self {
            ItemKind::Binary => "binary",
            ItemKind::Categorical => "categorical",
            ItemKind::Numeric => "numeric",
            ItemKind::Ordinal => "ordinal",
            ItemKind::Text => "text",
        }
    }
}

/// Which persona block an item feeds when it is used as context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemSource {
    Demographics,
    Task,
    Psychological,
    Other,
}

impl ItemSource {
    fn parse(s: &str) -> Option<Self> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "" | "other" => ItemSource::Other,
            "demographics" | "demographic" => ItemSource::Demographics,
            "task" | "behavioral" | "behavior" => ItemSource::Task,
            "psychological" | "psych" => ItemSource::Psychological,
            _ => return None,
        })
    }

    fn as_str(self) -> &'static str {
        match self {
            ItemSource::Demographics => "demographics",
            ItemSource::Task => "task",
            ItemSource::Psychological => "psychological",
            ItemSource::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub item_id: String,
    pub kind: ItemKind,
    /// Feasible `[min, max]` for numeric and ordinal items.
    pub range: Option<(f64, f64)>,
    /// Ordered option labels for binary and categorical items.
    pub options: Vec<String>,
    pub task_id: String,
    pub source: ItemSource,
    /// Question wording shown in prompts.
    pub text: String,
    /// Display type used in prompts ("Single Choice", "Slider", "Matrix" ...).
    pub question_type: String,
    /// Items sharing a group were sub-statements of one matrix question.
    pub group: Option<String>,
}

impl ItemMeta {
    fn bare(item_id: &str, task_id: &str, kind: ItemKind) -> Self {
        Self {
            item_id: item_id.to_string(),
            kind,
            range: None,
            options: Vec::new(),
            task_id: task_id.to_string(),
            source: ItemSource::Task,
            text: String::new(),
            question_type: String::new(),
            group: None,
        }
    }

    /// Numeric or ordinal item over `[lo, hi]`.
    pub fn scalar(item_id: &str, task_id: &str, kind: ItemKind, lo: f64, hi: f64) -> Self {
        Self {
            range: Some((lo, hi)),
            ..Self::bare(item_id, task_id, kind)
        }
    }

    /// Binary or categorical item with the given option labels.
    pub fn choice(item_id: &str, task_id: &str, kind: ItemKind, options: &[&str]) -> Self {
        Self {
            options: options.iter().map(|o| o.to_string()).collect(),
            ..Self::bare(item_id, task_id, kind)
        }
    }

    pub fn free_text(item_id: &str, task_id: &str) -> Self {
        Self::bare(item_id, task_id, ItemKind::Text)
    }

    pub fn with_source(mut self, source: ItemSource) -> Self {
        self.source = source;
        self
    }

    pub fn with_text(mut self, text: &str, question_type: &str) -> Self {
        self.text = text.to_string();
        self.question_type = question_type.to_string();
        self
    }

    pub fn width(&self) -> Option<f64> {
        self.range.map(|(lo, hi)| hi - lo)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.item_id.is_empty() {
            return Err("empty item_id".into());
        }
        if self.task_id.is_empty() {
            return Err(format!("item {}: empty task_id", self.item_id));
        }
        match self.kind {
            ItemKind::Numeric | ItemKind::Ordinal => match self.range {
                Some((lo, hi)) if lo.is_finite() && hi.is_finite() && hi > lo => Ok(()),
                Some((lo, hi)) => Err(format!("item {}: range [{lo}, {hi}] needs max > min", self.item_id)),
                None => Err(format!("item {}: numeric/ordinal item needs min and max", self.item_id)),
            },
            ItemKind::Binary if self.options.len() != 2 => Err(format!(
                "item {}: binary item needs exactly 2 options, got {}",
                self.item_id,
                self.options.len()
            )),
            ItemKind::Categorical if self.options.len() < 2 => Err(format!(
                "item {}: categorical item needs at least 2 options",
                self.item_id
            )),
            _ => Ok(()),
        }
    }

    /// Parse one CSV cell into an answer valid for this item.
    pub fn parse_answer(&self, raw: &str) -> std::result::Result<Option<Answer>, String> {
        let cell = raw.trim();
        if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("null") {
            return Ok(None);
        }
        let answer = match self.kind {
            ItemKind::Text => Answer::Text(cell.to_string()),
            ItemKind::Numeric | ItemKind::Ordinal => {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| format!("item {}: `{cell}` is not a number", self.item_id))?;
                Answer::Value(v)
            }
            ItemKind::Binary | ItemKind::Categorical => {
                if let Ok(k) = cell.parse::<usize>() {
                    if k == 0 {
                        return Err(format!("item {}: option indices are 1-based", self.item_id));
                    }
                    Answer::Choice(k - 1)
                } else {
                    let pos = self
                        .options
                        .iter()
                        .position(|o| o.eq_ignore_ascii_case(cell))
                        .ok_or_else(|| format!("item {}: `{cell}` is not one of its options", self.item_id))?;
                    Answer::Choice(pos)
                }
            }
        };
        self.check_answer(&answer)?;
        Ok(Some(answer))
    }

    pub fn check_answer(&self, answer: &Answer) -> std::result::Result<(), String> {
        match (self.kind, answer) {
            (ItemKind::Text, Answer::Text(_)) => Ok(()),
            (k, Answer::Value(v)) if k.is_scalar() => {
                let (lo, hi) = self.range.expect("validated item");
                if v.is_finite() && *v >= lo && *v <= hi {
                    Ok(())
                } else {
                    Err(format!("item {}: value {v} outside [{lo}, {hi}]", self.item_id))
                }
            }
            (k, Answer::Choice(i)) if k.is_discrete() => {
                if *i < self.options.len() {
                    Ok(())
                } else {
                    Err(format!(
                        "item {}: option {} outside 1..={}",
                        self.item_id,
                        i + 1,
                        self.options.len()
                    ))
                }
            }
            _ => Err(format!("item {}: answer type does not match kind {}", self.item_id, self.kind.as_str())),
        }
    }

    /// Answer mapped onto [0, 1] by its feasible range (option index over
    /// the number of options minus one for discrete items).
    pub fn normalized(&self, answer: &Answer) -> Option<f64> {
        match answer {
            Answer::Value(v) => self.range.map(|(lo, hi)| (v - lo) / (hi - lo)),
            Answer::Choice(i) if self.options.len() > 1 => Some(*i as f64 / (self.options.len() - 1) as f64),
            _ => None,
        }
    }

    /// Label used when an answer is rendered back to text.
    pub fn answer_label(&self, answer: &Answer) -> String {
        match answer {
            Answer::Choice(i) => match self.options.get(*i) {
                Some(label) => format!("{} - {}", i + 1, label),
                None => (i + 1).to_string(),
            },
            Answer::Value(v) => format_number(*v),
            Answer::Text(t) => t.clone(),
        }
    }
}

pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    /// 0-based option index.
    Choice(usize),
    Value(f64),
    Text(String),
}

impl Answer {
    /// Numeric view used by correlations and regressions.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Answer::Choice(i) => Some(*i as f64),
            Answer::Value(v) => Some(*v),
            Answer::Text(_) => None,
        }
    }

    /// Cell text as written to and read from response files.
    pub fn to_cell(&self) -> String {
        match self {
            Answer::Choice(i) => (i + 1).to_string(),
            Answer::Value(v) => format_number(*v),
            Answer::Text(t) => t.clone(),
        }
    }
}

/// Column names of a long-format response file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSchema {
    pub participant_column: String,
    pub item_column: String,
    pub human_channel: String,
    pub twin_channels: Vec<String>,
}

impl Default for ResponseSchema {
    fn default() -> Self {
        Self {
            participant_column: "participant_id".into(),
            item_column: "item_id".into(),
            human_channel: "human".into(),
            twin_channels: Vec::new(),
        }
    }
}

impl ResponseSchema {
    pub fn channels(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.human_channel).chain(self.twin_channels.iter())
    }
}

/// Participants x items answers for each channel (`human`, twins ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseDataset {
    pub items: Vec<ItemMeta>,
    pub participants: Vec<String>,
    /// channel -> [participant][item]
    pub channels: BTreeMap<String, Vec<Vec<Option<Answer>>>>,
    pub human_channel: String,
}

impl ResponseDataset {
    /// Build from parts, checking shapes and every answer against its item.
    pub fn new(
        items: Vec<ItemMeta>,
        participants: Vec<String>,
        channels: BTreeMap<String, Vec<Vec<Option<Answer>>>>,
        human_channel: &str,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        let mut seen = HashSet::new();
        for it in &items {
            if let Err(e) = it.validate() {
                problems.push(e);
            }
            if !seen.insert(it.item_id.as_str()) {
                problems.push(format!("duplicate item_id {}", it.item_id));
            }
        }
        if !channels.contains_key(human_channel) {
            problems.push(format!("missing human channel `{human_channel}`"));
        }
        for (name, grid) in &channels {
            if grid.len() != participants.len() || grid.iter().any(|r| r.len() != items.len()) {
                problems.push(format!("channel {name}: grid shape does not match participants x items"));
                continue;
            }
            for (p, row) in grid.iter().enumerate() {
                for (cell, item) in row.iter().zip(&items) {
                    if let Some(a) = cell {
                        if let Err(e) = item.check_answer(a) {
                            problems.push(format!("channel {name}, participant {}: {e}", participants[p]));
                        }
                    }
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Self {
            items,
            participants,
            channels,
            human_channel: human_channel.to_string(),
        })
    }

    pub fn item_index(&self, item_id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.item_id == item_id)
    }

    pub fn participant_index(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p == id)
    }

    pub fn channel(&self, name: &str) -> Result<&Vec<Vec<Option<Answer>>>> {
        self.channels
            .get(name)
            .ok_or_else(|| Error::Argument(format!("unknown channel `{name}`")))
    }

    pub fn human(&self) -> &Vec<Vec<Option<Answer>>> {
        &self.channels[&self.human_channel]
    }

    pub fn twin_channels(&self) -> impl Iterator<Item = &String> {
        self.channels.keys().filter(move |c| **c != self.human_channel)
    }

    /// Complete (participant, human, twin) triples for one item.
    pub fn item_pairs<'a>(&'a self, twin: &str, item: usize) -> Result<Vec<(usize, &'a Answer, &'a Answer)>> {
        let human = self.human();
        let twin = self.channel(twin)?;
        Ok((0..self.participants.len())
            .filter_map(|p| match (&human[p][item], &twin[p][item]) {
                (Some(h), Some(t)) => Some((p, h, t)),
                _ => None,
            })
            .collect())
    }

    /// Task ids in first-appearance order.
    pub fn tasks(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for it in &self.items {
            if !out.contains(&it.task_id) {
                out.push(it.task_id.clone());
            }
        }
        out
    }

    pub fn task_items(&self, task: &str) -> Vec<usize> {
        (0..self.items.len()).filter(|&i| self.items[i].task_id == task).collect()
    }

    /// Numeric matrix (participants x selected items) for one channel;
    /// missing answers become NaN.
    pub fn numeric_matrix(&self, channel: &str, items: &[usize]) -> Result<Vec<Vec<f64>>> {
        let grid = self.channel(channel)?;
        Ok(grid
            .iter()
            .map(|row| {
                items
                    .iter()
                    .map(|&i| row[i].as_ref().and_then(Answer::as_f64).unwrap_or(f64::NAN))
                    .collect()
            })
            .collect())
    }
}

fn read_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(false).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::parse(path.display(), line, e.to_string())
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

/// Item metadata CSV: `item_id, task_id, kind` plus optional `min, max,
/// options` (`|`-separated), `source, question_type, text, group`.
pub fn load_items(path: &Path) -> Result<Vec<ItemMeta>> {
    let mut rdr = read_csv(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| header_index(&headers, name);
    let (id_col, kind_col, task_col) = match (col("item_id"), col("kind"), col("task_id")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::parse(path.display(), 1, "item file needs item_id, kind and task_id columns")),
    };
    let get = |rec: &csv::StringRecord, c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("").trim().to_string();
    let mut items = Vec::new();
    let mut problems = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let item_id = get(&rec, Some(id_col));
        let kind = match ItemKind::parse(&get(&rec, Some(kind_col))) {
            Some(k) => k,
            None => {
                problems.push(format!("line {line}: item {item_id}: unknown kind `{}`", get(&rec, Some(kind_col))));
                continue;
            }
        };
        let num = |c: Option<usize>| -> std::result::Result<Option<f64>, String> {
            let s = get(&rec, c);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| format!("line {line}: item {item_id}: bad number `{s}`"))
            }
        };
        let range = match (num(col("min")), num(col("max"))) {
            (Ok(Some(lo)), Ok(Some(hi))) => Some((lo, hi)),
            (Err(e), _) | (_, Err(e)) => {
                problems.push(e);
                continue;
            }
            _ => None,
        };
        let options_raw = get(&rec, col("options"));
        let options: Vec<String> = if options_raw.is_empty() {
            Vec::new()
        } else {
            options_raw.split('|').map(|s| s.trim().to_string()).collect()
        };
        let source = match ItemSource::parse(&get(&rec, col("source"))) {
            Some(s) => s,
            None => {
                problems.push(format!("line {line}: item {item_id}: unknown source"));
                continue;
            }
        };
        let question_type = {
            let q = get(&rec, col("question_type"));
            if q.is_empty() {
                default_question_type(kind).to_string()
            } else {
                q
            }
        };
        let group = Some(get(&rec, col("group"))).filter(|g| !g.is_empty());
        let meta = ItemMeta {
            item_id,
            kind,
            range: if kind.is_scalar() { range } else { None },
            options,
            task_id: get(&rec, Some(task_col)),
            source,
            text: get(&rec, col("text")),
            question_type,
            group,
        };
        if let Err(e) = meta.validate() {
            problems.push(format!("line {line}: {e}"));
        }
        items.push(meta);
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(items)
}

fn default_question_type(kind: ItemKind) -> &'static str {
    match kind {
        ItemKind::Binary | ItemKind::Categorical => "Single Choice",
        ItemKind::Numeric => "Slider",
        ItemKind::Ordinal => "Single Choice",
        ItemKind::Text => "Text Entry",
    }
}

/// Load a long-format response file (one row per participant x item, one
/// column per channel) against already-loaded item metadata.
///
/// Every row is checked; all violations are reported together, each with
/// its line number and item id.
pub fn load_response_dataset(path: &Path, items: Vec<ItemMeta>, schema: &ResponseSchema) -> Result<ResponseDataset> {
    let mut rdr = read_csv(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let need = |name: &str| {
        header_index(&headers, name)
            .ok_or_else(|| Error::parse(path.display(), 1, format!("missing column `{name}`")))
    };
    let p_col = need(&schema.participant_column)?;
    let i_col = need(&schema.item_column)?;
    let channel_cols: Vec<(String, usize)> = schema
        .channels()
        .map(|c| need(c).map(|i| (c.clone(), i)))
        .collect::<Result<_>>()?;

    let item_pos: HashMap<&str, usize> = items.iter().enumerate().map(|(i, it)| (it.item_id.as_str(), i)).collect();
    let mut participants: Vec<String> = Vec::new();
    let mut p_pos: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<(usize, usize, Vec<Option<Answer>>)> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut problems = Vec::new();

    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let pid = rec.get(p_col).unwrap_or("").trim().to_string();
        let iid = rec.get(i_col).unwrap_or("").trim();
        let Some(&ii) = item_pos.get(iid) else {
            problems.push(format!("line {line}: unknown item_id `{iid}`"));
            continue;
        };
        let pi = *p_pos.entry(pid.clone()).or_insert_with(|| {
            participants.push(pid.clone());
            participants.len() - 1
        });
        if !seen.insert((pi, ii)) {
            problems.push(format!("line {line}: duplicate row for participant {pid}, item {iid}"));
            continue;
        }
        let mut answers = Vec::with_capacity(channel_cols.len());
        for (name, c) in &channel_cols {
            match items[ii].parse_answer(rec.get(*c).unwrap_or("")) {
                Ok(a) => answers.push(a),
                Err(e) => {
                    problems.push(format!("line {line}: channel {name}: {e}"));
                    answers.push(None);
                }
            }
        }
        cells.push((pi, ii, answers));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let mut channels: BTreeMap<String, Vec<Vec<Option<Answer>>>> = BTreeMap::new();
    for (name, _) in &channel_cols {
        channels.insert(name.clone(), vec![vec![None; items.len()]; participants.len()]);
    }
    for (pi, ii, answers) in cells {
        for ((name, _), a) in channel_cols.iter().zip(answers) {
            channels.get_mut(name).expect("channel")[pi][ii] = a;
        }
    }
    ResponseDataset::new(items, participants, channels, &schema.human_channel)
}

/// Inverse of [`load_items`].
pub fn write_items(items: &[ItemMeta]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item_id", "task_id", "kind", "min", "max", "options", "source", "question_type", "text", "group"])
        .expect("in-memory write");
    for it in items {
        let (lo, hi) = it
            .range
            .map(|(a, b)| (format_number(a), format_number(b)))
            .unwrap_or_default();
        w.write_record([
            it.item_id.as_str(),
            it.task_id.as_str(),
            it.kind.as_str(),
            lo.as_str(),
            hi.as_str(),
            it.options.join("|").as_str(),
            it.source.as_str(),
            it.question_type.as_str(),
            it.text.as_str(),
            it.group.as_deref().unwrap_or(""),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Inverse of [`load_response_dataset`]: human channel first, then twins in
/// name order; rows where every channel is missing are omitted.
pub fn write_responses(ds: &ResponseDataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut names: Vec<&String> = vec![&ds.human_channel];
    names.extend(ds.twin_channels());
    let mut header = vec!["participant_id".to_string(), "item_id".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    w.write_record(&header).expect("in-memory write");
    for (p, pid) in ds.participants.iter().enumerate() {
        for (i, it) in ds.items.iter().enumerate() {
            let cells: Vec<String> = names
                .iter()
                .map(|n| ds.channels[*n][p][i].as_ref().map(Answer::to_cell).unwrap_or_default())
                .collect();
            if cells.iter().all(String::is_empty) {
                continue;
            }
            let mut rec = vec![pid.clone(), it.item_id.clone()];
            rec.extend(cells);
            w.write_record(&rec).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
