//! Dialogue domain types: utterances, dialogues, detection and rewrite
//! examples, and prediction records.
//!
//! Evidence indices are 1-based over *bot* utterances, not raw turns:
//! evidence index `k` names the turn at `bot_turn_indices(turns)[k - 1]`.

mod jsonl;

use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

pub use jsonl::{
    parse_records, read_records, to_jsonl, validate_corpus, validate_lines, write_records,
    AnyRecord, DataError, LineViolation, ReportedViolation, ValidationReport,
};

/// 1-based indices over prior bot utterances.
pub type EvidenceSet = BTreeSet<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerRole {
    Human,
    Bot,
}

impl SpeakerRole {
    /// Speaker marker used by the rewriter and unstructured encodings.
    pub fn token(self) -> &'static str {
        match self {
            SpeakerRole::Human => "[H]",
            SpeakerRole::Bot => "[B]",
        }
    }
}

impl fmt::Display for SpeakerRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpeakerRole::Human => "human",
            SpeakerRole::Bot => "bot",
        })
    }
}

/// Binary contradiction label, serialized as `0` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Label {
    #[default]
    NonContradiction,
    Contradiction,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Contradiction
    }
}

impl From<bool> for Label {
    fn from(positive: bool) -> Self {
        if positive {
            Label::Contradiction
        } else {
            Label::NonContradiction
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(u8::from(self.is_positive()))
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match u8::deserialize(deserializer)? {
            0 => Ok(Label::NonContradiction),
            1 => Ok(Label::Contradiction),
            other => Err(de::Error::invalid_value(
                de::Unexpected::Unsigned(other.into()),
                &"0 or 1",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: SpeakerRole,
    pub text: String,
    /// Position in the containing sequence; assigned on parse, never serialized.
    #[serde(skip)]
    pub turn_index: usize,
}

impl Utterance {
    pub fn new(speaker: SpeakerRole, text: impl Into<String>) -> Self {
        Utterance {
            speaker,
            text: text.into(),
            turn_index: 0,
        }
    }

    pub fn human(text: impl Into<String>) -> Self {
        Self::new(SpeakerRole::Human, text)
    }

    pub fn bot(text: impl Into<String>) -> Self {
        Self::new(SpeakerRole::Bot, text)
    }

    pub fn is_bot(&self) -> bool {
        self.speaker == SpeakerRole::Bot
    }
}

/// Sets each turn's `turn_index` to its position.
pub fn renumber(turns: &mut [Utterance]) {
    for (i, turn) in turns.iter_mut().enumerate() {
        turn.turn_index = i;
    }
}

/// Positions of the bot turns, in order. Element `k - 1` is bot utterance `k`.
pub fn bot_turn_indices(turns: &[Utterance]) -> Vec<usize> {
    turns
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_bot())
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Utterance>,
}

impl Dialogue {
    pub fn new(id: impl Into<String>, turns: Vec<Utterance>) -> Self {
        let mut d = Dialogue {
            id: id.into(),
            turns,
        };
        renumber(&mut d.turns);
        d
    }

    pub fn bot_turn_indices(&self) -> Vec<usize> {
        bot_turn_indices(&self.turns)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionExample {
    pub id: String,
    pub turns: Vec<Utterance>,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Label>,
    #[serde(rename = "evidence", default, skip_serializing_if = "Option::is_none")]
    pub gold_evidence: Option<EvidenceSet>,
}

impl DetectionExample {
    pub fn new(id: impl Into<String>, turns: Vec<Utterance>) -> Self {
        let mut ex = DetectionExample {
            id: id.into(),
            turns,
            gold_label: None,
            gold_evidence: None,
        };
        renumber(&mut ex.turns);
        ex
    }

    pub fn with_gold(mut self, label: Label, evidence: impl IntoIterator<Item = usize>) -> Self {
        self.gold_label = Some(label);
        self.gold_evidence = Some(evidence.into_iter().collect());
        self
    }

    pub fn bot_turn_indices(&self) -> Vec<usize> {
        bot_turn_indices(&self.turns)
    }

    /// Number of bot turns before the final one.
    pub fn prior_bot_count(&self) -> usize {
        self.bot_turn_indices().len().saturating_sub(1)
    }

    pub fn gold_evidence_or_empty(&self) -> EvidenceSet {
        self.gold_evidence.clone().unwrap_or_default()
    }

    pub fn last_turn(&self) -> Option<&Utterance> {
        self.turns.last()
    }
}

impl From<Dialogue> for DetectionExample {
    fn from(d: Dialogue) -> Self {
        DetectionExample::new(d.id, d.turns)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteFlags {
    #[serde(default)]
    pub is_incomplete: bool,
    #[serde(default)]
    pub has_coreference: bool,
    #[serde(default)]
    pub has_ellipsis: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanEval {
    pub correct: bool,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteExample {
    pub id: String,
    pub context: Vec<Utterance>,
    pub target: Utterance,
    pub references: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<RewriteFlags>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_eval: Option<HumanEval>,
}

impl RewriteExample {
    pub fn new(
        id: impl Into<String>,
        context: Vec<Utterance>,
        target: Utterance,
        references: Vec<String>,
    ) -> Self {
        let mut ex = RewriteExample {
            id: id.into(),
            context,
            target,
            references,
            hypothesis: None,
            flags: None,
            human_eval: None,
        };
        ex.renumber();
        ex
    }

    fn renumber(&mut self) {
        renumber(&mut self.context);
        self.target.turn_index = self.context.len();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub score: f64,
    pub label: Label,
    pub evidence: EvidenceSet,
    #[serde(default)]
    pub pair_scores: Vec<f64>,
}

/// A single invariant violation inside one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Which newline-delimited schema a stream holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Dialogue,
    Detection,
    Rewrite,
    Prediction,
}

impl std::str::FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dialogue" => Ok(RecordKind::Dialogue),
            "detection" => Ok(RecordKind::Detection),
            "rewrite" => Ok(RecordKind::Rewrite),
            "prediction" => Ok(RecordKind::Prediction),
            other => Err(format!(
                "unknown record kind {other:?} (expected dialogue, detection, rewrite or prediction)"
            )),
        }
    }
}

/// A newline-delimited record type with invariants checked on parse.
pub trait Record: Serialize + de::DeserializeOwned {
    const KIND: RecordKind;

    fn id(&self) -> &str;

    /// Restores fields that are positional rather than serialized.
    fn reindex(&mut self) {}

    fn violations(&self) -> Vec<Violation>;
}

fn check_turns(turns: &[Utterance], path: &str, out: &mut Vec<Violation>) {
    for (i, t) in turns.iter().enumerate() {
        if t.text.trim().is_empty() {
            out.push(Violation::new(
                format!("{path}[{i}].text"),
                "utterance text is empty",
            ));
        }
        if t.turn_index != i {
            out.push(Violation::new(
                format!("{path}[{i}]"),
                format!("turn_index {} does not match position {i}", t.turn_index),
            ));
        }
    }
}

fn check_id(id: &str, out: &mut Vec<Violation>) {
    if id.is_empty() {
        out.push(Violation::new("id", "id is empty"));
    }
}

impl Record for Dialogue {
    const KIND: RecordKind = RecordKind::Dialogue;

    fn id(&self) -> &str {
        &self.id
    }

    fn reindex(&mut self) {
        renumber(&mut self.turns);
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_id(&self.id, &mut out);
        if self.turns.is_empty() {
            out.push(Violation::new("turns", "dialogue has no turns"));
        }
        check_turns(&self.turns, "turns", &mut out);
        out
    }
}

impl Record for DetectionExample {
    const KIND: RecordKind = RecordKind::Detection;

    fn id(&self) -> &str {
        &self.id
    }

    fn reindex(&mut self) {
        renumber(&mut self.turns);
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_id(&self.id, &mut out);
        check_turns(&self.turns, "turns", &mut out);
        match self.turns.last() {
            None => out.push(Violation::new("turns", "detection example has no turns")),
            Some(last) if !last.is_bot() => out.push(Violation::new(
                format!("turns[{}].speaker", self.turns.len() - 1),
                "detection example must end with a bot turn",
            )),
            Some(_) => {}
        }
        if let Some(evidence) = &self.gold_evidence {
            let prior = self.prior_bot_count();
            for &k in evidence {
                if k == 0 || k > prior {
                    out.push(Violation::new(
                        "evidence",
                        format!(
                            "evidence index {k} outside 1..={prior} (prior bot turns: {prior})"
                        ),
                    ));
                }
            }
            if let Some(label) = self.gold_label {
                if label.is_positive() == evidence.is_empty() {
                    out.push(Violation::new(
                        "evidence",
                        if label.is_positive() {
                            "label 1 requires non-empty evidence"
                        } else {
                            "label 0 requires empty evidence"
                        },
                    ));
                }
            }
        }
        out
    }
}

impl Record for RewriteExample {
    const KIND: RecordKind = RecordKind::Rewrite;

    fn id(&self) -> &str {
        &self.id
    }

    fn reindex(&mut self) {
        self.renumber();
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_id(&self.id, &mut out);
        check_turns(&self.context, "context", &mut out);
        if self.target.text.trim().is_empty() {
            out.push(Violation::new("target.text", "utterance text is empty"));
        }
        if self.target.turn_index != self.context.len() {
            out.push(Violation::new(
                "target",
                "target turn_index must follow the context",
            ));
        }
        if self.references.is_empty() || self.references.len() > 2 {
            out.push(Violation::new(
                "references",
                format!(
                    "expected 1 or 2 references, found {}",
                    self.references.len()
                ),
            ));
        }
        out
    }
}

impl Record for PredictionRecord {
    const KIND: RecordKind = RecordKind::Prediction;

    fn id(&self) -> &str {
        &self.id
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_id(&self.id, &mut out);
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.score) {
            out.push(Violation::new(
                "score",
                format!("{} outside [0, 1]", self.score),
            ));
        }
        for (i, &s) in self.pair_scores.iter().enumerate() {
            if !in_unit(s) {
                out.push(Violation::new(
                    format!("pair_scores[{i}]"),
                    format!("{s} outside [0, 1]"),
                ));
            }
        }
        if !self.pair_scores.is_empty() {
            let max = self
                .pair_scores
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            if max != self.score {
                out.push(Violation::new(
                    "score",
                    format!("score {} differs from max(pair_scores) {max}", self.score),
                ));
            }
            for &k in &self.evidence {
                if k == 0 || k > self.pair_scores.len() {
                    out.push(Violation::new(
                        "evidence",
                        format!("evidence index {k} has no pair score"),
                    ));
                }
            }
        }
        out
    }
}
