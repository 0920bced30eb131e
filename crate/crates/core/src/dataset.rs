//! Test-set construction: overlap merging, prefix cutting, balanced
//! sampling, and two-round vote adjudication.
//!
//! # Sampling generator
//!
//! [`balanced_sample`] shuffles negative positions with Fisher–Yates driven
//! by a 64-bit LCG, so a seed reproduces the same selection anywhere:
//!
//! ```text
//! state <- seed
//! next():  state <- state * 6364136223846793005 + 1442695040888963407  (mod 2^64)
//!          return state
//! draw(m): ((next() >> 32) * m) >> 32            -- uniform-ish in [0, m)
//! for i = n-1 down to 1: swap(pos[i], pos[draw(i + 1)])
//! ```
//!
//! The first `#positives` shuffled positions are kept and re-sorted into
//! input order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{bot_turn_indices, DetectionExample, Dialogue, EvidenceSet, Label, Record};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("{negatives} negatives cannot balance {positives} positives")]
    NotEnoughNegatives { positives: usize, negatives: usize },
    #[error("{id}: example has no gold label")]
    Unlabeled { id: String },
    #[error("{id}: round {round} needs exactly {expected} vote(s), found {found}")]
    WrongVoteCount {
        id: String,
        round: Round,
        expected: usize,
        found: usize,
    },
    #[error("{id}: vote by {annotator}: {message}")]
    InvalidVote {
        id: String,
        annotator: String,
        message: String,
    },
    #[error("{id}: finalized annotation is invalid for the example: {message}")]
    InconsistentAnnotation { id: String, message: String },
}

/// Drops one-exchange dialogues (two turns or fewer) and every dialogue
/// whose turn sequence is a prefix of another's. Of identical dialogues the
/// first is kept. Survivors keep their input order and ids.
pub fn merge_overlapping(dialogues: &[Dialogue]) -> Vec<Dialogue> {
    let candidates: Vec<&Dialogue> = dialogues.iter().filter(|d| d.turns.len() > 2).collect();
    let same_turn = |a: &crate::dialog::Utterance, b: &crate::dialog::Utterance| {
        a.speaker == b.speaker && a.text == b.text
    };
    let is_prefix = |a: &Dialogue, b: &Dialogue| {
        a.turns.len() <= b.turns.len() && a.turns.iter().zip(&b.turns).all(|(x, y)| same_turn(x, y))
    };
    candidates
        .iter()
        .enumerate()
        .filter(|&(i, a)| {
            !candidates
                .iter()
                .enumerate()
                .any(|(j, b)| i != j && is_prefix(a, b) && (a.turns.len() < b.turns.len() || j < i))
        })
        .map(|(_, d)| (*d).clone())
        .collect()
}

/// One detection example per bot turn, ending at that turn. The k-th cut
/// gets id `"{dialogue id}#{k}"`.
pub fn prefix_cut(dialogue: &Dialogue) -> Vec<DetectionExample> {
    bot_turn_indices(&dialogue.turns)
        .into_iter()
        .enumerate()
        .map(|(k, end)| {
            DetectionExample::new(
                format!("{}#{}", dialogue.id, k + 1),
                dialogue.turns[..=end].to_vec(),
            )
        })
        .collect()
}

pub fn prefix_cut_corpus(dialogues: &[Dialogue]) -> Vec<DetectionExample> {
    dialogues.iter().flat_map(prefix_cut).collect()
}

/// The documented 64-bit LCG.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub fn new(seed: u64) -> Self {
        Lcg64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        self.state
    }

    /// Draw in `[0, bound)`; `bound` must fit in 32 bits.
    pub fn below(&mut self, bound: usize) -> usize {
        (((self.next_u64() >> 32) * bound as u64) >> 32) as usize
    }
}

/// Keeps all positives and a seeded sample of as many negatives; output is
/// positives then sampled negatives, each in input order.
pub fn balanced_sample(
    examples: &[DetectionExample],
    seed: u64,
) -> Result<Vec<DetectionExample>, DatasetError> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for ex in examples {
        match ex.gold_label {
            Some(Label::Contradiction) => positives.push(ex),
            Some(Label::NonContradiction) => negatives.push(ex),
            None => return Err(DatasetError::Unlabeled { id: ex.id.clone() }),
        }
    }
    if negatives.len() < positives.len() {
        return Err(DatasetError::NotEnoughNegatives {
            positives: positives.len(),
            negatives: negatives.len(),
        });
    }
    let mut order: Vec<usize> = (0..negatives.len()).collect();
    let mut rng = Lcg64::new(seed);
    for i in (1..order.len()).rev() {
        let j = rng.below(i + 1);
        order.swap(i, j);
    }
    let mut kept = order[..positives.len()].to_vec();
    kept.sort_unstable();
    Ok(positives
        .into_iter()
        .chain(kept.into_iter().map(|i| negatives[i]))
        .cloned()
        .collect())
}

/// One annotator's judgement of a detection example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationVote {
    pub annotator_id: String,
    pub label: Label,
    #[serde(default)]
    pub evidence: EvidenceSet,
}

impl AnnotationVote {
    pub fn new(
        annotator_id: impl Into<String>,
        label: Label,
        evidence: impl IntoIterator<Item = usize>,
    ) -> Self {
        AnnotationVote {
            annotator_id: annotator_id.into(),
            label,
            evidence: evidence.into_iter().collect(),
        }
    }

    fn agrees_with(&self, other: &AnnotationVote) -> bool {
        self.label == other.label && self.evidence == other.evidence
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdjudicationState {
    Finalized { label: Label, evidence: EvidenceSet },
    EscalatedRound2,
    NeedsAdjudication,
}

impl fmt::Display for AdjudicationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdjudicationState::Finalized { .. } => f.write_str("finalized"),
            AdjudicationState::EscalatedRound2 => f.write_str("escalated_round2"),
            AdjudicationState::NeedsAdjudication => f.write_str("needs_adjudication"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RoundRepr", into = "RoundRepr")]
pub enum Round {
    First,
    Second,
    Adjudicator,
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Round::First => "1",
            Round::Second => "2",
            Round::Adjudicator => "adjudicator",
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RoundRepr {
    Number(u8),
    Name(String),
}

impl TryFrom<RoundRepr> for Round {
    type Error = String;

    fn try_from(r: RoundRepr) -> Result<Self, String> {
        match r {
            RoundRepr::Number(1) => Ok(Round::First),
            RoundRepr::Number(2) => Ok(Round::Second),
            RoundRepr::Name(s) if s == "adjudicator" => Ok(Round::Adjudicator),
            RoundRepr::Number(n) => Err(format!("unknown round {n}")),
            RoundRepr::Name(s) => Err(format!("unknown round {s:?}")),
        }
    }
}

impl From<Round> for RoundRepr {
    fn from(r: Round) -> Self {
        match r {
            Round::First => RoundRepr::Number(1),
            Round::Second => RoundRepr::Number(2),
            Round::Adjudicator => RoundRepr::Name("adjudicator".into()),
        }
    }
}

fn check_votes(
    id: &str,
    round: Round,
    votes: &[AnnotationVote],
    expected: usize,
) -> Result<(), DatasetError> {
    if votes.len() != expected {
        return Err(DatasetError::WrongVoteCount {
            id: id.to_owned(),
            round,
            expected,
            found: votes.len(),
        });
    }
    for v in votes {
        if !v.label.is_positive() && !v.evidence.is_empty() {
            return Err(DatasetError::InvalidVote {
                id: id.to_owned(),
                annotator: v.annotator_id.clone(),
                message: "label 0 with non-empty evidence".into(),
            });
        }
    }
    Ok(())
}

fn unanimous(votes: &[AnnotationVote]) -> Option<AdjudicationState> {
    let first = votes.first()?;
    votes
        .iter()
        .all(|v| v.agrees_with(first))
        .then(|| AdjudicationState::Finalized {
            label: first.label,
            evidence: first.evidence.clone(),
        })
}

/// Two-round vote aggregation.
///
/// Round 1 finalizes on three identical votes (label and evidence). A split
/// escalates to round 2, which finalizes the same way. A split second round
/// stays pending until an adjudicator vote decides it.
pub fn adjudicate(
    round1: &[AnnotationVote],
    round2: Option<&[AnnotationVote]>,
    adjudicator: Option<&AnnotationVote>,
) -> Result<AdjudicationState, DatasetError> {
    adjudicate_example("", round1, round2, adjudicator)
}

fn adjudicate_example(
    id: &str,
    round1: &[AnnotationVote],
    round2: Option<&[AnnotationVote]>,
    adjudicator: Option<&AnnotationVote>,
) -> Result<AdjudicationState, DatasetError> {
    check_votes(id, Round::First, round1, 3)?;
    if let Some(state) = unanimous(round1) {
        return Ok(state);
    }
    let Some(round2) = round2 else {
        return Ok(AdjudicationState::EscalatedRound2);
    };
    check_votes(id, Round::Second, round2, 3)?;
    if let Some(state) = unanimous(round2) {
        return Ok(state);
    }
    match adjudicator {
        Some(v) => {
            check_votes(id, Round::Adjudicator, std::slice::from_ref(v), 1)?;
            Ok(AdjudicationState::Finalized {
                label: v.label,
                evidence: v.evidence.clone(),
            })
        }
        None => Ok(AdjudicationState::NeedsAdjudication),
    }
}

/// Evidence shown to round-2 annotators: the union of round-1 evidence.
pub fn round2_proposal(round1: &[AnnotationVote]) -> EvidenceSet {
    round1
        .iter()
        .flat_map(|v| v.evidence.iter().copied())
        .collect()
}

/// One line of a votes file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub id: String,
    pub round: Round,
    pub annotator_id: String,
    pub label: Label,
    #[serde(default)]
    pub evidence: EvidenceSet,
}

impl VoteRecord {
    fn vote(&self) -> AnnotationVote {
        AnnotationVote {
            annotator_id: self.annotator_id.clone(),
            label: self.label,
            evidence: self.evidence.clone(),
        }
    }
}

/// Adjudicates every example in a votes file, in order of first appearance.
pub fn adjudicate_votes(
    records: &[VoteRecord],
) -> Result<Vec<(String, AdjudicationState)>, DatasetError> {
    let mut order: Vec<&str> = Vec::new();
    let mut grouped: HashMap<&str, [Vec<AnnotationVote>; 3]> = HashMap::new();
    for r in records {
        let slot = grouped.entry(r.id.as_str()).or_insert_with(|| {
            order.push(r.id.as_str());
            Default::default()
        });
        let idx = match r.round {
            Round::First => 0,
            Round::Second => 1,
            Round::Adjudicator => 2,
        };
        slot[idx].push(r.vote());
    }
    order
        .into_iter()
        .map(|id| {
            let [r1, r2, adj] = &grouped[id];
            if adj.len() > 1 {
                return Err(DatasetError::WrongVoteCount {
                    id: id.to_owned(),
                    round: Round::Adjudicator,
                    expected: 1,
                    found: adj.len(),
                });
            }
            let r2 = (!r2.is_empty()).then_some(r2.as_slice());
            adjudicate_example(id, r1, r2, adj.first()).map(|s| (id.to_owned(), s))
        })
        .collect()
}

pub type AdjudicatedId = (String, AdjudicationState);

/// Splits examples into finalized (with gold annotations attached) and
/// pending ones. Examples without votes are pending as escalations are.
pub fn apply_adjudication(
    examples: &[DetectionExample],
    states: &[(String, AdjudicationState)],
) -> Result<(Vec<DetectionExample>, Vec<AdjudicatedId>), DatasetError> {
    let by_id: HashMap<&str, &AdjudicationState> =
        states.iter().map(|(id, s)| (id.as_str(), s)).collect();
    let mut done = Vec::new();
    let mut pending = Vec::new();
    for ex in examples {
        match by_id.get(ex.id.as_str()) {
            Some(AdjudicationState::Finalized { label, evidence }) => {
                let labeled = ex.clone().with_gold(*label, evidence.iter().copied());
                if let Some(v) = labeled.violations().into_iter().next() {
                    return Err(DatasetError::InconsistentAnnotation {
                        id: ex.id.clone(),
                        message: v.message,
                    });
                }
                done.push(labeled);
            }
            Some(state) => pending.push((ex.id.clone(), (*state).clone())),
            None => pending.push((ex.id.clone(), AdjudicationState::EscalatedRound2)),
        }
    }
    Ok((done, pending))
}

/// Ids present in the corpus more than once.
pub fn duplicate_ids(examples: &[DetectionExample]) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    examples
        .iter()
        .filter(|e| !seen.insert(e.id.as_str()))
        .map(|e| e.id.clone())
        .collect()
}
