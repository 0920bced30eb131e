//! Contradiction detection over a pluggable pair scorer.
//!
//! In the structured (SUB) mode every earlier bot utterance is paired with
//! the last one; the example score is the maximum pair score and the
//! evidence is every pair scoring strictly above `eta`. The label uses the
//! same strict threshold, so in the structured modes `label == 1` exactly
//! when the evidence is non-empty.

mod scorer;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dialog::{
    bot_turn_indices, DetectionExample, EvidenceSet, Label, PredictionRecord, Utterance,
};
use crate::gateway::{GatewayError, ResponseCache};
use crate::rewriting::{batch_rewrite, rewrite_dialogue_bots, RewriteError, RewriterKind};

pub use crate::gateway::Pair;
pub use scorer::{MockScorer, OverlapScorer, PairScorer, RemoteScorer};

pub const DEFAULT_ETA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("{id}: example must end with a bot turn")]
    NotBotTerminated { id: String },
    #[error("scorer failed: {0}")]
    Scorer(#[from] GatewayError),
    #[error("scorer returned {got} scores for {expected} pairs")]
    ScoreCount { expected: usize, got: usize },
    #[error("scorer returned {score}, outside [0, 1]")]
    ScoreRange { score: f64 },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("prediction runs differ in length ({expected} vs {found})")]
    RunLengthMismatch { expected: usize, found: usize },
    #[error("nothing to ensemble")]
    EmptyEnsemble,
    #[error("ensemble member has id {found:?}, expected {expected:?}")]
    IdMismatch { expected: String, found: String },
    #[error("{id}: ensemble members disagree on pair count ({expected} vs {found})")]
    PairCountMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum DetectionMode {
    /// Each prior bot utterance against the last one.
    #[default]
    Sub,
    /// As `Sub`, with each bot utterance prefixed by the human turn before it.
    SubConcat,
    /// The whole history as one premise.
    Unstructured,
}

impl DetectionMode {
    pub fn is_structured(self) -> bool {
        !matches!(self, DetectionMode::Unstructured)
    }
}

impl FromStr for DetectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sub" => Ok(DetectionMode::Sub),
            "sub-concat" | "sub_concat" => Ok(DetectionMode::SubConcat),
            "unstructured" => Ok(DetectionMode::Unstructured),
            other => Err(format!(
                "unknown mode {other:?} (expected sub, sub-concat or unstructured)"
            )),
        }
    }
}

impl fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionMode::Sub => "sub",
            DetectionMode::SubConcat => "sub-concat",
            DetectionMode::Unstructured => "unstructured",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    pub mode: DetectionMode,
    pub eta: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            mode: DetectionMode::Sub,
            eta: DEFAULT_ETA,
        }
    }
}

impl DetectionConfig {
    pub fn new(mode: DetectionMode, eta: f64) -> Self {
        DetectionConfig { mode, eta }
    }
}

/// Bot text, prefixed by the immediately preceding turn when that turn is human.
fn with_preceding_human(turns: &[Utterance], i: usize) -> String {
    match i.checked_sub(1).map(|p| &turns[p]) {
        Some(prev) if !prev.is_bot() => format!("{} {}", prev.text, turns[i].text),
        _ => turns[i].text.clone(),
    }
}

/// Builds the scorer inputs for `example`, which must end with a bot turn.
///
/// Structured modes yield one pair per earlier bot utterance (possibly
/// none); the unstructured mode always yields exactly one pair.
pub fn make_pairs(example: &DetectionExample, mode: DetectionMode) -> Vec<Pair> {
    let turns = &example.turns;
    let Some(last) = turns.len().checked_sub(1) else {
        return Vec::new();
    };
    match mode {
        DetectionMode::Sub => {
            let bots = bot_turn_indices(turns);
            let hypothesis = &turns[last].text;
            bots[..bots.len().saturating_sub(1)]
                .iter()
                .map(|&i| Pair::new(turns[i].text.clone(), hypothesis.clone()))
                .collect()
        }
        DetectionMode::SubConcat => {
            let bots = bot_turn_indices(turns);
            let hypothesis = with_preceding_human(turns, last);
            bots[..bots.len().saturating_sub(1)]
                .iter()
                .map(|&i| Pair::new(with_preceding_human(turns, i), hypothesis.clone()))
                .collect()
        }
        DetectionMode::Unstructured => {
            let premise = turns[..last]
                .iter()
                .map(|u| format!("{} {}", u.speaker.token(), u.text))
                .collect::<Vec<_>>()
                .join(" ");
            vec![Pair::new(premise, turns[last].text.clone())]
        }
    }
}

/// Derives score, label and evidence from per-pair scores.
pub fn predict_from_scores(
    id: &str,
    pair_scores: Vec<f64>,
    config: &DetectionConfig,
) -> PredictionRecord {
    let score = pair_scores.iter().copied().fold(0.0, f64::max);
    let evidence: EvidenceSet = if config.mode.is_structured() {
        pair_scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > config.eta)
            .map(|(i, _)| i + 1)
            .collect()
    } else {
        EvidenceSet::new()
    };
    PredictionRecord {
        id: id.to_owned(),
        score,
        label: Label::from(score > config.eta),
        evidence,
        pair_scores,
    }
}

fn check_scores(expected: usize, scores: &[f64]) -> Result<(), DetectError> {
    if scores.len() != expected {
        return Err(DetectError::ScoreCount {
            expected,
            got: scores.len(),
        });
    }
    match scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        Some(&score) => Err(DetectError::ScoreRange { score }),
        None => Ok(()),
    }
}

fn ensure_bot_terminated(example: &DetectionExample) -> Result<(), DetectError> {
    match example.turns.last() {
        Some(t) if t.is_bot() => Ok(()),
        _ => Err(DetectError::NotBotTerminated {
            id: example.id.clone(),
        }),
    }
}

pub fn detect(
    example: &DetectionExample,
    config: &DetectionConfig,
    scorer: &dyn PairScorer,
) -> Result<PredictionRecord, DetectError> {
    ensure_bot_terminated(example)?;
    let pairs = make_pairs(example, config.mode);
    let scores = if pairs.is_empty() {
        Vec::new()
    } else {
        scorer.score_pairs(&pairs)?
    };
    check_scores(pairs.len(), &scores)?;
    Ok(predict_from_scores(&example.id, scores, config))
}

/// Rewrites the bot turns first, then detects on the rewritten example.
pub fn detect_with_rewriting(
    example: &DetectionExample,
    rewriter: &RewriterKind,
    config: &DetectionConfig,
    scorer: &dyn PairScorer,
    max_context: usize,
) -> Result<PredictionRecord, DetectError> {
    let rewritten = rewrite_dialogue_bots(example, rewriter, max_context)?;
    detect(&rewritten, config, scorer)
}

/// Averages per-pair scores of several predictions for the same example and
/// recomputes score, label and evidence at `eta`.
///
/// Each averaged value is clamped to the members' range at that position, so
/// identical members reproduce their input bit for bit. Members without
/// pair scores are averaged at the example level.
pub fn ensemble(
    records: &[PredictionRecord],
    config: &DetectionConfig,
) -> Result<PredictionRecord, DetectError> {
    let first = records.first().ok_or(DetectError::EmptyEnsemble)?;
    for r in &records[1..] {
        if r.id != first.id {
            return Err(DetectError::IdMismatch {
                expected: first.id.clone(),
                found: r.id.clone(),
            });
        }
        if r.pair_scores.len() != first.pair_scores.len() {
            return Err(DetectError::PairCountMismatch {
                id: first.id.clone(),
                expected: first.pair_scores.len(),
                found: r.pair_scores.len(),
            });
        }
    }
    if first.pair_scores.is_empty() {
        let score = bounded_mean(records.iter().map(|r| r.score));
        return Ok(PredictionRecord {
            id: first.id.clone(),
            score,
            label: Label::from(score > config.eta),
            evidence: EvidenceSet::new(),
            pair_scores: Vec::new(),
        });
    }
    let averaged = (0..first.pair_scores.len())
        .map(|i| bounded_mean(records.iter().map(|r| r.pair_scores[i])))
        .collect();
    Ok(predict_from_scores(&first.id, averaged, config))
}

fn bounded_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mut sum, mut n, mut lo, mut hi) = (0.0, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        sum += v;
        n += 1;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (sum / n as f64).clamp(lo, hi)
}

/// Ensembles several prediction runs aligned by position.
pub fn ensemble_runs(
    runs: &[Vec<PredictionRecord>],
    config: &DetectionConfig,
) -> Result<Vec<PredictionRecord>, DetectError> {
    let first = runs.first().ok_or(DetectError::EmptyEnsemble)?;
    if let Some(run) = runs.iter().find(|r| r.len() != first.len()) {
        return Err(DetectError::RunLengthMismatch {
            expected: first.len(),
            found: run.len(),
        });
    }
    (0..first.len())
        .map(|i| {
            let members: Vec<PredictionRecord> = runs.iter().map(|run| run[i].clone()).collect();
            ensemble(&members, config)
        })
        .collect()
}

/// Rewriting applied before detection in [`score_corpus`].
#[derive(Debug, Clone, Copy)]
pub struct RewriteStage<'a> {
    pub kind: &'a RewriterKind,
    pub max_context: usize,
    pub cache: Option<&'a ResponseCache>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleFailure {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusRun {
    /// Successful predictions, in input order.
    pub records: Vec<PredictionRecord>,
    pub failures: Vec<ExampleFailure>,
}

impl CorpusRun {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Detects over a corpus, sending every pair to the scorer in one call.
///
/// If that call fails the corpus is retried example by example and the
/// failing examples are reported instead of aborting the run. A rewriting
/// failure aborts.
pub fn score_corpus(
    examples: &[DetectionExample],
    config: &DetectionConfig,
    scorer: &dyn PairScorer,
    rewrite: Option<RewriteStage<'_>>,
) -> Result<CorpusRun, DetectError> {
    let rewritten;
    let examples = match rewrite {
        Some(stage) => {
            rewritten = batch_rewrite(examples, stage.kind, stage.max_context, stage.cache)?;
            rewritten.as_slice()
        }
        None => examples,
    };

    let mut run = CorpusRun::default();
    let mut valid = Vec::with_capacity(examples.len());
    for ex in examples {
        match ensure_bot_terminated(ex) {
            Ok(()) => valid.push((ex, make_pairs(ex, config.mode))),
            Err(e) => run.failures.push(ExampleFailure {
                id: ex.id.clone(),
                message: e.to_string(),
            }),
        }
    }

    let all_pairs: Vec<Pair> = valid.iter().flat_map(|(_, p)| p.iter().cloned()).collect();
    let bulk = if all_pairs.is_empty() {
        Ok(Vec::new())
    } else {
        scorer
            .score_pairs(&all_pairs)
            .map_err(DetectError::from)
            .and_then(|s| check_scores(all_pairs.len(), &s).map(|()| s))
    };

    match bulk {
        Ok(scores) => {
            let mut rest = scores.as_slice();
            for (ex, pairs) in &valid {
                let (mine, tail) = rest.split_at(pairs.len());
                rest = tail;
                run.records
                    .push(predict_from_scores(&ex.id, mine.to_vec(), config));
            }
        }
        Err(e) => {
            log::warn!("bulk scoring failed ({e}); retrying per example");
            for (ex, _) in &valid {
                match detect(ex, config, scorer) {
                    Ok(r) => run.records.push(r),
                    Err(e) => run.failures.push(ExampleFailure {
                        id: ex.id.clone(),
                        message: e.to_string(),
                    }),
                }
            }
        }
    }
    // failures were collected out of order relative to records; keep them
    // in input order too
    let order: std::collections::HashMap<&str, usize> = examples
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    run.failures
        .sort_by_key(|f| order.get(f.id.as_str()).copied().unwrap_or(usize::MAX));
    Ok(run)
}
