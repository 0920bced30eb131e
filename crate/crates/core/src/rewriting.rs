//! Bot-utterance rewriting: input encoding and pluggable rewriters.
//!
//! Rewriter inputs put a speaker token before every utterance:
//!
//! ```text
//! [H] Hi, what's your favorite singer? [REWRITE] [B] Mine is johnny cash of course.
//! ```
//!
//! The encoding is part of the wire contract with any served rewriting
//! model.

use std::collections::HashSet;

use thiserror::Error;

use crate::dialog::{DetectionExample, Dialogue, RewriteExample, Utterance};
use crate::gateway::{GatewayClient, GatewayError, ResponseCache};

pub const REWRITE_MARKER: &str = "[REWRITE]";
pub const DEFAULT_MAX_CONTEXT: usize = 6;

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("{id}: rewriting turn {turn_index} failed: {source}")]
    Turn {
        id: String,
        turn_index: usize,
        #[source]
        source: GatewayError,
    },
    #[error("batch rewrite failed: {0}")]
    Batch(#[source] GatewayError),
    #[error("rule table line {line}: {message}")]
    Rules { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriterInput {
    pub encoded: String,
    /// Context utterances kept after truncation.
    pub context_len: usize,
}

/// Encodes the last `max_context` context utterances (oldest first) followed
/// by the marker and the target.
pub fn build_rewriter_input(
    context: &[Utterance],
    target: &Utterance,
    max_context: usize,
) -> RewriterInput {
    let kept = &context[context.len().saturating_sub(max_context)..];
    let mut encoded = String::new();
    for u in kept {
        encoded.push_str(u.speaker.token());
        encoded.push(' ');
        encoded.push_str(&u.text);
        encoded.push(' ');
    }
    encoded.push_str(REWRITE_MARKER);
    encoded.push(' ');
    encoded.push_str(target.speaker.token());
    encoded.push(' ');
    encoded.push_str(&target.text);
    RewriterInput {
        encoded,
        context_len: kept.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub pattern: String,
    pub replacement: String,
}

/// Ordered literal substitutions.
///
/// The text is scanned left to right; at each position the first rule whose
/// pattern matches there is applied and scanning resumes after the match.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleTable {
    rules: Vec<Rule>,
}

impl RuleTable {
    pub fn new(rules: Vec<Rule>) -> Result<Self, RewriteError> {
        if let Some(i) = rules.iter().position(|r| r.pattern.is_empty()) {
            return Err(RewriteError::Rules {
                line: i + 1,
                message: "empty pattern".into(),
            });
        }
        Ok(RuleTable { rules })
    }

    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, RewriteError> {
        Self::new(
            pairs
                .into_iter()
                .map(|(p, r)| Rule {
                    pattern: p.to_owned(),
                    replacement: r.to_owned(),
                })
                .collect(),
        )
    }

    /// Parses `pattern<TAB>replacement` lines. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse_tsv(text: &str) -> Result<Self, RewriteError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (pattern, replacement) =
                line.split_once('\t').ok_or_else(|| RewriteError::Rules {
                    line: i + 1,
                    message: "expected pattern<TAB>replacement".into(),
                })?;
            if pattern.is_empty() {
                return Err(RewriteError::Rules {
                    line: i + 1,
                    message: "empty pattern".into(),
                });
            }
            rules.push(Rule {
                pattern: pattern.to_owned(),
                replacement: replacement.to_owned(),
            });
        }
        Ok(RuleTable { rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn apply(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        'scan: while let Some(c) = rest.chars().next() {
            for rule in &self.rules {
                if let Some(after) = rest.strip_prefix(rule.pattern.as_str()) {
                    out.push_str(&rule.replacement);
                    rest = after;
                    continue 'scan;
                }
            }
            out.push(c);
            rest = &rest[c.len_utf8()..];
        }
        out
    }
}

#[derive(Debug)]
pub enum RewriterKind {
    Identity,
    RuleTable(RuleTable),
    Remote(GatewayClient),
}

/// One utterance to rewrite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteJob {
    pub input: RewriterInput,
    pub target_text: String,
}

impl RewriteJob {
    pub fn new(context: &[Utterance], target: &Utterance, max_context: usize) -> Self {
        RewriteJob {
            input: build_rewriter_input(context, target, max_context),
            target_text: target.text.clone(),
        }
    }
}

impl RewriterKind {
    pub fn is_remote(&self) -> bool {
        matches!(self, RewriterKind::Remote(_))
    }

    /// Rewrites every job, in order. Only the remote kind consults `cache`.
    pub fn rewrite_jobs(
        &self,
        jobs: &[RewriteJob],
        cache: Option<&ResponseCache>,
    ) -> Result<Vec<String>, GatewayError> {
        match self {
            RewriterKind::Identity => Ok(jobs.iter().map(|j| j.target_text.clone()).collect()),
            RewriterKind::RuleTable(table) => {
                Ok(jobs.iter().map(|j| table.apply(&j.target_text)).collect())
            }
            RewriterKind::Remote(client) => {
                if jobs.is_empty() {
                    return Ok(Vec::new());
                }
                let inputs: Vec<String> = jobs.iter().map(|j| j.input.encoded.clone()).collect();
                client.rewrite_batch_cached(&inputs, cache)
            }
        }
    }
}

pub fn rewrite_utterance(
    kind: &RewriterKind,
    context: &[Utterance],
    target: &Utterance,
    max_context: usize,
) -> Result<String, GatewayError> {
    let job = RewriteJob::new(context, target, max_context);
    Ok(kind
        .rewrite_jobs(std::slice::from_ref(&job), None)?
        .pop()
        .expect("one job, one output"))
}

/// Anything holding an ordered turn sequence whose bot turns can be rewritten.
pub trait HasTurns: Clone {
    fn id(&self) -> &str;
    fn turns(&self) -> &[Utterance];
    fn turns_mut(&mut self) -> &mut [Utterance];
}

impl HasTurns for Dialogue {
    fn id(&self) -> &str {
        &self.id
    }
    fn turns(&self) -> &[Utterance] {
        &self.turns
    }
    fn turns_mut(&mut self) -> &mut [Utterance] {
        &mut self.turns
    }
}

impl HasTurns for DetectionExample {
    fn id(&self) -> &str {
        &self.id
    }
    fn turns(&self) -> &[Utterance] {
        &self.turns
    }
    fn turns_mut(&mut self) -> &mut [Utterance] {
        &mut self.turns
    }
}

/// One job per bot turn, each seeing only the original preceding turns.
fn bot_jobs(turns: &[Utterance], max_context: usize) -> Vec<(usize, RewriteJob)> {
    turns
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_bot())
        .map(|(i, t)| (i, RewriteJob::new(&turns[..i], t, max_context)))
        .collect()
}

/// Rewrites every bot turn of `item`; human turns and structure are untouched.
pub fn rewrite_dialogue_bots<T: HasTurns>(
    item: &T,
    kind: &RewriterKind,
    max_context: usize,
) -> Result<T, RewriteError> {
    let mut out = item.clone();
    for (i, job) in bot_jobs(item.turns(), max_context) {
        let text = kind
            .rewrite_jobs(std::slice::from_ref(&job), None)
            .map_err(|source| RewriteError::Turn {
                id: item.id().to_owned(),
                turn_index: i,
                source,
            })?
            .pop()
            .expect("one job, one output");
        out.turns_mut()[i].text = text;
    }
    Ok(out)
}

/// Rewrites the bot turns of a whole corpus with one batched call.
///
/// Remote results are cached per encoded input, so identical inputs are
/// sent at most once and never again on later runs with the same cache.
/// A failure leaves everything already received in the cache.
pub fn batch_rewrite<T: HasTurns>(
    corpus: &[T],
    kind: &RewriterKind,
    max_context: usize,
    cache: Option<&ResponseCache>,
) -> Result<Vec<T>, RewriteError> {
    let mut slots = Vec::new();
    let mut jobs = Vec::new();
    for (d, item) in corpus.iter().enumerate() {
        for (t, job) in bot_jobs(item.turns(), max_context) {
            slots.push((d, t));
            jobs.push(job);
        }
    }
    let outputs = kind
        .rewrite_jobs(&jobs, cache)
        .map_err(RewriteError::Batch)?;
    let mut out = corpus.to_vec();
    for ((d, t), text) in slots.into_iter().zip(outputs) {
        out[d].turns_mut()[t].text = text;
    }
    Ok(out)
}

/// Fills `hypothesis` on every rewrite example by rewriting its target.
pub fn fill_hypotheses(
    examples: &[RewriteExample],
    kind: &RewriterKind,
    max_context: usize,
    cache: Option<&ResponseCache>,
) -> Result<Vec<RewriteExample>, RewriteError> {
    let jobs: Vec<RewriteJob> = examples
        .iter()
        .map(|ex| RewriteJob::new(&ex.context, &ex.target, max_context))
        .collect();
    let outputs = kind
        .rewrite_jobs(&jobs, cache)
        .map_err(RewriteError::Batch)?;
    Ok(examples
        .iter()
        .zip(outputs)
        .map(|(ex, hyp)| RewriteExample {
            hypothesis: Some(hyp),
            ..ex.clone()
        })
        .collect())
}

/// What a remote rewrite run would send, without sending anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RewritePlan {
    pub utterances: usize,
    pub unique_inputs: usize,
    pub cache_hits: usize,
    pub to_send: usize,
}

pub fn plan_jobs(jobs: &[RewriteJob], cache: Option<&ResponseCache>) -> RewritePlan {
    let mut seen = HashSet::new();
    let mut plan = RewritePlan {
        utterances: jobs.len(),
        ..RewritePlan::default()
    };
    for job in jobs {
        let input = job.input.encoded.as_str();
        if cache.is_some_and(|c| c.contains(input)) {
            plan.cache_hits += 1;
        } else if seen.insert(input) {
            plan.to_send += 1;
        }
    }
    plan.unique_inputs = jobs
        .iter()
        .map(|j| j.input.encoded.as_str())
        .collect::<HashSet<_>>()
        .len();
    plan
}

/// All bot-turn jobs of a corpus, in corpus order.
pub fn corpus_jobs<T: HasTurns>(corpus: &[T], max_context: usize) -> Vec<RewriteJob> {
    corpus
        .iter()
        .flat_map(|item| {
            bot_jobs(item.turns(), max_context)
                .into_iter()
                .map(|(_, j)| j)
        })
        .collect()
}
