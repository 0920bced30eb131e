//! Rewriting quality metrics: BLEU, ROUGE-1/L, exact match, restoration
//! n-gram P/R/F, change rate, annotator agreement and human-label summaries.
//!
//! Every metric except exact match runs on [`tokenize`] output.

mod bleu;
mod ngram;
mod restoration;
mod rouge;

use std::fmt;

use serde::Serialize;

use crate::dialog::RewriteExample;
use crate::error::MetricError;
use crate::text::{tokenize, TokenSeq};

pub use bleu::bleu;
pub use restoration::{restoration_prf, restored_words, RestorationScore};
pub use rouge::{rouge_l, rouge_l_item, rouge_n, rouge_n_item};

/// Restoration F1 reported in the headline report uses unigrams.
pub const DEFAULT_RESTORATION_N: usize = 1;

/// 1 iff `hyp` equals some reference after trimming, collapsing whitespace
/// and casefolding. Punctuation is kept.
pub fn exact_match(hyp: &str, references: &[String]) -> bool {
    let h = normalize_for_em(hyp);
    references.iter().any(|r| normalize_for_em(r) == h)
}

fn normalize_for_em(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Fraction of pairs whose token sequences differ once case and
/// punctuation-only tokens are ignored.
pub fn change_rate<A: AsRef<str>, B: AsRef<str>>(pairs: &[(A, B)]) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let changed = pairs
        .iter()
        .filter(|(a, b)| is_changed(a.as_ref(), b.as_ref()))
        .count();
    Ok(changed as f64 / pairs.len() as f64)
}

pub fn is_changed(original: &str, rewritten: &str) -> bool {
    tokenize(original).without_punctuation() != tokenize(rewritten).without_punctuation()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RewriteCounts {
    pub examples: usize,
    pub references: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewriteEvalReport {
    pub bleu: f64,
    pub rouge1: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub em: f64,
    pub restoration_f1: f64,
    pub change_rate: f64,
    pub counts: RewriteCounts,
}

/// One scored item: the original utterance, a hypothesis and its references.
#[derive(Debug, Clone, Copy)]
pub struct RewriteItem<'a> {
    pub original: &'a str,
    pub hypothesis: &'a str,
    pub references: &'a [String],
}

/// Scores a corpus of rewrites.
///
/// Restoration F1 per item is the best over references, then averaged over
/// items.
pub fn score_rewrites(
    items: &[RewriteItem<'_>],
    restoration_n: usize,
) -> Result<RewriteEvalReport, MetricError> {
    if items.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let hyps: Vec<TokenSeq> = items.iter().map(|i| tokenize(i.hypothesis)).collect();
    let refs: Vec<Vec<TokenSeq>> = items
        .iter()
        .map(|i| i.references.iter().map(|r| tokenize(r)).collect())
        .collect();

    let bleu = bleu(&hyps, &refs)?;
    let rouge1 = rouge_n(&hyps, &refs, 1)?;
    let rouge_l = rouge_l(&hyps, &refs)?;

    let mut em = 0usize;
    let mut restoration = 0.0;
    for (item, (hyp, item_refs)) in items.iter().zip(hyps.iter().zip(&refs)) {
        em += usize::from(exact_match(item.hypothesis, item.references));
        let original = tokenize(item.original);
        restoration += item_refs
            .iter()
            .map(|r| restoration_prf(&original, r, hyp, restoration_n).f1)
            .fold(0.0, f64::max);
    }
    let pairs: Vec<(&str, &str)> = items.iter().map(|i| (i.original, i.hypothesis)).collect();
    let n = items.len() as f64;
    Ok(RewriteEvalReport {
        bleu,
        rouge1,
        rouge_l,
        em: em as f64 / n,
        restoration_f1: restoration / n,
        change_rate: change_rate(&pairs)?,
        counts: RewriteCounts {
            examples: items.len(),
            references: items.iter().map(|i| i.references.len()).sum(),
        },
    })
}

/// Evaluates each example's `hypothesis` against its references.
pub fn evaluate_rewrites(
    examples: &[RewriteExample],
    restoration_n: usize,
) -> Result<RewriteEvalReport, MetricError> {
    let items = examples
        .iter()
        .map(|ex| {
            Ok(RewriteItem {
                original: &ex.target.text,
                hypothesis: ex
                    .hypothesis
                    .as_deref()
                    .ok_or_else(|| MetricError::MissingHypothesis { id: ex.id.clone() })?,
                references: &ex.references,
            })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    score_rewrites(&items, restoration_n)
}

/// Treats the first reference as a hypothesis and the second as the only
/// reference.
pub fn inter_annotator_agreement(
    examples: &[RewriteExample],
    restoration_n: usize,
) -> Result<RewriteEvalReport, MetricError> {
    let items = examples
        .iter()
        .map(|ex| match ex.references.as_slice() {
            [a, b, ..] => Ok(RewriteItem {
                original: &ex.target.text,
                hypothesis: a,
                references: std::slice::from_ref(b),
            }),
            _ => Err(MetricError::MissingSecondReference { id: ex.id.clone() }),
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    score_rewrites(&items, restoration_n)
}

/// Percentages over the items carrying the relevant labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct HumanEvalSummary {
    pub correct: Option<f64>,
    pub complete: Option<f64>,
    pub coref: Option<f64>,
    pub ellipsis: Option<f64>,
    /// Co-reference or ellipsis (union).
    pub incomplete: Option<f64>,
    pub judged: usize,
    pub flagged: usize,
}

pub fn human_eval_summary(examples: &[RewriteExample]) -> Result<HumanEvalSummary, MetricError> {
    let judged: Vec<_> = examples.iter().filter_map(|e| e.human_eval).collect();
    let flagged: Vec<_> = examples.iter().filter_map(|e| e.flags).collect();
    if judged.is_empty() && flagged.is_empty() {
        return Err(MetricError::NoLabeledItems);
    }
    fn pct<T>(items: &[T], pred: impl Fn(&T) -> bool) -> Option<f64> {
        (!items.is_empty())
            .then(|| 100.0 * items.iter().filter(|x| pred(x)).count() as f64 / items.len() as f64)
    }
    Ok(HumanEvalSummary {
        correct: pct(&judged, |h| h.correct),
        complete: pct(&judged, |h| h.complete),
        coref: pct(&flagged, |f| f.has_coreference),
        ellipsis: pct(&flagged, |f| f.has_ellipsis),
        incomplete: pct(&flagged, |f| f.has_coreference || f.has_ellipsis),
        judged: judged.len(),
        flagged: flagged.len(),
    })
}

impl RewriteEvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for RewriteEvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "BLEU", "R-1", "R-L", "EM", "F1", "Change"
        )?;
        writeln!(
            f,
            "{:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            self.bleu, self.rouge1, self.rouge_l, self.em, self.restoration_f1, self.change_rate
        )?;
        write!(
            f,
            "({} examples, {} references)",
            self.counts.examples, self.counts.references
        )
    }
}

impl fmt::Display for HumanEvalSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"));
        writeln!(
            f,
            "{:>8} {:>8} {:>8} {:>8} {:>10}",
            "Correct", "Complete", "Coref", "Ellipsis", "Incomplete"
        )?;
        write!(
            f,
            "{:>8} {:>8} {:>8} {:>8} {:>10}",
            cell(self.correct),
            cell(self.complete),
            cell(self.coref),
            cell(self.ellipsis),
            cell(self.incomplete)
        )
    }
}
