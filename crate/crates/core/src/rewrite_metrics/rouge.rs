use crate::error::MetricError;
use crate::text::TokenSeq;

use super::ngram::{f1, ngram_counts, overlap, total};

/// Per-item ROUGE-N F1 against the best reference.
pub fn rouge_n_item(hyp: &[String], refs: &[TokenSeq], n: usize) -> f64 {
    let h = ngram_counts(hyp, n);
    refs.iter()
        .map(|r| {
            let rc = ngram_counts(r, n);
            prf_from_counts(overlap(&h, &rc), total(&h), total(&rc))
        })
        .fold(0.0, f64::max)
}

/// Per-item ROUGE-L F1 against the best reference.
pub fn rouge_l_item(hyp: &[String], refs: &[TokenSeq]) -> f64 {
    refs.iter()
        .map(|r| prf_from_counts(lcs_len(hyp, r), hyp.len(), r.len()))
        .fold(0.0, f64::max)
}

fn prf_from_counts(hits: usize, hyp_total: usize, ref_total: usize) -> f64 {
    match (hyp_total, ref_total) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => f1(
            hits as f64 / hyp_total as f64,
            hits as f64 / ref_total as f64,
        ),
    }
}

pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn corpus_mean(
    hyps: &[TokenSeq],
    refs: &[Vec<TokenSeq>],
    item: impl Fn(&TokenSeq, &[TokenSeq]) -> f64,
) -> Result<f64, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            left: hyps.len(),
            right: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut sum = 0.0;
    for (index, (h, r)) in hyps.iter().zip(refs).enumerate() {
        if r.is_empty() {
            return Err(MetricError::NoReferences { index });
        }
        sum += item(h, r);
    }
    Ok(sum / hyps.len() as f64)
}

/// Mean per-item ROUGE-N F1 (β = 1).
pub fn rouge_n(hyps: &[TokenSeq], refs: &[Vec<TokenSeq>], n: usize) -> Result<f64, MetricError> {
    corpus_mean(hyps, refs, |h, r| rouge_n_item(h, r, n))
}

/// Mean per-item ROUGE-L F1 (β = 1).
pub fn rouge_l(hyps: &[TokenSeq], refs: &[Vec<TokenSeq>]) -> Result<f64, MetricError> {
    corpus_mean(hyps, refs, |h, r| rouge_l_item(h, r))
}
