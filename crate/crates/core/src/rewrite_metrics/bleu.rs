use crate::error::MetricError;
use crate::text::TokenSeq;

use super::ngram::{ngram_counts, total};

const MAX_ORDER: usize = 4;

/// Corpus-level BLEU over orders 1–4 with uniform weights, no smoothing.
///
/// Counts are clipped by the maximum count over each item's references and
/// the brevity penalty uses the reference length closest to each hypothesis
/// (shorter on ties). An order for which the corpus has no hypothesis
/// n-grams at all is left out of the geometric mean; an order with
/// candidates but no matches makes the score 0.
pub fn bleu(hypotheses: &[TokenSeq], references: &[Vec<TokenSeq>]) -> Result<f64, MetricError> {
    if hypotheses.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }

    let mut matches = [0usize; MAX_ORDER];
    let mut candidates = [0usize; MAX_ORDER];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;

    for (index, (hyp, refs)) in hypotheses.iter().zip(references).enumerate() {
        if refs.is_empty() {
            return Err(MetricError::NoReferences { index });
        }
        hyp_len += hyp.len();
        ref_len += closest_ref_len(hyp.len(), refs);
        for n in 1..=MAX_ORDER {
            let hyp_counts = ngram_counts(hyp, n);
            candidates[n - 1] += total(&hyp_counts);
            let mut max_ref = std::collections::HashMap::new();
            for r in refs {
                for (gram, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(gram).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            matches[n - 1] += hyp_counts
                .iter()
                .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }

    let orders: Vec<usize> = (0..MAX_ORDER).filter(|&i| candidates[i] > 0).collect();
    if orders.is_empty() {
        // every hypothesis is empty
        return Ok(if ref_len == 0 { 1.0 } else { 0.0 });
    }
    if orders.iter().any(|&i| matches[i] == 0) {
        return Ok(0.0);
    }
    let log_mean = orders
        .iter()
        .map(|&i| (matches[i] as f64 / candidates[i] as f64).ln())
        .sum::<f64>()
        / orders.len() as f64;
    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(bp * log_mean.exp())
}

fn closest_ref_len(hyp_len: usize, refs: &[TokenSeq]) -> usize {
    refs.iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(hyp_len), len))
        .expect("refs non-empty")
}
