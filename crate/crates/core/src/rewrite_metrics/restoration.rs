use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::ngram::{f1, ngram_counts, overlap, total};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestorationScore {
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Tokens the rewrite added: each token's count is
/// `max(0, count_in_rewritten - count_in_original)`.
pub fn restored_words(original: &[String], rewritten: &[String]) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, isize> = BTreeMap::new();
    for tok in rewritten {
        *counts.entry(tok.clone()).or_insert(0) += 1;
    }
    for tok in original {
        if let Some(c) = counts.get_mut(tok) {
            *c -= 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c > 0)
        .map(|(t, c)| (t, c as usize))
        .collect()
}

/// Order-`n` n-grams of `rewritten` containing at least one restored word.
fn restored_ngrams<'a>(
    original: &[String],
    rewritten: &'a [String],
    n: usize,
) -> HashMap<&'a [String], usize> {
    let restored = restored_words(original, rewritten);
    let mut grams = ngram_counts(rewritten, n);
    grams.retain(|g, _| g.iter().any(|t| restored.contains_key(t)));
    grams
}

/// Restoration precision, recall and F1 of `hypothesis` against `reference`,
/// both relative to `original`.
///
/// An empty denominator gives 1 when both sides restored nothing and 0
/// otherwise.
pub fn restoration_prf(
    original: &[String],
    reference: &[String],
    hypothesis: &[String],
    n: usize,
) -> RestorationScore {
    assert!(n >= 1, "n-gram order must be at least 1");
    let hyp = restored_ngrams(original, hypothesis, n);
    let reference = restored_ngrams(original, reference, n);
    let hits = overlap(&hyp, &reference) as f64;
    let (hyp_total, ref_total) = (total(&hyp), total(&reference));
    let ratio = |denominator: usize, other: usize| match denominator {
        0 if other == 0 => 1.0,
        0 => 0.0,
        d => hits / d as f64,
    };
    let precision = ratio(hyp_total, ref_total);
    let recall = ratio(ref_total, hyp_total);
    RestorationScore {
        n,
        precision,
        recall,
        f1: f1(precision, recall),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn t(s: &str) -> Vec<String> {
        tokenize(s).into_inner()
    }

    #[test]
    fn restored_word_multiset() {
        let r = restored_words(&t("mine is great"), &t("my dog is great"));
        assert_eq!(r, BTreeMap::from([("dog".into(), 1), ("my".into(), 1)]));
        assert!(restored_words(&t("a b"), &t("a b")).is_empty());
        let r = restored_words(&t("a a b"), &t("a a a b"));
        assert_eq!(r, BTreeMap::from([("a".into(), 1)]));
    }

    #[test]
    fn perfect_restoration() {
        let s = restoration_prf(
            &t("mine is great"),
            &t("my dog is great"),
            &t("my dog is great"),
            1,
        );
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_restoration() {
        let s = restoration_prf(
            &t("mine is great"),
            &t("my dog is great"),
            &t("my cat is great"),
            1,
        );
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn no_restoration_against_restoring_reference() {
        let s = restoration_prf(
            &t("mine is great"),
            &t("my dog is great"),
            &t("mine is great"),
            1,
        );
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn nothing_to_restore_scores_one() {
        let o = t("i like sports");
        let s = restoration_prf(&o, &o, &o, 2);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn bigrams_touching_restored_words() {
        // restored hyp bigrams: (my dog), (dog is); ref: (my cat), (cat is)
        let s = restoration_prf(
            &t("mine is great"),
            &t("my cat is great"),
            &t("my dog is great"),
            2,
        );
        assert_eq!((s.precision, s.recall), (0.0, 0.0));
    }
}
