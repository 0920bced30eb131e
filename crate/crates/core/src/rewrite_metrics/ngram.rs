use std::collections::HashMap;

/// Multiset of the order-`n` n-grams of `tokens`.
pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Σ min(count_a, count_b) over shared keys.
pub(crate) fn overlap<K: std::hash::Hash + Eq>(
    a: &HashMap<K, usize>,
    b: &HashMap<K, usize>,
) -> usize {
    a.iter()
        .map(|(k, &ca)| b.get(k).map_or(0, |&cb| ca.min(cb)))
        .sum()
}

pub(crate) fn total<K>(m: &HashMap<K, usize>) -> usize {
    m.values().sum()
}

/// Harmonic mean, 0 when both components are 0.
pub(crate) fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}
