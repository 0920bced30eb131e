use crate::gateway::{GatewayClient, GatewayError, Pair, ResponseCache};
use crate::hash::fnv1a64;
use crate::text::tokenize;

/// Maps premise/hypothesis pairs to contradiction probabilities.
///
/// Implementations return exactly one value in `[0, 1]` per pair, in order,
/// and must tolerate concurrent calls.
pub trait PairScorer: Send + Sync {
    fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<f64>, GatewayError>;
}

impl<S: PairScorer + ?Sized> PairScorer for &S {
    fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<f64>, GatewayError> {
        (**self).score_pairs(pairs)
    }
}

impl<S: PairScorer + ?Sized> PairScorer for Box<S> {
    fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<f64>, GatewayError> {
        (**self).score_pairs(pairs)
    }
}

/// Hash-based stand-in scorer: `fnv1a64(premise + "\x1f" + hypothesis) / 2^64`.
///
/// A seed, when set, is prepended as `"{seed}\x1f"` so different seeds give
/// independent score streams.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MockScorer {
    pub seed: Option<u64>,
}

impl MockScorer {
    pub fn seeded(seed: u64) -> Self {
        MockScorer { seed: Some(seed) }
    }

    pub fn score(&self, pair: &Pair) -> f64 {
        let key = match self.seed {
            None => format!("{}\x1f{}", pair.premise, pair.hypothesis),
            Some(seed) => format!("{seed}\x1f{}\x1f{}", pair.premise, pair.hypothesis),
        };
        fnv1a64(key.as_bytes()) as f64 / 18_446_744_073_709_551_616.0
    }
}

impl PairScorer for MockScorer {
    fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<f64>, GatewayError> {
        Ok(pairs.iter().map(|p| self.score(p)).collect())
    }
}

/// Token-level F1 overlap between premise and hypothesis. A smoke-test
/// heuristic, not a contradiction model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OverlapScorer;

impl OverlapScorer {
    pub fn score(&self, pair: &Pair) -> f64 {
        use std::collections::HashMap;
        let a = tokenize(&pair.premise);
        let b = tokenize(&pair.hypothesis);
        if a.is_empty() || b.is_empty() {
            return if a.is_empty() && b.is_empty() {
                1.0
            } else {
                0.0
            };
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in a.iter() {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut common = 0usize;
        for t in b.iter() {
            if let Some(c) = counts.get_mut(t.as_str()) {
                if *c > 0 {
                    *c -= 1;
                    common += 1;
                }
            }
        }
        if common == 0 {
            return 0.0;
        }
        let p = common as f64 / b.len() as f64;
        let r = common as f64 / a.len() as f64;
        2.0 * p * r / (p + r)
    }
}

impl PairScorer for OverlapScorer {
    fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<f64>, GatewayError> {
        Ok(pairs.iter().map(|p| self.score(p)).collect())
    }
}

/// Delegates to a remote `/v1/score` service.
#[derive(Debug)]
pub struct RemoteScorer {
    client: GatewayClient,
    cache: Option<ResponseCache>,
}

impl RemoteScorer {
    pub fn new(client: GatewayClient, cache: Option<ResponseCache>) -> Self {
        RemoteScorer { client, cache }
    }

    pub fn client(&self) -> &GatewayClient {
        &self.client
    }
}

impl PairScorer for RemoteScorer {
    fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<f64>, GatewayError> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        self.client.score_pairs_cached(pairs, self.cache.as_ref())
    }
}
