//! Client for remote scoring and rewriting services.
//!
//! Wire protocol (JSON over HTTP, UTF-8):
//!
//! * `POST /v1/score`   `{"pairs":[{"premise":..,"hypothesis":..}]}` → `{"scores":[..]}`
//! * `POST /v1/rewrite` `{"items":[{"input":..}]}` → `{"outputs":[..]}`
//! * `GET /health` → `{"status":..,"model_name":..}`
//!
//! 200 is success, 4xx is final, 5xx and transport failures are retried
//! with exponential backoff. Request bodies are serialized once, so a
//! retry sends exactly the same bytes.

mod cache;

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::hash::hex_digest;

pub use cache::{CacheEntry, ResponseCache};

type BatchResult<T> = Result<Vec<T>, GatewayError>;

pub const PROTOCOL_VERSION: &str = "v1";

/// A premise/hypothesis pair as sent to `/v1/score`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub premise: String,
    pub hypothesis: String,
}

impl Pair {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Pair {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub batch_size: usize,
    /// Maximum batches in flight at once.
    pub parallelism: usize,
}

impl Endpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Endpoint {
            base_url: base_url.into(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            batch_size: 32,
            parallelism: 4,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatewayErrorKind {
    Network,
    Protocol,
    Remote5xx,
    BadPayload,
}

impl fmt::Display for GatewayErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayErrorKind::Network => "network",
            GatewayErrorKind::Protocol => "protocol",
            GatewayErrorKind::Remote5xx => "remote_5xx",
            GatewayErrorKind::BadPayload => "bad_payload",
        })
    }
}

#[derive(Debug, Clone, Error)]
#[error("{kind} error after {attempts} attempt(s), request {request_digest}: {message}")]
pub struct GatewayError {
    pub kind: GatewayErrorKind,
    /// FNV-1a digest of the request body.
    pub request_digest: String,
    pub attempts: u32,
    pub message: String,
}

impl GatewayError {
    fn new(
        kind: GatewayErrorKind,
        digest: &str,
        attempts: u32,
        message: impl Into<String>,
    ) -> Self {
        GatewayError {
            kind,
            request_digest: digest.to_owned(),
            attempts,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_name: String,
}

/// Counters since the client was built.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GatewayStats {
    pub requests: usize,
    pub retries: usize,
    pub items_sent: usize,
    pub cache_hits: usize,
}

#[derive(Debug, Default)]
struct Counters {
    requests: AtomicUsize,
    retries: AtomicUsize,
    items_sent: AtomicUsize,
    cache_hits: AtomicUsize,
}

/// An operation on the wire: how items are keyed, encoded and decoded.
trait WireOp {
    type Item;
    type Output: Serialize + DeserializeOwned + Clone + Send;
    const PATH: &'static str;

    /// Canonical item text; its digest is the cache key.
    fn canonical(item: &Self::Item) -> String;
    fn body(items: &[&Self::Item]) -> Vec<u8>;
    fn decode(body: &[u8], expected: usize) -> Result<Vec<Self::Output>, String>;
}

struct ScoreOp;

impl WireOp for ScoreOp {
    type Item = Pair;
    type Output = f64;
    const PATH: &'static str = "/v1/score";

    fn canonical(item: &Pair) -> String {
        serde_json::to_string(item).expect("pair serializes")
    }

    fn body(items: &[&Pair]) -> Vec<u8> {
        #[derive(Serialize)]
        struct Req<'a> {
            pairs: &'a [&'a Pair],
        }
        serde_json::to_vec(&Req { pairs: items }).expect("request serializes")
    }

    fn decode(body: &[u8], expected: usize) -> Result<Vec<f64>, String> {
        #[derive(Deserialize)]
        struct Resp {
            scores: Vec<f64>,
        }
        let resp: Resp = serde_json::from_slice(body).map_err(|e| e.to_string())?;
        if resp.scores.len() != expected {
            return Err(format!(
                "expected {expected} scores, got {}",
                resp.scores.len()
            ));
        }
        if let Some(bad) = resp.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(format!("score {bad} outside [0, 1]"));
        }
        Ok(resp.scores)
    }
}

struct RewriteOp;

impl WireOp for RewriteOp {
    type Item = String;
    type Output = String;
    const PATH: &'static str = "/v1/rewrite";

    fn canonical(item: &String) -> String {
        item.clone()
    }

    fn body(items: &[&String]) -> Vec<u8> {
        #[derive(Serialize)]
        struct Item<'a> {
            input: &'a str,
        }
        #[derive(Serialize)]
        struct Req<'a> {
            items: Vec<Item<'a>>,
        }
        let req = Req {
            items: items.iter().map(|s| Item { input: s }).collect(),
        };
        serde_json::to_vec(&req).expect("request serializes")
    }

    fn decode(body: &[u8], expected: usize) -> Result<Vec<String>, String> {
        #[derive(Deserialize)]
        struct Resp {
            outputs: Vec<String>,
        }
        let resp: Resp = serde_json::from_slice(body).map_err(|e| e.to_string())?;
        if resp.outputs.len() != expected {
            return Err(format!(
                "expected {expected} outputs, got {}",
                resp.outputs.len()
            ));
        }
        Ok(resp.outputs)
    }
}

pub struct GatewayClient {
    endpoint: Endpoint,
    http: reqwest::blocking::Client,
    counters: Counters,
}

impl fmt::Debug for GatewayClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GatewayClient")
            .field("endpoint", &self.endpoint)
            .finish_non_exhaustive()
    }
}

impl GatewayClient {
    pub fn new(endpoint: Endpoint) -> Result<Self, GatewayError> {
        if endpoint.batch_size == 0 {
            return Err(GatewayError::new(
                GatewayErrorKind::Protocol,
                "",
                0,
                "batch_size must be at least 1",
            ));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(endpoint.timeout)
            .build()
            .map_err(|e| GatewayError::new(GatewayErrorKind::Network, "", 0, e.to_string()))?;
        Ok(GatewayClient {
            endpoint,
            http,
            counters: Counters::default(),
        })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            requests: self.counters.requests.load(Ordering::Relaxed),
            retries: self.counters.retries.load(Ordering::Relaxed),
            items_sent: self.counters.items_sent.load(Ordering::Relaxed),
            cache_hits: self.counters.cache_hits.load(Ordering::Relaxed),
        }
    }

    pub fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<f64>, GatewayError> {
        self.execute::<ScoreOp>(pairs, None)
    }

    pub fn score_pairs_cached(
        &self,
        pairs: &[Pair],
        cache: Option<&ResponseCache>,
    ) -> Result<Vec<f64>, GatewayError> {
        self.execute::<ScoreOp>(pairs, cache)
    }

    pub fn rewrite_batch(&self, inputs: &[String]) -> Result<Vec<String>, GatewayError> {
        self.execute::<RewriteOp>(inputs, None)
    }

    pub fn rewrite_batch_cached(
        &self,
        inputs: &[String],
        cache: Option<&ResponseCache>,
    ) -> Result<Vec<String>, GatewayError> {
        self.execute::<RewriteOp>(inputs, cache)
    }

    pub fn health(&self) -> Result<Health, GatewayError> {
        let url = self.endpoint.url("/health");
        let digest = hex_digest(b"GET /health");
        let (body, attempts) = self.with_retry(&digest, || self.http.get(&url).send())?;
        let bad = |e: serde_json::Error| {
            GatewayError::new(
                GatewayErrorKind::BadPayload,
                &digest,
                attempts,
                e.to_string(),
            )
        };
        let value: Value = serde_json::from_slice(&body).map_err(bad)?;
        serde_json::from_value(value).map_err(bad)
    }

    fn execute<Op: WireOp>(
        &self,
        items: &[Op::Item],
        cache: Option<&ResponseCache>,
    ) -> Result<Vec<Op::Output>, GatewayError>
    where
        Op::Item: Sync,
    {
        let mut results: Vec<Option<Op::Output>> = vec![None; items.len()];
        // canonical text -> positions still waiting for a response
        let mut pending: HashMap<String, Vec<usize>> = HashMap::new();
        let mut unique: Vec<(String, &Op::Item)> = Vec::new();

        for (i, item) in items.iter().enumerate() {
            let key = Op::canonical(item);
            if let Some(hit) = cache
                .and_then(|c| c.get(&key))
                .and_then(|v| serde_json::from_value::<Op::Output>(v).ok())
            {
                self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
                results[i] = Some(hit);
                continue;
            }
            pending
                .entry(key.clone())
                .or_insert_with(|| {
                    unique.push((key, item));
                    Vec::new()
                })
                .push(i);
        }

        let batches: Vec<&[(String, &Op::Item)]> =
            unique.chunks(self.endpoint.batch_size).collect();
        let outcomes = self.run_batches::<Op>(&batches, cache);

        for (batch, outcome) in batches.iter().zip(outcomes) {
            let outputs = outcome?;
            for ((key, _), out) in batch.iter().zip(outputs) {
                for &pos in &pending[key] {
                    results[pos] = Some(out.clone());
                }
            }
        }
        Ok(results
            .into_iter()
            .map(|r| r.expect("every position is filled"))
            .collect())
    }

    /// Sends batches with at most `parallelism` in flight. Outcomes are
    /// returned in batch order; after the first failure no new batches start.
    fn run_batches<Op: WireOp>(
        &self,
        batches: &[&[(String, &Op::Item)]],
        cache: Option<&ResponseCache>,
    ) -> Vec<BatchResult<Op::Output>>
    where
        Op::Item: Sync,
    {
        let slots: Mutex<Vec<Option<BatchResult<Op::Output>>>> =
            Mutex::new((0..batches.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let workers = self.endpoint.parallelism.clamp(1, batches.len().max(1));

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failed.load(Ordering::SeqCst) {
                        break;
                    }
                    let idx = next.fetch_add(1, Ordering::SeqCst);
                    let Some(batch) = batches.get(idx) else { break };
                    let outcome = self.send_batch::<Op>(batch, cache);
                    if outcome.is_err() {
                        failed.store(true, Ordering::SeqCst);
                    }
                    slots.lock().expect("slots poisoned")[idx] = Some(outcome);
                });
            }
        });

        let slots = slots.into_inner().expect("slots poisoned");
        let mut out = Vec::with_capacity(batches.len());
        for slot in slots {
            match slot {
                Some(r) => out.push(r),
                // never started because an earlier batch failed
                None => break,
            }
        }
        // batches are claimed in index order, so skipped ones form a suffix
        // behind at least one failure
        debug_assert!(out.len() == batches.len() || out.iter().any(Result::is_err));
        out
    }

    fn send_batch<Op: WireOp>(
        &self,
        batch: &[(String, &Op::Item)],
        cache: Option<&ResponseCache>,
    ) -> Result<Vec<Op::Output>, GatewayError> {
        let items: Vec<&Op::Item> = batch.iter().map(|(_, item)| *item).collect();
        let body = Op::body(&items);
        let digest = hex_digest(&body);
        let url = self.endpoint.url(Op::PATH);

        self.counters
            .items_sent
            .fetch_add(items.len(), Ordering::Relaxed);
        let (response, attempts) = self.with_retry(&digest, || {
            self.http
                .post(&url)
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body.clone())
                .send()
        })?;
        let outputs = Op::decode(&response, items.len())
            .map_err(|m| GatewayError::new(GatewayErrorKind::BadPayload, &digest, attempts, m))?;

        if let Some(cache) = cache {
            let entries = batch
                .iter()
                .zip(&outputs)
                .map(|((key, _), out)| {
                    CacheEntry::new(
                        key.clone(),
                        serde_json::to_value(out).expect("output serializes"),
                    )
                })
                .collect();
            if let Err(e) = cache.insert_batch(entries) {
                log::warn!("failed to append to response cache: {e}");
            }
        }
        Ok(outputs)
    }

    /// Returns the response body and the number of attempts it took.
    fn with_retry<F>(&self, digest: &str, mut send: F) -> Result<(Vec<u8>, u32), GatewayError>
    where
        F: FnMut() -> reqwest::Result<reqwest::blocking::Response>,
    {
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            self.counters.requests.fetch_add(1, Ordering::Relaxed);
            let (kind, message) = match send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        match resp.bytes() {
                            Ok(b) => return Ok((b.to_vec(), attempts)),
                            Err(e) => (GatewayErrorKind::Network, e.to_string()),
                        }
                    } else if status.is_server_error() {
                        (GatewayErrorKind::Remote5xx, format!("HTTP {status}"))
                    } else {
                        let text = resp.text().unwrap_or_default();
                        return Err(GatewayError::new(
                            GatewayErrorKind::Protocol,
                            digest,
                            attempts,
                            format!("HTTP {status}: {}", text.trim()),
                        ));
                    }
                }
                Err(e) => (GatewayErrorKind::Network, e.to_string()),
            };
            if attempts > self.endpoint.max_retries {
                return Err(GatewayError::new(kind, digest, attempts, message));
            }
            log::debug!("request {digest} failed ({kind}: {message}), retrying");
            self.counters.retries.fetch_add(1, Ordering::Relaxed);
            std::thread::sleep(self.endpoint.backoff_base * 2u32.saturating_pow(attempts - 1));
        }
    }
}
