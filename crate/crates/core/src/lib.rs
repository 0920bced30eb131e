//! Contradiction detection in bot dialogue: per-utterance pair scoring
//! with optional utterance rewriting, plus the metrics and corpus tooling
//! around it.
//!
//! ```
//! use dialcheck::{detect, DetectionConfig, DetectionExample, OverlapScorer, Utterance};
//!
//! let ex = DetectionExample::new(
//!     "d1",
//!     vec![
//!         Utterance::bot("i love dogs"),
//!         Utterance::human("really?"),
//!         Utterance::bot("i love dogs"),
//!     ],
//! );
//! let rec = detect(&ex, &DetectionConfig::default(), &OverlapScorer).unwrap();
//! assert_eq!(rec.pair_scores, vec![1.0]);
//! assert_eq!(rec.evidence.into_iter().collect::<Vec<_>>(), vec![1]);
//! ```

pub mod dataset;
pub mod detect_metrics;
pub mod detection;
pub mod dialog;
mod error;
pub mod gateway;
pub mod hash;
pub mod rewrite_metrics;
pub mod rewriting;
pub mod text;

pub use detection::{
    detect, detect_with_rewriting, ensemble, DetectError, DetectionConfig, DetectionMode,
    MockScorer, OverlapScorer, Pair, PairScorer, RemoteScorer, DEFAULT_ETA,
};
pub use dialog::{
    DataError, DetectionExample, Dialogue, EvidenceSet, HumanEval, Label, PredictionRecord, Record,
    RewriteExample, RewriteFlags, SpeakerRole, Utterance,
};
pub use error::{Error, MetricError};
pub use gateway::{Endpoint, GatewayClient, GatewayError, GatewayErrorKind, ResponseCache};
pub use rewriting::{RewriteError, RewriterKind, RuleTable};
pub use text::{tokenize, TokenSeq};
