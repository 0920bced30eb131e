//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod support;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, Cursor};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use dialcheck::dataset::{
    adjudicate, balanced_sample, merge_overlapping, prefix_cut, prefix_cut_corpus,
    AdjudicationState, AnnotationVote,
};
use dialcheck::detect_metrics::{aupr, evaluate, DetectionEvalReport};
use dialcheck::detection::{ensemble_runs, score_corpus};
use dialcheck::dialog::{read_records, to_jsonl};
use dialcheck::gateway::{Endpoint, GatewayClient, GatewayError, Pair, ResponseCache};
use dialcheck::rewrite_metrics::{bleu, restoration_prf, rouge_l, rouge_n};
use dialcheck::rewriting::batch_rewrite;
use dialcheck::{
    detect, tokenize, DetectionConfig, DetectionExample, DetectionMode, Dialogue, EvidenceSet,
    Label, MockScorer, OverlapScorer, PairScorer, PredictionRecord, Record, RewriterKind,
    RuleTable, TokenSeq, Utterance,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load<T: Record>(path: impl AsRef<Path>) -> Vec<T> {
    let path = fixtures().join(path);
    read_records(BufReader::new(File::open(&path).unwrap()))
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------- AUPR

/// Sweeps every distinct threshold, recounting from scratch each time.
fn aupr_sweep(gold: &[bool], scores: &[f64]) -> f64 {
    let positives = gold.iter().filter(|g| **g).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for t in thresholds {
        let (mut tp, mut predicted) = (0.0, 0.0);
        for (g, s) in gold.iter().zip(scores) {
            if *s >= t {
                predicted += 1.0;
                if *g {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        area += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    area
}

fn aupr_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut elapsed = Duration::ZERO;
    let started = Instant::now();
    for case in 0..200 {
        let n = rng.random_range(1..=1000);
        // a small number of levels forces ties
        let levels = if case % 2 == 0 {
            rng.random_range(1..=20)
        } else {
            1_000_000
        };
        let mut gold: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        if !gold.iter().any(|g| *g) {
            gold[0] = true;
        }
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let labels: Vec<Label> = gold.iter().map(|g| Label::from(*g)).collect();
        let t = Instant::now();
        let got = aupr(&labels, &scores).map_err(|e| e.to_string())?;
        elapsed += t.elapsed();
        let want = aupr_sweep(&gold, &scores);
        worst = worst.max((got - want).abs());
        ensure!(
            (got - want).abs() <= 1e-9,
            "case {case}: {got} vs sweep {want}"
        );
    }
    let total = started.elapsed();
    ensure!(total < Duration::from_secs(5), "took {total:?}");
    Ok(format!(
        "200 instances, max |diff| {worst:.1e}, aupr {elapsed:.2?}, total with oracle {total:.2?}"
    ))
}

// --------------------------------------------------------- restoration

fn ngrams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].to_vec())
        .collect()
}

/// Enumerates restored n-grams as plain lists and matches them greedily.
fn restoration_naive(
    original: &[String],
    reference: &[String],
    hypothesis: &[String],
    n: usize,
) -> (f64, f64, f64) {
    let restored = |rewritten: &[String]| {
        let mut left = rewritten.to_vec();
        for tok in original {
            if let Some(i) = left.iter().position(|t| t == tok) {
                left.remove(i);
            }
        }
        let words = left;
        ngrams(rewritten, n)
            .into_iter()
            .filter(|g| g.iter().any(|t| words.contains(t)))
            .collect::<Vec<_>>()
    };
    let hyp = restored(hypothesis);
    let mut pool = restored(reference);
    let ref_len = pool.len();
    let mut hits = 0usize;
    for g in &hyp {
        if let Some(i) = pool.iter().position(|r| r == g) {
            pool.remove(i);
            hits += 1;
        }
    }
    let ratio = |den: usize, other: usize| {
        if den == 0 {
            if other == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            hits as f64 / den as f64
        }
    };
    let p = ratio(hyp.len(), ref_len);
    let r = ratio(ref_len, hyp.len());
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

fn random_tokens(rng: &mut ChaCha8Rng, vocab: &[&str], max: usize) -> Vec<String> {
    let len = rng.random_range(0..=max);
    (0..len)
        .map(|_| vocab.choose(rng).unwrap().to_string())
        .collect()
}

fn restoration_oracle() -> Outcome {
    let vocab = [
        "my", "dog", "cat", "is", "great", "mine", "the", "it", "a", "concert",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for case in 0..500 {
        let original = random_tokens(&mut rng, &vocab, 6);
        // rewrites mostly extend the original
        let extend = |rng: &mut ChaCha8Rng| {
            let mut t = original.clone();
            for _ in 0..rng.random_range(0..4) {
                let pos = rng.random_range(0..=t.len());
                t.insert(pos, vocab.choose(rng).unwrap().to_string());
            }
            if rng.random_bool(0.2) {
                t = random_tokens(rng, &vocab, 8);
            }
            t
        };
        let reference = extend(&mut rng);
        let hypothesis = extend(&mut rng);
        for n in 1..=3 {
            let got = restoration_prf(&original, &reference, &hypothesis, n);
            let want = restoration_naive(&original, &reference, &hypothesis, n);
            ensure!(
                (got.precision, got.recall, got.f1) == want,
                "case {case} n={n}: {:?} vs {want:?} for {original:?} / {reference:?} / {hypothesis:?}",
                (got.precision, got.recall, got.f1)
            );
            checked += 1;
        }
    }
    let t = |s: &str| tokenize(s).into_inner();
    let s = restoration_prf(
        &t("mine is great"),
        &t("my dog is great"),
        &t("my cat is great"),
        1,
    );
    ensure!(
        (s.precision, s.recall, s.f1) == (0.5, 0.5, 0.5),
        "worked example gave {s:?}"
    );
    Ok(format!(
        "{checked} (triple, n) checks exact; worked example P=R=F=0.5"
    ))
}

// ----------------------------------------------------------- BLEU/ROUGE

fn bleu_rouge_cases() -> Outcome {
    let t = |s: &str| tokenize(s);
    let corpus: Vec<TokenSeq> = [
        "my favorite singer is johnny cash of course.",
        "i have not been to johnny cash's concert since last year.",
        "ok",
        "a b",
    ]
    .iter()
    .map(|s| t(s))
    .collect();
    let refs: Vec<Vec<TokenSeq>> = corpus.iter().map(|h| vec![h.clone()]).collect();
    let b = bleu(&corpus, &refs).map_err(|e| e.to_string())?;
    let r1 = rouge_n(&corpus, &refs, 1).map_err(|e| e.to_string())?;
    let rl = rouge_l(&corpus, &refs).map_err(|e| e.to_string())?;
    ensure!(
        b == 1.0 && r1 == 1.0 && rl == 1.0,
        "identity: bleu {b}, rouge1 {r1}, rougeL {rl}"
    );

    let got =
        bleu(&[t("the cat sat")], &[vec![t("the cat sat down")]]).map_err(|e| e.to_string())?;
    // clipped precisions 3/3, 2/2, 1/1; BP = exp(1 - 4/3)
    let want = (1.0f64 - 4.0 / 3.0).exp();
    ensure!((got - want).abs() <= 1e-12, "brevity case {got} vs {want}");

    let l = rouge_l(&[t("a b c d")], &[vec![t("a c b d")]]).map_err(|e| e.to_string())?;
    ensure!((l - 0.75).abs() <= 1e-12, "LCS case {l}");
    let one = rouge_n(&[t("a b c d")], &[vec![t("a c b d")]], 1).map_err(|e| e.to_string())?;
    ensure!(one == 1.0, "rouge1 on swapped tokens {one}");
    Ok(format!("identity 1.0; BP case {got:.15}; ROUGE-L {l}"))
}

// ------------------------------------------------------------ SUB suite

/// Mock scores snapped to tenths, so thresholds land exactly on scores.
struct Snapped;

impl PairScorer for Snapped {
    fn score_pairs(&self, pairs: &[Pair]) -> Result<Vec<f64>, GatewayError> {
        Ok(pairs
            .iter()
            .map(|p| (MockScorer::default().score(p) * 10.0).floor() / 10.0)
            .collect())
    }
}

fn random_example(rng: &mut ChaCha8Rng, id: usize) -> DetectionExample {
    let words = [
        "tea", "dogs", "rain", "jazz", "paris", "running", "books", "never", "always",
    ];
    let mut turns = Vec::new();
    for _ in 0..rng.random_range(0..9) {
        let text: Vec<&str> = (0..rng.random_range(1..5))
            .map(|_| *words.choose(rng).unwrap())
            .collect();
        turns.push(if rng.random_bool(0.5) {
            Utterance::bot(text.join(" "))
        } else {
            Utterance::human(text.join(" "))
        });
    }
    turns.push(Utterance::bot(format!(
        "i like {}",
        words.choose(rng).unwrap()
    )));
    DetectionExample::new(format!("g{id}"), turns)
}

fn sub_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let etas = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9];
    let mut boundary_hits = 0;
    for id in 0..1000 {
        let ex = random_example(&mut rng, id);
        for mode in [DetectionMode::Sub, DetectionMode::SubConcat] {
            let mut prev: Option<PredictionRecord> = None;
            for &eta in &etas {
                let rec = detect(&ex, &DetectionConfig::new(mode, eta), &Snapped)
                    .map_err(|e| e.to_string())?;
                let max = rec.pair_scores.iter().copied().fold(0.0, f64::max);
                ensure!(
                    rec.score == max,
                    "{}: score {} is not max {max}",
                    ex.id,
                    rec.score
                );
                ensure!(
                    rec.label.is_positive() == !rec.evidence.is_empty(),
                    "{} {mode} eta {eta}: label/evidence disagree",
                    ex.id
                );
                for (i, s) in rec.pair_scores.iter().enumerate() {
                    ensure!(
                        rec.evidence.contains(&(i + 1)) == (*s > eta),
                        "{}: index {} at eta {eta}",
                        ex.id,
                        i + 1
                    );
                    if *s == eta {
                        boundary_hits += 1;
                    }
                }
                if let Some(p) = &prev {
                    ensure!(
                        rec.evidence.is_subset(&p.evidence),
                        "{}: evidence grew with eta",
                        ex.id
                    );
                    ensure!(
                        !(rec.label.is_positive() && !p.label.is_positive()),
                        "{}: label flipped up",
                        ex.id
                    );
                }
                prev = Some(rec);
            }
        }

        // permuting the prior bot turns permutes scores and evidence
        let bots: Vec<usize> = ex.bot_turn_indices();
        let prior = &bots[..bots.len() - 1];
        let mut perm: Vec<usize> = (0..prior.len()).collect();
        perm.shuffle(&mut rng);
        let mut permuted = ex.clone();
        for (slot, &src) in perm.iter().enumerate() {
            permuted.turns[prior[slot]].text = ex.turns[prior[src]].text.clone();
        }
        let cfg = DetectionConfig::default();
        let a = detect(&ex, &cfg, &Snapped).map_err(|e| e.to_string())?;
        let b = detect(&permuted, &cfg, &Snapped).map_err(|e| e.to_string())?;
        ensure!(
            a.score == b.score,
            "{}: score changed under permutation",
            ex.id
        );
        for (slot, &src) in perm.iter().enumerate() {
            ensure!(
                b.pair_scores[slot] == a.pair_scores[src],
                "{}: pair scores not permuted",
                ex.id
            );
        }
        let mapped: EvidenceSet = perm
            .iter()
            .enumerate()
            .filter(|(_, src)| a.evidence.contains(&(**src + 1)))
            .map(|(slot, _)| slot + 1)
            .collect();
        ensure!(mapped == b.evidence, "{}: evidence not equivariant", ex.id);
    }
    // strict boundary on the spec's own case
    let rec =
        dialcheck::detection::predict_from_scores("b", vec![0.5], &DetectionConfig::default());
    ensure!(
        !rec.label.is_positive() && rec.evidence.is_empty(),
        "score == eta must be negative"
    );
    ensure!(
        boundary_hits > 0,
        "generator never hit the threshold exactly"
    );
    Ok(format!(
        "1000 examples x 2 modes x {} etas; {boundary_hits} exact-boundary scores",
        etas.len()
    ))
}

// ------------------------------------------------------------- ensemble

fn ensemble_idempotence() -> Outcome {
    let xs: Vec<DetectionExample> = {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        (0..200).map(|i| random_example(&mut rng, i)).collect()
    };
    let cfg = DetectionConfig::default();
    let run = score_corpus(&xs, &cfg, &MockScorer::seeded(11), None).map_err(|e| e.to_string())?;
    let file = to_jsonl(&run.records);
    for k in [1usize, 2, 5] {
        let copies: Vec<Vec<PredictionRecord>> = (0..k)
            .map(|_| read_records(Cursor::new(&file)).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        let merged = ensemble_runs(&copies, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            to_jsonl(&merged) == file,
            "k={k}: output differs from input"
        );
        for (m, r) in merged.iter().zip(&run.records) {
            ensure!(
                m.pair_scores
                    .iter()
                    .zip(&r.pair_scores)
                    .all(|(a, b)| a.to_bits() == b.to_bits()),
                "k={k}: {} pair scores not bit-identical",
                m.id
            );
        }
    }
    Ok(format!(
        "{} records, k in {{1, 2, 5}} bit-identical",
        run.records.len()
    ))
}

// -------------------------------------------------------------- dataset

fn dataset_construction() -> Outcome {
    let labeled: Vec<DetectionExample> = load("dataset/labeled_1889.jsonl");
    let pos = labeled
        .iter()
        .filter(|e| e.gold_label == Some(Label::Contradiction))
        .count();
    ensure!(
        (pos, labeled.len() - pos) == (453, 1436),
        "fixture has {pos}/{}",
        labeled.len() - pos
    );
    let balanced = balanced_sample(&labeled, 7).map_err(|e| e.to_string())?;
    let bpos = balanced
        .iter()
        .filter(|e| e.gold_label == Some(Label::Contradiction))
        .count();
    ensure!(
        (bpos, balanced.len() - bpos) == (453, 453),
        "balanced {bpos}/{}",
        balanced.len() - bpos
    );
    ensure!(
        balanced == balanced_sample(&labeled, 7).unwrap(),
        "same seed, different sample"
    );

    let raw: Vec<Dialogue> = load("dataset/raw_600.jsonl");
    let merged = merge_overlapping(&raw);
    ensure!(
        merged.len() == 507,
        "merge kept {} of {}",
        merged.len(),
        raw.len()
    );
    ensure!(
        merge_overlapping(&merged) == merged,
        "merge is not idempotent"
    );
    let cuts = prefix_cut_corpus(&merged);
    ensure!(
        cuts.len() == 1889,
        "fixture cut into {} examples",
        cuts.len()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for c in 0..50 {
        let corpus: Vec<Dialogue> = (0..rng.random_range(0..40))
            .map(|i| Dialogue::new(format!("c{c}.{i}"), random_example(&mut rng, i).turns))
            .collect();
        let bot_turns: usize = corpus.iter().map(|d| d.bot_turn_indices().len()).sum();
        let cuts = prefix_cut_corpus(&corpus);
        ensure!(
            cuts.len() == bot_turns,
            "generated corpus {c}: {} cuts vs {bot_turns} bot turns",
            cuts.len()
        );
        for d in &corpus {
            for cut in prefix_cut(d) {
                ensure!(
                    cut.turns.last().is_some_and(|t| t.is_bot()),
                    "cut {} not bot-terminated",
                    cut.id
                );
                ensure!(
                    d.turns.starts_with(&cut.turns),
                    "cut {} is not a prefix",
                    cut.id
                );
            }
        }
    }

    let v = |label: bool, ev: &[usize]| {
        AnnotationVote::new("w", Label::from(label), ev.iter().copied())
    };
    let unanimous = adjudicate(&[v(true, &[1]), v(true, &[1]), v(true, &[1])], None, None).unwrap();
    ensure!(
        unanimous
            == AdjudicationState::Finalized {
                label: Label::Contradiction,
                evidence: EvidenceSet::from([1])
            },
        "unanimous round 1 gave {unanimous:?}"
    );
    let split = [v(true, &[1]), v(true, &[1]), v(false, &[])];
    let escalated = adjudicate(&split, None, None).unwrap();
    ensure!(
        escalated == AdjudicationState::EscalatedRound2,
        "split round 1 gave {escalated:?}"
    );
    let pending = adjudicate(&split, Some(&split), None).unwrap();
    ensure!(
        pending == AdjudicationState::NeedsAdjudication,
        "split round 2 gave {pending:?}"
    );

    Ok(
        "453/1436 -> 453/453; 600 -> 507 -> 1889 cuts; 50 generated corpora; 3 adjudication rules"
            .into(),
    )
}

// ----------------------------------------------------------- end to end

fn smoke_run(
    examples: &[DetectionExample],
    rules: &RuleTable,
    scorer: &dyn PairScorer,
) -> Result<DetectionEvalReport, String> {
    let cfg = DetectionConfig::default();
    let kind = RewriterKind::RuleTable(rules.clone());
    let rewritten = batch_rewrite(examples, &kind, 6, None).map_err(|e| e.to_string())?;
    let run = score_corpus(&rewritten, &cfg, scorer, None).map_err(|e| e.to_string())?;
    ensure!(run.is_complete(), "failures: {:?}", run.failures);
    evaluate(examples, &run.records, &cfg).map_err(|e| e.to_string())
}

fn end_to_end() -> Outcome {
    let started = Instant::now();
    let examples: Vec<DetectionExample> = load("smoke/examples.jsonl");
    ensure!(
        examples.len() == 20,
        "fixture has {} examples",
        examples.len()
    );
    let rules =
        RuleTable::parse_tsv(&std::fs::read_to_string(fixtures().join("smoke/rules.tsv")).unwrap())
            .map_err(|e| e.to_string())?;
    let first = smoke_run(&examples, &rules, &OverlapScorer)?;
    let second = smoke_run(&examples, &rules, &OverlapScorer)?;
    ensure!(first.to_json() == second.to_json(), "runs differ");
    let heads: Vec<&str> = first.columns().iter().map(|(h, _)| *h).collect();
    ensure!(
        heads == ["P/R/F1", "AUPR", "SE (P/R/F1)", "Joint-Acc."],
        "columns {heads:?}"
    );
    ensure!(first.aupr.is_some(), "AUPR missing");
    let table = first.to_string();
    ensure!(
        heads.iter().all(|h| table.contains(h)),
        "table lacks a column:\n{table}"
    );
    let mock = smoke_run(&examples, &rules, &MockScorer::default())?;
    ensure!(
        mock.to_json() == smoke_run(&examples, &rules, &MockScorer::default())?.to_json(),
        "mock runs differ"
    );
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    let cols: Vec<String> = first
        .columns()
        .iter()
        .map(|(h, v)| format!("{h} {v}"))
        .collect();
    Ok(format!("{} in {elapsed:.2?}", cols.join(", ")))
}

// -------------------------------------------------------------- gateway

fn gateway() -> Outcome {
    let server = support::MockServer::start(support::indexed_score_handler);
    let endpoint = Endpoint {
        batch_size: 100,
        backoff_base: Duration::from_millis(5),
        ..Endpoint::new(server.url())
    };
    let pairs: Vec<Pair> = (0..250).map(|i| Pair::new(format!("p{i}"), "h")).collect();
    let cache = ResponseCache::in_memory();

    let client = GatewayClient::new(endpoint.clone()).map_err(|e| e.to_string())?;
    let scores = client
        .score_pairs_cached(&pairs, Some(&cache))
        .map_err(|e| e.to_string())?;
    ensure!(
        server.request_count() == 3,
        "{} requests for 250 pairs",
        server.request_count()
    );
    let expected: Vec<f64> = (0..250).map(|i| i as f64 / 1000.0).collect();
    ensure!(scores == expected, "order not preserved across batches");

    let mut reordered = pairs.clone();
    reordered.reverse();
    let again = GatewayClient::new(Endpoint {
        batch_size: 7,
        ..endpoint.clone()
    })
    .map_err(|e| e.to_string())?;
    let scores = again
        .score_pairs_cached(&reordered, Some(&cache))
        .map_err(|e| e.to_string())?;
    ensure!(
        server.request_count() == 3,
        "cached rerun sent {} more requests",
        server.request_count() - 3
    );
    ensure!(
        scores.iter().rev().copied().eq(expected.iter().copied()),
        "cached order wrong"
    );

    let mixed: Vec<Pair> = (240..260)
        .map(|i| Pair::new(format!("p{i}"), "h"))
        .collect();
    let before = server.items_received();
    client
        .score_pairs_cached(&mixed, Some(&cache))
        .map_err(|e| e.to_string())?;
    ensure!(
        server.items_received() - before == 10,
        "sent {} items, 10 were uncached",
        server.items_received() - before
    );

    let hits = Arc::new(AtomicUsize::new(0));
    let h = hits.clone();
    let flaky = support::MockServer::start(move |req| {
        if h.fetch_add(1, Ordering::SeqCst) == 0 {
            support::Response::status(502, "")
        } else {
            support::indexed_score_handler(req)
        }
    });
    let c = GatewayClient::new(Endpoint {
        backoff_base: Duration::from_millis(5),
        ..Endpoint::new(flaky.url())
    })
    .map_err(|e| e.to_string())?;
    let got = c.score_pairs(&pairs[..3]).map_err(|e| e.to_string())?;
    ensure!(got == [0.0, 0.001, 0.002], "retry result {got:?}");
    let reqs = flaky.requests();
    ensure!(
        reqs.len() == 2 && reqs[0].body == reqs[1].body,
        "retry was not a byte-identical resend"
    );
    ensure!(c.stats().retries == 1, "stats {:?}", c.stats());
    Ok("250 pairs -> 3 requests in order; cached rerun 0 requests; partial cache sends misses only; 502 then success".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AUPR matches brute-force threshold sweep", aupr_oracle),
        (
            "restoration P/R/F matches naive enumeration",
            restoration_oracle,
        ),
        ("BLEU/ROUGE identity and hand cases", bleu_rouge_cases),
        ("SUB detection semantics", sub_semantics),
        ("ensemble idempotence", ensemble_idempotence),
        ("dataset construction", dataset_construction),
        ("end-to-end smoke", end_to_end),
        ("gateway batching, caching and retry", gateway),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut seen = BTreeSet::new();
    for (name, check) in criteria {
        assert!(seen.insert(name));
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
