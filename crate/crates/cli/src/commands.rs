use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use dialcheck::dataset::{
    adjudicate_votes, apply_adjudication, balanced_sample, merge_overlapping, prefix_cut_corpus,
    round2_proposal, AdjudicationState, AnnotationVote, Round, VoteRecord,
};
use dialcheck::detect_metrics::evaluate;
use dialcheck::detection::{ensemble_runs, score_corpus, RewriteStage};
use dialcheck::dialog::{validate_lines, RecordKind};
use dialcheck::gateway::{GatewayClient, ResponseCache};
use dialcheck::rewrite_metrics::evaluate_rewrites;
use dialcheck::rewriting::{
    batch_rewrite, corpus_jobs, fill_hypotheses, plan_jobs, RewriteJob, RewritePlan,
};
use dialcheck::{
    DetectionExample, Dialogue, MockScorer, OverlapScorer, PairScorer, PredictionRecord,
    RemoteScorer, RewriteExample, RewriterKind, RuleTable,
};
use serde_json::json;

use crate::config::{RewriterChoice, RunConfig, ScorerKind};
use crate::{io, CliError};

fn fail<E: Into<dialcheck::Error>>(e: E) -> CliError {
    CliError::from(e.into())
}

pub fn merge(input: &Path, out: &Path) -> Result<(), CliError> {
    let dialogues: Vec<Dialogue> = io::read(input)?;
    let merged = merge_overlapping(&dialogues);
    io::write(out, &merged)?;
    eprintln!("kept {} of {} dialogues", merged.len(), dialogues.len());
    Ok(())
}

pub fn cut(input: &Path, out: &Path) -> Result<(), CliError> {
    let dialogues: Vec<Dialogue> = io::read(input)?;
    let examples = prefix_cut_corpus(&dialogues);
    io::write(out, &examples)?;
    eprintln!(
        "{} dialogues -> {} examples",
        dialogues.len(),
        examples.len()
    );
    Ok(())
}

pub fn balance(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let examples: Vec<DetectionExample> = io::read(input)?;
    let sampled = balanced_sample(&examples, cfg.seed.unwrap_or(0)).map_err(fail)?;
    io::write(out, &sampled)?;
    eprintln!("{} of {} examples kept", sampled.len(), examples.len());
    Ok(())
}

fn read_votes(path: &Path) -> Result<Vec<VoteRecord>, CliError> {
    let bad = |msg: String| CliError::data(format!("{}: {msg}", path.display()));
    let file = File::open(path).map_err(|e| bad(e.to_string()))?;
    let mut votes = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        votes.push(serde_json::from_str(&line).map_err(|e| bad(format!("line {}: {e}", i + 1)))?);
    }
    Ok(votes)
}

pub fn adjudicate(
    input: &Path,
    votes: &Path,
    out: &Path,
    pending_out: Option<&Path>,
) -> Result<(), CliError> {
    let examples: Vec<DetectionExample> = io::read(input)?;
    let votes = read_votes(votes)?;
    let states = adjudicate_votes(&votes).map_err(fail)?;
    let known: std::collections::HashSet<&str> = examples.iter().map(|e| e.id.as_str()).collect();
    for (id, _) in &states {
        if !known.contains(id.as_str()) {
            log::warn!("votes for unknown example {id:?} ignored");
        }
    }
    let (done, pending) = apply_adjudication(&examples, &states).map_err(fail)?;
    io::write(out, &done)?;

    let mut round1: HashMap<&str, Vec<AnnotationVote>> = HashMap::new();
    for v in votes.iter().filter(|v| v.round == Round::First) {
        round1
            .entry(v.id.as_str())
            .or_default()
            .push(AnnotationVote {
                annotator_id: v.annotator_id.clone(),
                label: v.label,
                evidence: v.evidence.clone(),
            });
    }
    if let Some(path) = pending_out {
        let mut buf = Vec::new();
        for (id, state) in &pending {
            let mut line = json!({ "id": id, "state": state.to_string() });
            if *state == AdjudicationState::EscalatedRound2 {
                if let Some(r1) = round1.get(id.as_str()) {
                    line["proposed_evidence"] = json!(round2_proposal(r1));
                }
            }
            buf.extend_from_slice(line.to_string().as_bytes());
            buf.push(b'\n');
        }
        io::write_atomic(path, &buf)?;
    }
    let count = |s: &AdjudicationState| pending.iter().filter(|(_, p)| p == s).count();
    eprintln!(
        "{} finalized, {} escalated to round 2, {} need adjudication",
        done.len(),
        count(&AdjudicationState::EscalatedRound2),
        count(&AdjudicationState::NeedsAdjudication)
    );
    Ok(())
}

fn client(cfg: &RunConfig) -> Result<GatewayClient, CliError> {
    let client = GatewayClient::new(cfg.endpoint()).map_err(|e| CliError::remote(e.to_string()))?;
    let health = client
        .health()
        .map_err(|e| CliError::remote(format!("{}: health check failed: {e}", cfg.endpoint)))?;
    log::info!("service {} is {}", health.model_name, health.status);
    Ok(client)
}

fn open_cache(cfg: &RunConfig) -> Result<Option<ResponseCache>, CliError> {
    cfg.cache
        .as_ref()
        .map(|p| {
            ResponseCache::open(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))
        })
        .transpose()
}

fn rewriter(cfg: &RunConfig) -> Result<Option<RewriterKind>, CliError> {
    Ok(match cfg.rewriter {
        RewriterChoice::None => None,
        RewriterChoice::Identity => Some(RewriterKind::Identity),
        RewriterChoice::Rules => {
            let path = cfg.rules_path()?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            let table = RuleTable::parse_tsv(&text)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            Some(RewriterKind::RuleTable(table))
        }
        RewriterChoice::Remote => Some(RewriterKind::Remote(client(cfg)?)),
    })
}

fn report_stats(kind: &RewriterKind) {
    if let RewriterKind::Remote(c) = kind {
        let s = c.stats();
        eprintln!(
            "rewrite service: {} requests ({} retries), {} items sent, {} cache hits",
            s.requests, s.retries, s.items_sent, s.cache_hits
        );
    }
}

pub fn rewrite(
    cfg: &RunConfig,
    input: &Path,
    out: Option<&Path>,
    kind: RecordKind,
    dry_run: bool,
) -> Result<(), CliError> {
    if cfg.rewriter == RewriterChoice::None {
        return Err(CliError::usage(
            "rewrite needs --rewriter identity, rules or remote",
        ));
    }
    if dry_run {
        return dry_run_report(cfg, input, kind);
    }
    let out = out.expect("clap requires --out without --dry-run-report");
    let cache = open_cache(cfg)?;
    let rw = rewriter(cfg)?.expect("checked above");
    let cache = if rw.is_remote() { cache.as_ref() } else { None };
    match kind {
        RecordKind::Dialogue => {
            let xs: Vec<Dialogue> = io::read(input)?;
            io::write(
                out,
                &batch_rewrite(&xs, &rw, cfg.max_context, cache).map_err(fail)?,
            )?;
        }
        RecordKind::Detection => {
            let xs: Vec<DetectionExample> = io::read(input)?;
            io::write(
                out,
                &batch_rewrite(&xs, &rw, cfg.max_context, cache).map_err(fail)?,
            )?;
        }
        RecordKind::Rewrite => {
            let xs: Vec<RewriteExample> = io::read(input)?;
            io::write(
                out,
                &fill_hypotheses(&xs, &rw, cfg.max_context, cache).map_err(fail)?,
            )?;
        }
        RecordKind::Prediction => unreachable!("rejected by the argument parser"),
    }
    report_stats(&rw);
    Ok(())
}

fn dry_run_report(cfg: &RunConfig, input: &Path, kind: RecordKind) -> Result<(), CliError> {
    let jobs: Vec<RewriteJob> = match kind {
        RecordKind::Dialogue => corpus_jobs(&io::read::<Dialogue>(input)?, cfg.max_context),
        RecordKind::Detection => {
            corpus_jobs(&io::read::<DetectionExample>(input)?, cfg.max_context)
        }
        RecordKind::Rewrite => io::read::<RewriteExample>(input)?
            .iter()
            .map(|ex| RewriteJob::new(&ex.context, &ex.target, cfg.max_context))
            .collect(),
        RecordKind::Prediction => unreachable!("rejected by the argument parser"),
    };
    let plan = if cfg.rewriter == RewriterChoice::Remote {
        plan_jobs(&jobs, open_cache(cfg)?.as_ref())
    } else {
        // local rewriters never touch the network
        RewritePlan {
            to_send: 0,
            ..plan_jobs(&jobs, None)
        }
    };
    println!(
        "{}",
        json!({
            "rewriter": cfg.rewriter.to_string(),
            "utterances": plan.utterances,
            "unique_inputs": plan.unique_inputs,
            "cache_hits": plan.cache_hits,
            "to_send": plan.to_send,
        })
    );
    Ok(())
}

pub fn detect(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let examples: Vec<DetectionExample> = io::read(input)?;
    let scorer: Box<dyn PairScorer> = match cfg.scorer {
        ScorerKind::Mock => Box::new(MockScorer { seed: cfg.seed }),
        ScorerKind::Overlap => Box::new(OverlapScorer),
        ScorerKind::Remote => Box::new(RemoteScorer::new(client(cfg)?, open_cache(cfg)?)),
    };
    let rw = rewriter(cfg)?;
    let rewrite_cache = match &rw {
        Some(k) if k.is_remote() => open_cache(cfg)?,
        _ => None,
    };
    let stage = rw.as_ref().map(|kind| RewriteStage {
        kind,
        max_context: cfg.max_context,
        cache: rewrite_cache.as_ref(),
    });
    let run = score_corpus(&examples, &cfg.detection(), scorer.as_ref(), stage).map_err(fail)?;
    io::write(out, &run.records)?;
    if let Some(kind) = &rw {
        report_stats(kind);
    }
    eprintln!(
        "{} of {} examples scored",
        run.records.len(),
        examples.len()
    );
    if run.is_complete() {
        return Ok(());
    }
    for f in &run.failures {
        eprintln!("  {}: {}", f.id, f.message);
    }
    let msg = format!(
        "{} examples failed; partial predictions written",
        run.failures.len()
    );
    Err(if cfg.scorer == ScorerKind::Remote {
        CliError::remote(msg)
    } else {
        CliError::data(msg)
    })
}

pub fn ensemble(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let runs = inputs
        .iter()
        .map(|p| io::read::<PredictionRecord>(p))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = ensemble_runs(&runs, &cfg.detection()).map_err(fail)?;
    io::write(out, &merged)
}

fn emit_report(table: &str, json: String, json_path: Option<&Path>) -> Result<(), CliError> {
    println!("{table}");
    match json_path {
        Some(p) => io::write_atomic(p, format!("{json}\n").as_bytes()),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

pub fn eval_rewriting(input: &Path, n: usize, json: Option<&Path>) -> Result<(), CliError> {
    let examples: Vec<RewriteExample> = io::read(input)?;
    let report = evaluate_rewrites(&examples, n).map_err(fail)?;
    emit_report(&report.to_string(), report.to_json(), json)
}

pub fn eval_detection(
    cfg: &RunConfig,
    gold: &Path,
    pred: &Path,
    json: Option<&Path>,
) -> Result<(), CliError> {
    let gold: Vec<DetectionExample> = io::read(gold)?;
    let preds: Vec<PredictionRecord> = io::read(pred)?;
    let report = evaluate(&gold, &preds, &cfg.detection()).map_err(fail)?;
    emit_report(&report.to_string(), report.to_json(), json)
}

pub fn health(cfg: &RunConfig) -> Result<(), CliError> {
    let client = GatewayClient::new(cfg.endpoint()).map_err(|e| CliError::remote(e.to_string()))?;
    let h = client
        .health()
        .map_err(|e| CliError::remote(e.to_string()))?;
    println!(
        "{}",
        json!({ "status": h.status, "model_name": h.model_name })
    );
    Ok(())
}

pub fn validate(input: &Path, kind: RecordKind) -> Result<(), CliError> {
    let file =
        File::open(input).map_err(|e| CliError::data(format!("{}: {e}", input.display())))?;
    let problems = validate_lines(BufReader::new(file), kind)
        .map_err(|e| CliError::data(format!("{}: {e}", input.display())))?;
    for p in &problems {
        eprintln!("{}: {p}", input.display());
    }
    if problems.is_empty() {
        eprintln!("{}: ok", input.display());
        Ok(())
    } else {
        Err(CliError::data(format!(
            "{} problem(s) found",
            problems.len()
        )))
    }
}
