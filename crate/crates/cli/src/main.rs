//! `dialcheck`: batch workflows for dialogue contradiction detection.
//!
//! Exit codes: 0 success, 1 usage, 2 data validation, 3 remote failure.

mod commands;
mod config;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dialcheck::dialog::RecordKind;

use config::{ConfigArgs, RunConfig};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (wire protocol v1)");

#[derive(Debug, Parser)]
#[command(name = "dialcheck", version = VERSION, about = "Detect self-contradictions in bot dialogue", long_about = None)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build test sets: merge overlapping dialogues, cut, balance, adjudicate votes
    Dataset {
        #[command(subcommand)]
        op: DatasetOp,
    },
    /// Rewrite bot utterances to restore co-references and ellipsis
    Rewrite {
        /// Input records
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Output records (required unless --dry-run-report)
        #[arg(long, value_name = "FILE", required_unless_present = "dry_run_report")]
        out: Option<PathBuf>,
        /// Record type of the input: dialogue, detection or rewrite (fills `hypothesis`)
        #[arg(long, default_value = "detection", value_parser = parse_rewritable)]
        kind: RecordKind,
        /// Print what would be sent to the service, as JSON, and exit
        #[arg(long)]
        dry_run_report: bool,
    },
    /// Score detection examples and write one prediction per example
    Detect {
        /// Detection examples, each ending in a bot turn
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Predictions
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Average several prediction files over the same examples
    Ensemble {
        /// Prediction files, in the same example order (repeat the flag)
        #[arg(long = "in", value_name = "FILE", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score rewrites or detections; prints a table and a JSON report
    Eval {
        #[command(subcommand)]
        target: EvalTarget,
    },
    /// Query the model service's health endpoint
    Health,
    /// Check a record file and list every problem
    Validate {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// dialogue, detection, rewrite or prediction
        #[arg(long)]
        kind: RecordKind,
    },
}

#[derive(Debug, Subcommand)]
enum DatasetOp {
    /// Drop one-exchange dialogues and dialogues that prefix another
    Merge {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Cut each dialogue into one detection example per bot turn
    Cut {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Keep all positives and an equal seeded sample of negatives
    Balance {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Apply two-round vote aggregation to unlabeled detection examples
    Adjudicate {
        /// Detection examples to label
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Votes: {"id","round":1|2|"adjudicator","annotator_id","label","evidence"} per line
        #[arg(long, value_name = "FILE")]
        votes: PathBuf,
        /// Finalized, labeled examples
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Examples still needing a vote round or an adjudicator
        #[arg(long, value_name = "FILE")]
        pending: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum EvalTarget {
    /// BLEU, ROUGE-1/L, exact match, restoration F1 and change rate
    Rewriting {
        /// Rewrite examples with `hypothesis` filled in
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// N-gram order of the restoration score
        #[arg(long, default_value_t = dialcheck::rewrite_metrics::DEFAULT_RESTORATION_N, value_parser = parse_order)]
        restoration_n: usize,
        /// Write the JSON report here instead of standard output
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// P/R/F1, AUPR, evidence P/R/F1 and joint accuracy
    Detection {
        /// Labeled detection examples
        #[arg(long, value_name = "FILE")]
        gold: PathBuf,
        /// Predictions
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        /// Write the JSON report here instead of standard output
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
}

fn parse_order(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("order must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_rewritable(s: &str) -> Result<RecordKind, String> {
    match s.parse()? {
        RecordKind::Prediction => Err("predictions have no utterances to rewrite".into()),
        kind => Ok(kind),
    }
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn remote(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<dialcheck::Error> for CliError {
    fn from(e: dialcheck::Error) -> Self {
        if e.is_remote() {
            CliError::remote(e.to_string())
        } else {
            CliError::data(e.to_string())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.config)?;
    if cli.config.print_config {
        println!("{cfg}");
        return Ok(());
    }
    match cli.command {
        Command::Dataset { op } => match op {
            DatasetOp::Merge { input, out } => commands::merge(&input, &out),
            DatasetOp::Cut { input, out } => commands::cut(&input, &out),
            DatasetOp::Balance { input, out } => commands::balance(&cfg, &input, &out),
            DatasetOp::Adjudicate {
                input,
                votes,
                out,
                pending,
            } => commands::adjudicate(&input, &votes, &out, pending.as_deref()),
        },
        Command::Rewrite {
            input,
            out,
            kind,
            dry_run_report,
        } => commands::rewrite(&cfg, &input, out.as_deref(), kind, dry_run_report),
        Command::Detect { input, out } => commands::detect(&cfg, &input, &out),
        Command::Ensemble { inputs, out } => commands::ensemble(&cfg, &inputs, &out),
        Command::Eval { target } => match target {
            EvalTarget::Rewriting {
                input,
                restoration_n,
                json,
            } => commands::eval_rewriting(&input, restoration_n, json.as_deref()),
            EvalTarget::Detection { gold, pred, json } => {
                commands::eval_detection(&cfg, &gold, &pred, json.as_deref())
            }
        },
        Command::Health => commands::health(&cfg),
        Command::Validate { input, kind } => commands::validate(&input, kind),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
