//! Run configuration: defaults, then a flat `key=value` file, then flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::Args;
use dialcheck::detection::DEFAULT_ETA;
use dialcheck::gateway::Endpoint;
use dialcheck::rewriting::DEFAULT_MAX_CONTEXT;
use dialcheck::{DetectionConfig, DetectionMode};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    Mock,
    Overlap,
    Remote,
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(ScorerKind::Mock),
            "overlap" => Ok(ScorerKind::Overlap),
            "remote" => Ok(ScorerKind::Remote),
            other => Err(format!(
                "unknown scorer {other:?} (expected mock, overlap or remote)"
            )),
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::Mock => "mock",
            ScorerKind::Overlap => "overlap",
            ScorerKind::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewriterChoice {
    None,
    Identity,
    Rules,
    Remote,
}

impl FromStr for RewriterChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(RewriterChoice::None),
            "identity" => Ok(RewriterChoice::Identity),
            "rules" => Ok(RewriterChoice::Rules),
            "remote" => Ok(RewriterChoice::Remote),
            other => Err(format!(
                "unknown rewriter {other:?} (expected none, identity, rules or remote)"
            )),
        }
    }
}

impl fmt::Display for RewriterChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewriterChoice::None => "none",
            RewriterChoice::Identity => "identity",
            RewriterChoice::Rules => "rules",
            RewriterChoice::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub eta: f64,
    pub mode: DetectionMode,
    pub scorer: ScorerKind,
    pub rewriter: RewriterChoice,
    pub rules: Option<PathBuf>,
    pub max_context: usize,
    pub endpoint: String,
    /// Seconds.
    pub timeout: f64,
    pub max_retries: u32,
    /// Seconds.
    pub backoff_base: f64,
    pub batch_size: usize,
    pub seed: Option<u64>,
    pub cache: Option<PathBuf>,
    pub parallelism: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eta: DEFAULT_ETA,
            mode: DetectionMode::Sub,
            scorer: ScorerKind::Mock,
            rewriter: RewriterChoice::None,
            rules: None,
            max_context: DEFAULT_MAX_CONTEXT,
            endpoint: "http://127.0.0.1:8000".into(),
            timeout: 30.0,
            max_retries: 3,
            backoff_base: 0.5,
            batch_size: 32,
            seed: None,
            cache: None,
            parallelism: 4,
        }
    }
}

/// Settings shared by every subcommand. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat key=value config file (same keys as the flags below)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print the fully resolved configuration and exit
    #[arg(long, global = true)]
    pub print_config: bool,
    /// Contradiction threshold; a pair counts when its score is strictly above it
    #[arg(long, global = true, value_name = "ETA")]
    pub eta: Option<f64>,
    /// Pair construction: sub, sub-concat or unstructured
    #[arg(long, global = true)]
    pub mode: Option<DetectionMode>,
    /// Pair scorer: mock, overlap or remote
    #[arg(long, global = true)]
    pub scorer: Option<ScorerKind>,
    /// Bot-utterance rewriter: none, identity, rules or remote
    #[arg(long, global = true)]
    pub rewriter: Option<RewriterChoice>,
    /// Rule table (pattern<TAB>replacement per line) for --rewriter rules
    #[arg(long, global = true, value_name = "FILE")]
    pub rules: Option<PathBuf>,
    /// Most recent context turns given to the rewriter
    #[arg(long, global = true, value_name = "N")]
    pub max_context: Option<usize>,
    /// Base URL of the model service
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Per-request timeout in seconds
    #[arg(long, global = true, value_name = "SECS")]
    pub timeout: Option<f64>,
    /// Retries after a network error or 5xx response
    #[arg(long, global = true, value_name = "N")]
    pub max_retries: Option<u32>,
    /// First retry delay in seconds; doubles on each further retry
    #[arg(long, global = true, value_name = "SECS")]
    pub backoff_base: Option<f64>,
    /// Items per remote request
    #[arg(long, global = true, value_name = "N")]
    pub batch_size: Option<usize>,
    /// Seed for sampling and for seeded mock scores
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Append-only response cache file for remote calls
    #[arg(long, global = true, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    /// Remote requests in flight at once
    #[arg(long, global = true, value_name = "N")]
    pub parallelism: Option<usize>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: {e}"))
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Defaults, then `args.config` if given, then flags.
    pub fn resolve(args: &ConfigArgs) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            cfg.apply_file(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        }
        cfg.apply_flags(args);
        cfg.check().map_err(CliError::usage)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "eta" => self.eta = parse(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "scorer" => self.scorer = parse(key, value)?,
            "rewriter" => self.rewriter = parse(key, value)?,
            "rules" => self.rules = optional_path(value),
            "max_context" => self.max_context = parse(key, value)?,
            "endpoint" => self.endpoint = value.to_owned(),
            "timeout" => self.timeout = parse(key, value)?,
            "max_retries" => self.max_retries = parse(key, value)?,
            "backoff_base" => self.backoff_base = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => {
                self.seed = if value.is_empty() {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "cache" => self.cache = optional_path(value),
            "parallelism" => self.parallelism = parse(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn apply_flags(&mut self, a: &ConfigArgs) {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &a.$field {
                    self.$field = v.clone();
                }
            )*};
        }
        take!(
            eta,
            mode,
            scorer,
            rewriter,
            max_context,
            endpoint,
            timeout,
            max_retries,
            backoff_base,
            batch_size,
            parallelism
        );
        if a.rules.is_some() {
            self.rules = a.rules.clone();
        }
        if a.seed.is_some() {
            self.seed = a.seed;
        }
        if a.cache.is_some() {
            self.cache = a.cache.clone();
        }
    }

    fn check(&self) -> Result<(), String> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(format!("eta must be in (0, 1), got {}", self.eta));
        }
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(format!("timeout must be positive, got {}", self.timeout));
        }
        if !(self.backoff_base >= 0.0 && self.backoff_base.is_finite()) {
            return Err(format!(
                "backoff_base must be non-negative, got {}",
                self.backoff_base
            ));
        }
        Ok(())
    }

    pub fn detection(&self) -> DetectionConfig {
        DetectionConfig::new(self.mode, self.eta)
    }

    pub fn endpoint(&self) -> Endpoint {
        Endpoint {
            base_url: self.endpoint.clone(),
            timeout: Duration::from_secs_f64(self.timeout),
            max_retries: self.max_retries,
            backoff_base: Duration::from_secs_f64(self.backoff_base),
            batch_size: self.batch_size,
            parallelism: self.parallelism,
        }
    }

    pub fn rules_path(&self) -> Result<&Path, CliError> {
        self.rules
            .as_deref()
            .ok_or_else(|| CliError::usage("--rewriter rules needs --rules FILE"))
    }
}

/// The same format [`RunConfig::apply_file`] reads, so the output can be
/// saved and replayed.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        writeln!(f, "eta={}", self.eta)?;
        writeln!(f, "mode={}", self.mode)?;
        writeln!(f, "scorer={}", self.scorer)?;
        writeln!(f, "rewriter={}", self.rewriter)?;
        writeln!(f, "rules={}", path(&self.rules))?;
        writeln!(f, "max_context={}", self.max_context)?;
        writeln!(f, "endpoint={}", self.endpoint)?;
        writeln!(f, "timeout={}", self.timeout)?;
        writeln!(f, "max_retries={}", self.max_retries)?;
        writeln!(f, "backoff_base={}", self.backoff_base)?;
        writeln!(f, "batch_size={}", self.batch_size)?;
        writeln!(
            f,
            "seed={}",
            self.seed.map(|s| s.to_string()).unwrap_or_default()
        )?;
        writeln!(f, "cache={}", path(&self.cache))?;
        write!(f, "parallelism={}", self.parallelism)
    }
}
