//! Effective run configuration: defaults, then a JSON config file, then flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use currsched_core::pipeline::TrainerConfig;
use currsched_core::schedule::{ScheduleKind, DEFAULT_REDUCE_REMOVALS};
use currsched_core::Criterion;

use crate::CliError;

/// Everything a command needs; serialisable so a run can be replayed from
/// its persisted `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub src: Option<PathBuf>,
    pub tgt: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub criterion: String,
    pub k: usize,
    pub schedule: String,
    pub seed: u64,
    #[serde(alias = "word-budget")]
    pub word_budget: usize,
    #[serde(alias = "update-freq")]
    pub update_freq: u64,
    #[serde(alias = "checkpoint-freq")]
    pub checkpoint_freq: u64,
    pub patience: u64,
    #[serde(alias = "max-batches")]
    pub max_batches: Option<u64>,
    #[serde(alias = "bucket-width")]
    pub bucket_width: usize,
    #[serde(alias = "reduce-removals")]
    pub reduce_removals: usize,
    pub horizon: usize,
    pub plateau: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainerConfig::default();
        RunConfig {
            src: None,
            tgt: None,
            scores: None,
            criterion: "avg_wfr:src".into(),
            k: t.k,
            schedule: t.schedule.to_string(),
            seed: t.seed,
            word_budget: t.word_budget,
            update_freq: t.update_freq_batches,
            checkpoint_freq: t.checkpoint_freq_batches,
            patience: t.patience_checkpoints,
            max_batches: t.max_batches,
            bucket_width: t.bucket_width,
            reduce_removals: DEFAULT_REDUCE_REMOVALS,
            horizon: 10,
            plateau: None,
            out: None,
        }
    }
}

/// Command-line overrides; every flag is optional.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON config file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source side, one tokenised sentence per line.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Target side, line-aligned with --src.
    #[arg(long)]
    pub tgt: Option<PathBuf>,
    /// One-best probabilities (criterion one_best) or raw difficulties (criterion file).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Difficulty criterion `kind:side`; `score` accepts a comma-separated list.
    #[arg(long)]
    pub criterion: Option<String>,
    /// Number of shards.
    #[arg(long)]
    pub k: Option<usize>,
    /// default, reverse, boost, reduce, noshuffle or baseline.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum source+target tokens per batch.
    #[arg(long)]
    pub word_budget: Option<usize>,
    /// Batches per curriculum phase.
    #[arg(long)]
    pub update_freq: Option<u64>,
    /// Batches between checkpoints.
    #[arg(long)]
    pub checkpoint_freq: Option<u64>,
    /// Checkpoints without improvement before stopping.
    #[arg(long)]
    pub patience: Option<u64>,
    #[arg(long)]
    pub max_batches: Option<u64>,
    #[arg(long)]
    pub bucket_width: Option<usize>,
    /// Shards `reduce` removes before adding them back.
    #[arg(long)]
    pub reduce_removals: Option<usize>,
    /// Phases covered by `plan`.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Mock learner stops improving after this many distinct samples.
    #[arg(long)]
    pub plateau: Option<usize>,
    /// Output root; artifacts go to `<out>/<config hash>/`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    /// Resolves flags over the config file over defaults.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load_config_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            )*};
        }
        set!(src, tgt, scores, criterion, k, schedule, seed, word_budget, update_freq);
        set!(checkpoint_freq, patience, max_batches, bucket_width, reduce_removals, horizon, plateau, out);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.schedule_kind()?;
        self.criteria()?;
        self.trainer()?.validate().map_err(CliError::from)?;
        if self.horizon == 0 {
            return Err(CliError::Usage("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule_kind(&self) -> Result<ScheduleKind, CliError> {
        self.schedule
            .parse()
            .map_err(CliError::from)
    }

    pub fn criteria(&self) -> Result<Vec<Criterion>, CliError> {
        self.criterion
            .split(',')
            .map(|c| {
                c.trim()
                    .parse()
                    .map_err(CliError::from)
            })
            .collect()
    }

    /// The single criterion used by shard/plan/simulate/stream.
    pub fn criterion(&self) -> Result<Criterion, CliError> {
        match self.criteria()?.as_slice() {
            [one] => Ok(*one),
            _ => Err(CliError::Usage("this command takes exactly one --criterion".into())),
        }
    }

    pub fn trainer(&self) -> Result<TrainerConfig, CliError> {
        Ok(TrainerConfig {
            schedule: self.schedule_kind()?,
            k: self.k,
            word_budget: self.word_budget,
            update_freq_batches: self.update_freq,
            checkpoint_freq_batches: self.checkpoint_freq,
            patience_checkpoints: self.patience,
            bucket_width: self.bucket_width,
            reduce_removals: self.reduce_removals,
            seed: self.seed,
            max_batches: self.max_batches,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    /// First 16 hex digits of the SHA-256 of the persisted config.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        format!("{digest:x}")[..16].to_owned()
    }

    /// `<out>/<hash>`, if an output root is set.
    pub fn run_dir(&self) -> Option<PathBuf> {
        self.out.as_ref().map(|o| o.join(self.hash()))
    }
}
