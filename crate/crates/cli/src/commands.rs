use std::collections::BTreeMap;
use std::io::{self, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use serde::Serialize;

use currsched_core::corpus::{load_bitext, Corpus, FreqTables};
use currsched_core::difficulty::{
    load_difficulty_file, load_one_best_scores, score_sentence_length, score_word_freq_rank,
};
use currsched_core::pipeline::{pump, run_observed, BatchStream, StreamEvent};
use currsched_core::protocol::{event_line, write_event};
use currsched_core::schedule::{plan, ScheduleKind};
use currsched_core::sharding::{assign_shards, gvf, random_shards, ShardSet};
use currsched_core::synth::{toy_bitext, toy_one_best};
use currsched_core::{Criterion, CriterionKind, DifficultyVector, MockLearner, RankMode};

use crate::config::RunConfig;
use crate::CliError;

/// What a command reports back to `main`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub run_dir: Option<PathBuf>,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(run_dir: Option<PathBuf>) -> Self {
        Outcome {
            run_dir,
            exit_code: 0,
        }
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    Ok(load_bitext(require(&cfg.src, "src")?, require(&cfg.tgt, "tgt")?)?)
}

/// Checks that every criterion has the inputs it needs before any work.
fn check_inputs(cfg: &RunConfig, criteria: &[Criterion]) -> Result<(), CliError> {
    for c in criteria {
        if matches!(c.kind, CriterionKind::OneBest | CriterionKind::External) && cfg.scores.is_none() {
            return Err(CliError::Usage(format!("criterion {c} needs --scores")));
        }
    }
    Ok(())
}

fn compute_scores(
    corpus: &Corpus,
    criterion: Criterion,
    cfg: &RunConfig,
    tables: &mut Option<FreqTables>,
) -> Result<DifficultyVector, CliError> {
    let scores = match criterion.kind {
        CriterionKind::SentLen => score_sentence_length(corpus, criterion.scope),
        CriterionKind::MaxWfr | CriterionKind::AvgWfr => {
            if tables.is_none() {
                *tables = Some(FreqTables::build(corpus)?);
            }
            let mode = if criterion.kind == CriterionKind::MaxWfr {
                RankMode::Max
            } else {
                RankMode::Avg
            };
            score_word_freq_rank(corpus, criterion.scope, mode, tables.as_ref().unwrap())?
        }
        CriterionKind::OneBest => load_one_best_scores(require(&cfg.scores, "scores")?, corpus)?,
        CriterionKind::External => load_difficulty_file(require(&cfg.scores, "scores")?, corpus)?,
    };
    Ok(scores)
}

fn prepare_run_dir(cfg: &RunConfig) -> Result<Option<PathBuf>, CliError> {
    let Some(dir) = cfg.run_dir() else {
        return Ok(None);
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_file(&dir.join("config.json"), cfg.to_json().as_bytes())?;
    Ok(Some(dir))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s.into_bytes()
}

#[derive(Serialize)]
struct ScoreSummary {
    n: usize,
    min: f64,
    max: f64,
    mean: f64,
}

/// Writes `scores.<criterion>.txt` per criterion and `score_summary.json`.
pub fn cmd_score(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let criteria = cfg.criteria()?;
    check_inputs(cfg, &criteria)?;
    let corpus = load_corpus(cfg)?;
    let dir = prepare_run_dir(cfg)?.ok_or_else(|| CliError::Usage("score needs --out".into()))?;
    let mut tables = None;
    let mut summary = BTreeMap::new();
    for criterion in criteria {
        let scores = compute_scores(&corpus, criterion, cfg, &mut tables)?;
        let path = dir.join(format!("scores.{}.txt", criterion.slug()));
        scores.save(&path)?;
        let v = scores.values();
        summary.insert(
            criterion.to_string(),
            ScoreSummary {
                n: v.len(),
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean: v.iter().sum::<f64>() / v.len() as f64,
            },
        );
    }
    write_file(&dir.join("score_summary.json"), &pretty(&summary))?;
    Ok(Outcome::ok(Some(dir)))
}

/// Shards for the configured criterion: Jenks breaks, or a random split for
/// the baseline schedule.
fn build_shards(cfg: &RunConfig, corpus: &Corpus) -> Result<(ShardSet, Option<DifficultyVector>), CliError> {
    if cfg.schedule_kind()? == ScheduleKind::Baseline {
        return Ok((random_shards(corpus.len(), cfg.k, cfg.seed)?, None));
    }
    let criterion = cfg.criterion()?;
    check_inputs(cfg, &[criterion])?;
    let scores = compute_scores(corpus, criterion, cfg, &mut None)?;
    let shards = assign_shards(&scores, cfg.k).map_err(|e| CliError::Data(format!("criterion {criterion}: {e}")))?;
    Ok((shards, Some(scores)))
}

#[derive(Serialize)]
struct ShardReport {
    criterion: String,
    k: usize,
    upper_bounds: Vec<f64>,
    shard_sizes: Vec<usize>,
    gvf: f64,
}

/// Writes `shard_report.json` and `shards.txt` (one shard index per line).
pub fn cmd_shard(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let criterion = cfg.criterion()?;
    check_inputs(cfg, &[criterion])?;
    let corpus = load_corpus(cfg)?;
    let dir = prepare_run_dir(cfg)?.ok_or_else(|| CliError::Usage("shard needs --out".into()))?;
    let scores = compute_scores(&corpus, criterion, cfg, &mut None)?;
    let shards = assign_shards(&scores, cfg.k).map_err(|e| CliError::Data(format!("criterion {criterion}: {e}")))?;
    let breaks = shards.breaks().expect("Jenks shards carry breaks");
    let report = ShardReport {
        criterion: criterion.to_string(),
        k: cfg.k,
        upper_bounds: breaks.upper_bounds().to_vec(),
        shard_sizes: shards.sizes(),
        gvf: gvf(scores.values(), breaks),
    };
    write_file(&dir.join("shard_report.json"), &pretty(&report))?;
    write_file(&dir.join("shards.txt"), shards.assignment_text().as_bytes())?;
    Ok(Outcome::ok(Some(dir)))
}

/// Phase-by-phase dry run as JSONL, to `<run dir>/plan.jsonl` or `out`.
pub fn cmd_plan(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let corpus = load_corpus(cfg)?;
    let (shards, _) = build_shards(cfg, &corpus)?;
    let records = plan(cfg.schedule_kind()?, &shards.sizes(), cfg.horizon, cfg.seed, cfg.reduce_removals);
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).expect("plan record serialises"));
        text.push('\n');
    }
    let dir = prepare_run_dir(cfg)?;
    match &dir {
        Some(d) => write_file(&d.join("plan.jsonl"), text.as_bytes())?,
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?,
    }
    Ok(Outcome::ok(dir))
}

/// Batch record without tokens, for the simulate stream log.
fn id_line(event: &StreamEvent, corpus: &Corpus) -> String {
    match event {
        StreamEvent::Batch(b) => serde_json::to_string(b).expect("batch serialises"),
        other => event_line(other, corpus),
    }
}

/// Full training loop against the mock learner. Writes `log.json`,
/// `learning_curve.csv` and `stream.jsonl` (batch records without tokens).
/// Exit code 0 on convergence, 4 when `max_batches` stopped the run.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let corpus = load_corpus(cfg)?;
    let (shards, _) = build_shards(cfg, &corpus)?;
    let dir = prepare_run_dir(cfg)?.ok_or_else(|| CliError::Usage("simulate needs --out".into()))?;
    let mut learner = MockLearner::new(cfg.seed);
    if let Some(p) = cfg.plateau {
        learner = learner.with_plateau(p);
    }
    let mut stream_log = String::new();
    let log = run_observed(&corpus, &shards, &cfg.trainer()?, &mut learner, |event| {
        stream_log.push_str(&id_line(event, &corpus));
        stream_log.push('\n');
        Ok(())
    })?;
    write_file(&dir.join("stream.jsonl"), stream_log.as_bytes())?;
    write_file(&dir.join("log.json"), &pretty(&log))?;
    write_file(&dir.join("learning_curve.csv"), log.learning_curve_csv().as_bytes())?;
    Ok(Outcome {
        run_dir: Some(dir),
        exit_code: if log.summary.converged { 0 } else { crate::EXIT_CAP_REACHED },
    })
}

/// Streams the batch protocol to `<run dir>/stream.jsonl` or `out` until
/// `max_batches` or until the reader goes away. A broken pipe ends the
/// stream cleanly with a summary on `diag`.
pub fn cmd_stream(cfg: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> Result<Outcome, CliError> {
    let corpus = load_corpus(cfg)?;
    let (shards, _) = build_shards(cfg, &corpus)?;
    let trainer = cfg.trainer()?;
    let stream = BatchStream::new(&corpus, &shards, &trainer)?;
    let dir = prepare_run_dir(cfg)?;
    let mut file;
    let sink: &mut dyn Write = match &dir {
        Some(d) => {
            let path = d.join("stream.jsonl");
            file = io::BufWriter::new(std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?);
            &mut file
        }
        None => out,
    };

    let mut batches = 0u64;
    let mut failure: Option<io::Error> = None;
    pump(stream, 64, |event| {
        if let StreamEvent::Batch(_) = event {
            batches += 1;
        }
        let done = matches!(event, StreamEvent::End { .. });
        let written = write_event(&mut *sink, &event, &corpus).and_then(|_| {
            if done {
                sink.flush()
            } else {
                Ok(())
            }
        });
        match written {
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
            Ok(()) => ControlFlow::Continue(()),
        }
    });
    match failure {
        Some(e) if e.kind() == io::ErrorKind::BrokenPipe => {
            let _ = writeln!(diag, "stream closed by reader after {batches} batches");
        }
        Some(e) => return Err(CliError::io("<stream>", e)),
        None => {
            sink.flush().map_err(|e| CliError::io("<stream>", e))?;
            let _ = writeln!(diag, "streamed {batches} batches");
        }
    }
    Ok(Outcome::ok(dir))
}

/// Writes a synthetic bitext (`toy.src`, `toy.tgt`) and matching one-best
/// probabilities (`toy.onebest`) into `dir`.
pub fn cmd_gen_toy(dir: &Path, n: usize, vocab: usize, seed: u64) -> Result<(), CliError> {
    if n == 0 || vocab < 2 {
        return Err(CliError::Usage("need n >= 1 and vocab >= 2".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let (src, tgt) = toy_bitext(n, vocab, seed);
    let lens: Vec<usize> = src.lines().map(|l| l.split(' ').count()).collect();
    let probs: String = toy_one_best(&lens, seed).iter().map(|p| format!("{p}\n")).collect();
    write_file(&dir.join("toy.src"), src.as_bytes())?;
    write_file(&dir.join("toy.tgt"), tgt.as_bytes())?;
    write_file(&dir.join("toy.onebest"), probs.as_bytes())?;
    Ok(())
}
