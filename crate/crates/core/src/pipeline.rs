//! From shards and a schedule to a deterministic batch stream.
//!
//! A phase lasts exactly `update_freq_batches` batches. Each pass over the
//! visible shards draws a fresh shard order and fresh within-shard shuffles
//! from a generator seeded by `(seed, phase, pass)`; within a shard, samples
//! are bucketed by length and buckets are filled greedily up to the word
//! budget. Passes repeat until the phase is full.

use std::collections::{BTreeMap, VecDeque};
use std::ops::ControlFlow;
use std::sync::mpsc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::learner::Learner;
use crate::rng::{rng_for, tag};
use crate::schedule::{order_shards, CurriculumState, ScheduleKind, DEFAULT_REDUCE_REMOVALS};
use crate::sharding::ShardSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub schedule: ScheduleKind,
    pub k: usize,
    pub word_budget: usize,
    pub update_freq_batches: u64,
    pub checkpoint_freq_batches: u64,
    pub patience_checkpoints: u64,
    pub bucket_width: usize,
    pub reduce_removals: usize,
    pub seed: u64,
    pub max_batches: Option<u64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            schedule: ScheduleKind::Default,
            k: 5,
            word_budget: 4096,
            update_freq_batches: 1000,
            checkpoint_freq_batches: 1000,
            patience_checkpoints: 32,
            bucket_width: 10,
            reduce_removals: DEFAULT_REDUCE_REMOVALS,
            seed: 0,
            max_batches: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k as u64),
            ("word_budget", self.word_budget as u64),
            ("update_freq_batches", self.update_freq_batches),
            ("checkpoint_freq_batches", self.checkpoint_freq_batches),
            ("patience_checkpoints", self.patience_checkpoints),
            ("bucket_width", self.bucket_width as u64),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.max_batches == Some(0) {
            return Err(Error::InvalidArgument("max_batches must be positive".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> CurriculumState {
        CurriculumState::with_reduce_removals(self.schedule, self.k, self.seed, self.reduce_removals)
    }
}

/// Samples of one shard whose bucketing length lies in `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bucket {
    pub shard: usize,
    pub lo: usize,
    pub hi: usize,
    pub ids: Vec<usize>,
}

/// Groups `ids` into fixed-width length buckets, ascending by range. Members
/// keep their relative order from `ids`; empty buckets are omitted.
pub fn bucket_by_length(shard: usize, ids: &[usize], corpus: &Corpus, width: usize) -> Vec<Bucket> {
    assert!(width >= 1, "bucket width must be positive");
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &id in ids {
        groups
            .entry(corpus[id].bucket_len() / width)
            .or_default()
            .push(id);
    }
    groups
        .into_iter()
        .map(|(slot, ids)| Bucket {
            shard,
            lo: slot * width,
            hi: (slot + 1) * width,
            ids,
        })
        .collect()
}

/// Greedy word-budget packing of one bucket. A batch closes when the next
/// sample would push it over budget; a lone oversized sample forms its own
/// batch.
pub fn fill_batches(ids: &[usize], corpus: &Corpus, budget: usize) -> Vec<(Vec<usize>, usize)> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut words = 0;
    for &id in ids {
        let wc = corpus[id].word_count();
        if !cur.is_empty() && words + wc > budget {
            out.push((std::mem::take(&mut cur), words));
            words = 0;
        }
        cur.push(id);
        words += wc;
    }
    if !cur.is_empty() {
        out.push((cur, words));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub batch_id: u64,
    pub phase: usize,
    pub shard: usize,
    pub sample_ids: Vec<usize>,
    pub word_count: usize,
}

/// One full pass over the visible multiset at the state's phase.
///
/// The shard order respects `state.prev_last_shard`. Batch ids are numbered
/// from `first_batch_id`.
pub fn pass_batches(
    state: &CurriculumState,
    shards: &ShardSet,
    corpus: &Corpus,
    config: &TrainerConfig,
    pass: u64,
    first_batch_id: u64,
) -> Vec<Batch> {
    let mut rng = rng_for(config.seed, &[tag::PASS, state.phase as u64, pass]);
    let order = order_shards(state, &mut rng);
    let mut batches = Vec::new();
    let mut next_id = first_batch_id;
    for shard in order {
        let mut ids = shards.shard(shard).to_vec();
        ids.shuffle(&mut rng);
        for bucket in bucket_by_length(shard, &ids, corpus, config.bucket_width) {
            for (sample_ids, word_count) in fill_batches(&bucket.ids, corpus, config.word_budget) {
                batches.push(Batch {
                    batch_id: next_id,
                    phase: state.phase,
                    shard,
                    sample_ids,
                    word_count,
                });
                next_id += 1;
            }
        }
    }
    batches
}

/// Exactly `update_freq_batches` batches for the current phase, repeating
/// passes as needed. Leaves `state.prev_last_shard` at the shard of the last
/// batch emitted.
pub fn emit_phase_batches(
    state: &mut CurriculumState,
    shards: &ShardSet,
    corpus: &Corpus,
    config: &TrainerConfig,
    first_batch_id: u64,
) -> Vec<Batch> {
    let want = config.update_freq_batches as usize;
    let mut out: Vec<Batch> = Vec::with_capacity(want);
    let mut pass = 0;
    while out.len() < want {
        let next_id = first_batch_id + out.len() as u64;
        let mut batches = pass_batches(state, shards, corpus, config, pass, next_id);
        batches.truncate(want - out.len());
        state.prev_last_shard = batches.last().map(|b| b.shard);
        out.extend(batches);
        pass += 1;
    }
    out
}

/// Items of the batch stream, in delivery order.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    Batch(Batch),
    /// Emitted after every `checkpoint_freq_batches` batches.
    Checkpoint { checkpoint: u64, batches: u64 },
    /// Emitted after every `update_freq_batches` batches; carries the new phase.
    PhaseAdvance {
        phase: usize,
        visible: Vec<usize>,
        batches: u64,
    },
    End { batches: u64, reason: EndReason },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Converged,
    MaxBatches,
}

/// Lazy, unbounded (or `max_batches`-capped) stream of batches and control
/// events. A checkpoint event precedes the phase advance when both fall on
/// the same batch.
pub struct BatchStream<'a> {
    corpus: &'a Corpus,
    shards: &'a ShardSet,
    config: TrainerConfig,
    state: CurriculumState,
    pending: VecDeque<Batch>,
    events: VecDeque<StreamEvent>,
    emitted: u64,
    finished: bool,
}

impl<'a> BatchStream<'a> {
    pub fn new(corpus: &'a Corpus, shards: &'a ShardSet, config: &TrainerConfig) -> Result<Self> {
        config.validate()?;
        if shards.k() != config.k {
            return Err(Error::InvalidArgument(format!(
                "shard set has {} shards but config.k = {}",
                shards.k(),
                config.k
            )));
        }
        if shards.num_samples() != corpus.len() {
            return Err(Error::InvalidArgument(format!(
                "shard set covers {} samples but corpus has {}",
                shards.num_samples(),
                corpus.len()
            )));
        }
        Ok(BatchStream {
            corpus,
            shards,
            config: config.clone(),
            state: config.initial_state(),
            pending: VecDeque::new(),
            events: VecDeque::new(),
            emitted: 0,
            finished: false,
        })
    }

    pub fn state(&self) -> &CurriculumState {
        &self.state
    }

    pub fn batches_emitted(&self) -> u64 {
        self.emitted
    }

    fn produce(&mut self) {
        if self.config.max_batches == Some(self.emitted) {
            self.events.push_back(StreamEvent::End {
                batches: self.emitted,
                reason: EndReason::MaxBatches,
            });
            self.finished = true;
            return;
        }
        if self.pending.is_empty() {
            let batches = emit_phase_batches(
                &mut self.state,
                self.shards,
                self.corpus,
                &self.config,
                self.emitted,
            );
            self.pending.extend(batches);
        }
        let batch = self.pending.pop_front().expect("phase batches are never empty");
        self.emitted += 1;
        self.events.push_back(StreamEvent::Batch(batch));
        if self.emitted % self.config.checkpoint_freq_batches == 0 {
            self.events.push_back(StreamEvent::Checkpoint {
                checkpoint: self.emitted / self.config.checkpoint_freq_batches,
                batches: self.emitted,
            });
        }
        if self.emitted % self.config.update_freq_batches == 0 {
            debug_assert!(self.pending.is_empty());
            self.state.advance_phase();
            self.events.push_back(StreamEvent::PhaseAdvance {
                phase: self.state.phase,
                visible: self.state.visible.clone(),
                batches: self.emitted,
            });
        }
    }
}

impl Iterator for BatchStream<'_> {
    type Item = StreamEvent;

    fn next(&mut self) -> Option<StreamEvent> {
        if self.events.is_empty() && !self.finished {
            self.produce();
        }
        self.events.pop_front()
    }
}

/// Runs `stream` on a producer thread feeding a bounded queue of `capacity`
/// events; `consume` runs on the calling thread in stream order. Returning
/// `Break` from `consume` stops the producer.
pub fn pump<I, F>(stream: I, capacity: usize, mut consume: F)
where
    I: Iterator<Item = StreamEvent> + Send,
    F: FnMut(StreamEvent) -> ControlFlow<()>,
{
    let (tx, rx) = mpsc::sync_channel(capacity.max(1));
    std::thread::scope(|scope| {
        scope.spawn(move || {
            for event in stream {
                if tx.send(event).is_err() {
                    break;
                }
            }
        });
        for event in rx.iter() {
            if consume(event).is_break() {
                break;
            }
        }
        // Dropping the receiver here unblocks a producer waiting on a full queue.
        drop(rx);
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchLogRecord {
    pub batch_id: u64,
    pub phase: usize,
    pub shard: usize,
    pub word_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub checkpoint: u64,
    pub batches: u64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub converged: bool,
    pub best_checkpoint: Option<u64>,
    pub best_metric: Option<f64>,
    pub total_batches: u64,
    pub final_phase: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub batches: Vec<BatchLogRecord>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub summary: Summary,
}

impl TrainingLog {
    /// Learning curve as CSV: `checkpoint,batches,metric`.
    pub fn learning_curve_csv(&self) -> String {
        let mut out = String::from("checkpoint,batches,metric\n");
        for c in &self.checkpoints {
            out.push_str(&format!("{},{},{}\n", c.checkpoint, c.batches, c.metric));
        }
        out
    }
}

/// Feeds the batch stream to `learner`, evaluating at every checkpoint, until
/// the metric (lower is better) fails to improve for `patience_checkpoints`
/// consecutive checkpoints or `max_batches` is reached.
pub fn run<L: Learner>(
    corpus: &Corpus,
    shards: &ShardSet,
    config: &TrainerConfig,
    learner: &mut L,
) -> Result<TrainingLog> {
    run_observed(corpus, shards, config, learner, |_| Ok(()))
}

/// [`run`], also handing every stream event to `observe` in order. The final
/// `End` event carries the stop reason.
pub fn run_observed<L, F>(
    corpus: &Corpus,
    shards: &ShardSet,
    config: &TrainerConfig,
    learner: &mut L,
    mut observe: F,
) -> Result<TrainingLog>
where
    L: Learner,
    F: FnMut(&StreamEvent) -> Result<()>,
{
    let mut stream = BatchStream::new(corpus, shards, config)?;
    let mut batches = Vec::new();
    let mut checkpoints = Vec::new();
    let mut best: Option<(u64, f64)> = None;
    let mut stale = 0u64;
    let mut last_batch_id = 0u64;
    let mut end = None;

    for event in stream.by_ref() {
        match &event {
            StreamEvent::Batch(batch) => {
                last_batch_id = batch.batch_id;
                learner
                    .consume_batch(batch)
                    .map_err(|e| Error::LearnerFailure {
                        batch_id: batch.batch_id,
                        message: e.to_string(),
                    })?;
                batches.push(BatchLogRecord {
                    batch_id: batch.batch_id,
                    phase: batch.phase,
                    shard: batch.shard,
                    word_count: batch.word_count,
                });
                observe(&event)?;
            }
            StreamEvent::Checkpoint {
                checkpoint,
                batches: seen,
            } => {
                observe(&event)?;
                let metric = learner.evaluate().map_err(|e| Error::LearnerFailure {
                    batch_id: last_batch_id,
                    message: e.to_string(),
                })?;
                checkpoints.push(CheckpointRecord {
                    checkpoint: *checkpoint,
                    batches: *seen,
                    metric,
                });
                match best {
                    Some((_, b)) if metric >= b => stale += 1,
                    _ => {
                        best = Some((*checkpoint, metric));
                        stale = 0;
                    }
                }
                if stale >= config.patience_checkpoints {
                    end = Some(EndReason::Converged);
                    break;
                }
            }
            StreamEvent::PhaseAdvance { .. } => observe(&event)?,
            StreamEvent::End { reason, .. } => {
                end = Some(*reason);
                break;
            }
        }
    }

    let reason = end.expect("batch stream ends only through an End event");
    let total_batches = batches.len() as u64;
    observe(&StreamEvent::End {
        batches: total_batches,
        reason,
    })?;
    Ok(TrainingLog {
        batches,
        checkpoints,
        summary: Summary {
            converged: reason == EndReason::Converged,
            best_checkpoint: best.map(|b| b.0),
            best_metric: best.map(|b| b.1),
            total_batches,
            final_phase: stream.state().phase,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sharding::random_shards;

    /// Corpus whose pair `i` has `lens[i]` source and target tokens.
    fn corpus_with_lengths(lens: &[(usize, usize)]) -> Corpus {
        let side = |n: usize| vec!["w"; n].join(" ");
        let src: Vec<String> = lens.iter().map(|&(s, _)| side(s)).collect();
        let tgt: Vec<String> = lens.iter().map(|&(_, t)| side(t)).collect();
        Corpus::from_texts(&src.join("\n"), &tgt.join("\n")).unwrap()
    }

    #[test]
    fn buckets_by_fixed_width() {
        let c = corpus_with_lengths(&[(3, 2), (4, 4), (12, 1)]);
        let b = bucket_by_length(0, &[0, 1, 2], &c, 10);
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].lo, b[0].hi, b[0].ids.as_slice()), (0, 10, &[0, 1][..]));
        assert_eq!((b[1].lo, b[1].hi, b[1].ids.as_slice()), (10, 20, &[2][..]));

        let b = bucket_by_length(0, &[2, 1, 0], &c, 1);
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|b| b.ids.len() == 1));

        let c = corpus_with_lengths(&[(5, 5), (5, 2), (1, 5)]);
        let b = bucket_by_length(3, &[1, 0, 2], &c, 10);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].ids, [1, 0, 2]);
        assert_eq!(b[0].shard, 3);
    }

    #[test]
    fn greedy_fill_respects_budget() {
        // word counts 2000, 2000, 2000, 3000
        let c = corpus_with_lengths(&[(1000, 1000), (1000, 1000), (1000, 1000), (1000, 2000)]);
        let filled = fill_batches(&[0, 1, 2, 3], &c, 4096);
        let sizes: Vec<usize> = filled.iter().map(|(ids, _)| ids.len()).collect();
        assert_eq!(sizes, [2, 1, 1]);
        let words: Vec<usize> = filled.iter().map(|(_, w)| *w).collect();
        assert_eq!(words, [4000, 2000, 3000]);

        let c = corpus_with_lengths(&[(1000, 1000), (1000, 1000), (1000, 2000), (1500, 1500)]);
        for order in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            for (ids, wc) in fill_batches(&order, &c, 4096) {
                assert!(wc <= 4096 || ids.len() == 1);
            }
        }
    }

    #[test]
    fn oversized_sample_forms_its_own_batch() {
        let c = corpus_with_lengths(&[(2500, 2500), (1, 1)]);
        let filled = fill_batches(&[1, 0], &c, 4096);
        assert_eq!(filled, [(vec![1], 2), (vec![0], 5000)]);
    }

    #[test]
    fn pass_repetition_fills_phase() {
        // Two samples that cannot share a batch: 2 batches per pass.
        let c = corpus_with_lengths(&[(3000, 1000), (2000, 2000)]);
        let shards = random_shards(2, 1, 0).unwrap();
        let config = TrainerConfig {
            k: 1,
            update_freq_batches: 10,
            ..TrainerConfig::default()
        };
        let mut state = config.initial_state();
        let batches = emit_phase_batches(&mut state, &shards, &c, &config, 0);
        assert_eq!(batches.len(), 10);
        let ids: Vec<u64> = batches.iter().map(|b| b.batch_id).collect();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        for pass in batches.chunks(2) {
            let mut seen: Vec<usize> = pass.iter().flat_map(|b| b.sample_ids.clone()).collect();
            seen.sort();
            assert_eq!(seen, [0, 1]);
        }
    }

    #[test]
    fn stream_interleaves_control_events() {
        let c = corpus_with_lengths(&[(2, 2); 6]);
        let shards = random_shards(6, 2, 1).unwrap();
        let config = TrainerConfig {
            k: 2,
            word_budget: 4,
            update_freq_batches: 3,
            checkpoint_freq_batches: 2,
            max_batches: Some(6),
            ..TrainerConfig::default()
        };
        let events: Vec<StreamEvent> = BatchStream::new(&c, &shards, &config).unwrap().collect();
        let tags: Vec<String> = events
            .iter()
            .map(|e| match e {
                StreamEvent::Batch(b) => format!("b{}", b.batch_id),
                StreamEvent::Checkpoint { checkpoint, .. } => format!("c{checkpoint}"),
                StreamEvent::PhaseAdvance { phase, .. } => format!("p{phase}"),
                StreamEvent::End { .. } => "end".into(),
            })
            .collect();
        assert_eq!(
            tags,
            ["b0", "b1", "c1", "b2", "p2", "b3", "c2", "b4", "b5", "c3", "p3", "end"]
        );
    }

    #[test]
    fn pump_delivers_in_order_and_stops_early() {
        let c = corpus_with_lengths(&[(2, 2); 20]);
        let shards = random_shards(20, 2, 1).unwrap();
        let config = TrainerConfig {
            k: 2,
            word_budget: 8,
            update_freq_batches: 7,
            max_batches: Some(50),
            ..TrainerConfig::default()
        };
        let direct: Vec<StreamEvent> = BatchStream::new(&c, &shards, &config).unwrap().collect();
        let mut pumped = Vec::new();
        pump(BatchStream::new(&c, &shards, &config).unwrap(), 2, |e| {
            pumped.push(e);
            ControlFlow::Continue(())
        });
        assert_eq!(direct, pumped);

        let mut n = 0;
        pump(BatchStream::new(&c, &shards, &config).unwrap(), 1, |_| {
            n += 1;
            if n == 5 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        assert_eq!(n, 5);
    }

    #[test]
    fn config_validation() {
        assert!(TrainerConfig::default().validate().is_ok());
        let bad = TrainerConfig {
            update_freq_batches: 0,
            ..TrainerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainerConfig {
            k: 0,
            ..TrainerConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
