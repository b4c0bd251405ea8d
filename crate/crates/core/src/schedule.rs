//! Curriculum schedules: which shards are visible in each phase, the order
//! they are visited in, and the per-sample selection probability they induce.
//!
//! Shard 0 is the easiest and shard `k - 1` the hardest. Phases count from 1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};
use crate::sharding::ShardSet;

/// Shards removed by `reduce` before they are added back.
pub const DEFAULT_REDUCE_REMOVALS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Easiest shard first, one harder shard added per phase.
    Default,
    /// Hardest shard first, one easier shard added per phase.
    Reverse,
    /// `Default`, plus a persistent second copy of the hardest shard once
    /// every shard has been visible.
    Boost,
    /// `Default`, then repeatedly drop the easiest shards one per phase and
    /// restore them all once the removal limit is reached.
    Reduce,
    /// `Default` visibility, shards always visited easiest first.
    NoShuffle,
    /// No curriculum: every shard visible from the first phase. Pair it with
    /// random shards for a baseline run through the same pipeline.
    Baseline,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 6] = [
        ScheduleKind::Default,
        ScheduleKind::Reverse,
        ScheduleKind::Boost,
        ScheduleKind::Reduce,
        ScheduleKind::NoShuffle,
        ScheduleKind::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::Default => "default",
            ScheduleKind::Reverse => "reverse",
            ScheduleKind::Boost => "boost",
            ScheduleKind::Reduce => "reduce",
            ScheduleKind::NoShuffle => "noshuffle",
            ScheduleKind::Baseline => "baseline",
        }
    }

    pub fn shuffles_shards(self) -> bool {
        self != ScheduleKind::NoShuffle
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown schedule {s:?}")))
    }
}

/// Number of easiest shards `reduce` has removed at `phase`.
fn reduce_removed(phase: usize, k: usize, removals: usize) -> usize {
    if phase <= k || removals == 0 {
        return 0;
    }
    let pos = (phase - k - 1) % (removals + 1);
    let removed = if pos < removals { pos + 1 } else { 0 };
    // Removing every shard would leave nothing to train on: restore instead.
    if removed >= k {
        0
    } else {
        removed
    }
}

/// Visible shard multiset at `phase`, sorted ascending.
pub fn visible_shards(kind: ScheduleKind, phase: usize, k: usize) -> Vec<usize> {
    visible_shards_with(kind, phase, k, DEFAULT_REDUCE_REMOVALS)
}

pub fn visible_shards_with(
    kind: ScheduleKind,
    phase: usize,
    k: usize,
    reduce_removals: usize,
) -> Vec<usize> {
    assert!(phase >= 1 && k >= 1, "phase and k must be positive");
    let seen = phase.min(k);
    match kind {
        ScheduleKind::Default | ScheduleKind::NoShuffle => (0..seen).collect(),
        ScheduleKind::Reverse => (k - seen..k).collect(),
        ScheduleKind::Baseline => (0..k).collect(),
        ScheduleKind::Boost => {
            let mut v: Vec<usize> = (0..seen).collect();
            if phase > k && k > 1 {
                v.push(k - 1);
            }
            v
        }
        ScheduleKind::Reduce => {
            let removed = reduce_removed(phase, k, reduce_removals);
            (removed..seen).collect()
        }
    }
}

/// Schedule position plus the bookkeeping carried across phases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub kind: ScheduleKind,
    pub k: usize,
    pub phase: usize,
    pub visible: Vec<usize>,
    pub removed_count: usize,
    /// Shard of the last batch of the previous phase (or pass).
    pub prev_last_shard: Option<usize>,
    pub seed: u64,
    pub reduce_removals: usize,
}

impl CurriculumState {
    pub fn new(kind: ScheduleKind, k: usize, seed: u64) -> Self {
        Self::with_reduce_removals(kind, k, seed, DEFAULT_REDUCE_REMOVALS)
    }

    pub fn with_reduce_removals(kind: ScheduleKind, k: usize, seed: u64, removals: usize) -> Self {
        assert!(k >= 1, "k must be positive");
        let mut state = CurriculumState {
            kind,
            k,
            phase: 1,
            visible: Vec::new(),
            removed_count: 0,
            prev_last_shard: None,
            seed,
            reduce_removals: removals,
        };
        state.refresh();
        state
    }

    fn refresh(&mut self) {
        self.visible = visible_shards_with(self.kind, self.phase, self.k, self.reduce_removals);
        self.removed_count = match self.kind {
            ScheduleKind::Reduce => reduce_removed(self.phase, self.k, self.reduce_removals),
            _ => 0,
        };
    }

    /// Moves to the next phase. `prev_last_shard` is kept.
    pub fn advance_phase(&mut self) {
        self.phase += 1;
        self.refresh();
    }

    pub fn multiplicity(&self, shard: usize) -> usize {
        self.visible.iter().filter(|&&s| s == shard).count()
    }

    pub fn distinct_visible(&self) -> usize {
        let mut v = self.visible.clone();
        v.dedup();
        v.len()
    }

    /// True when every shard is visible exactly once.
    pub fn is_uniform(&self) -> bool {
        self.visible.len() == self.k && self.distinct_visible() == self.k
    }
}

/// Shard visiting order for one pass over the visible multiset.
///
/// `noshuffle` visits shards in ascending order. Every other schedule draws a
/// uniform permutation, redrawn while its first shard equals
/// `prev_last_shard` and some other shard could lead.
pub fn order_shards<R: Rng + ?Sized>(state: &CurriculumState, rng: &mut R) -> Vec<usize> {
    let mut order = state.visible.clone();
    if !state.kind.shuffles_shards() {
        order.sort_unstable();
        return order;
    }
    let constrained = state.distinct_visible() > 1;
    loop {
        order.shuffle(rng);
        match state.prev_last_shard {
            Some(last) if constrained && order[0] == last => continue,
            _ => return order,
        }
    }
}

/// Selection probabilities at one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDistribution {
    per_shard: Vec<f64>,
    multiplicity: Vec<usize>,
    total: usize,
}

impl PhaseDistribution {
    pub fn per_shard(&self) -> &[f64] {
        &self.per_shard
    }

    /// Probability of one member of `shard`; uniform within the shard.
    pub fn per_sample_in(&self, shard: usize) -> f64 {
        self.multiplicity[shard] as f64 / self.total as f64
    }

    pub fn per_sample(&self, shards: &ShardSet) -> Vec<f64> {
        shards
            .assignment()
            .iter()
            .map(|&s| self.per_sample_in(s))
            .collect()
    }
}

/// Shard-size weighted distribution over the visible multiset.
pub fn phase_distribution(state: &CurriculumState, shard_sizes: &[usize]) -> PhaseDistribution {
    assert_eq!(shard_sizes.len(), state.k, "shard sizes must match k");
    let mut multiplicity = vec![0usize; state.k];
    for &s in &state.visible {
        multiplicity[s] += 1;
    }
    let total: usize = multiplicity
        .iter()
        .zip(shard_sizes)
        .map(|(m, n)| m * n)
        .sum();
    let per_shard = multiplicity
        .iter()
        .zip(shard_sizes)
        .map(|(&m, &n)| (m * n) as f64 / total as f64)
        .collect();
    PhaseDistribution {
        per_shard,
        multiplicity,
        total,
    }
}

/// One line of a schedule dry run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub phase: usize,
    pub visible: Vec<usize>,
    pub order: Vec<usize>,
    pub per_shard_q: BTreeMap<String, f64>,
}

/// Dry run of `horizon` phases. Orders are drawn from the same per-phase
/// generator the batch stream uses for its first pass.
pub fn plan(
    kind: ScheduleKind,
    shard_sizes: &[usize],
    horizon: usize,
    seed: u64,
    reduce_removals: usize,
) -> Vec<PlanRecord> {
    let mut state = CurriculumState::with_reduce_removals(kind, shard_sizes.len(), seed, reduce_removals);
    let mut records = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut rng = rng_for(seed, &[tag::PASS, state.phase as u64, 0]);
        let order = order_shards(&state, &mut rng);
        let dist = phase_distribution(&state, shard_sizes);
        let per_shard_q = dist
            .per_shard()
            .iter()
            .enumerate()
            .filter(|(_, &q)| q > 0.0)
            .map(|(s, &q)| (s.to_string(), q))
            .collect();
        state.prev_last_shard = order.last().copied();
        records.push(PlanRecord {
            phase: state.phase,
            visible: state.visible.clone(),
            order,
            per_shard_q,
        });
        state.advance_phase();
    }
    records
}
