//! Curriculum-learning data scheduling for sequence-to-sequence training.
//!
//! The crate scores bitext samples by difficulty ([`difficulty`]), groups
//! them into difficulty-ordered shards with Jenks natural breaks
//! ([`sharding`]), decides which shards are visible in each curriculum phase
//! ([`schedule`]) and turns all of that into a deterministic stream of
//! word-budgeted, length-bucketed mini-batches ([`pipeline`]).
//!
//! Data-parallel loops (frequency counting, per-sample scoring, the Jenks
//! dynamic program) run on rayon when the default `parallel` feature is on;
//! see [`par::Exec`].

pub mod corpus;
pub mod difficulty;
pub mod error;
pub mod learner;
pub mod par;
pub mod pipeline;
pub mod protocol;
pub mod rng;
pub mod schedule;
pub mod sharding;
pub mod synth;

pub use corpus::{build_freq_table, load_bitext, Corpus, FreqTable, FreqTables, SamplePair, Side};
pub use difficulty::{Criterion, CriterionKind, DifficultyVector, RankMode, Scope};
pub use error::{Error, Result};
pub use learner::{Learner, MockLearner};
pub use pipeline::{Batch, BatchStream, StreamEvent, TrainerConfig, TrainingLog};
pub use schedule::{CurriculumState, PhaseDistribution, ScheduleKind};
pub use sharding::{BreakSet, ShardSet};
