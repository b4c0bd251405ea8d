//! The learner interface the training loop drives, and a deterministic mock.

use std::collections::HashSet;
use std::convert::Infallible;
use std::fmt::Display;

use rand::Rng;

use crate::pipeline::Batch;
use crate::rng::{rng_for, tag};

/// Something that trains on batches and reports a validation metric where
/// lower is better (e.g. perplexity). Higher-is-better metrics must be negated.
pub trait Learner {
    type Error: Display;

    fn consume_batch(&mut self, batch: &Batch) -> Result<(), Self::Error>;

    fn evaluate(&mut self) -> Result<f64, Self::Error>;
}

/// Metric reported before any batch is consumed.
pub const INITIAL_METRIC: f64 = 100.0;
/// Asymptote the mock metric approaches.
pub const METRIC_FLOOR: f64 = 1.0;

/// Stand-in learner whose metric depends only on how many distinct samples it
/// has seen:
///
/// `metric(d) = FLOOR + (INITIAL - FLOOR) / (1 + rate * min(d, plateau))`
///
/// The metric is strictly decreasing in `d` until the plateau, then flat.
/// `rate` is drawn from the seed, in `[0.05, 0.1)`.
#[derive(Debug, Clone)]
pub struct MockLearner {
    seen: HashSet<usize>,
    rate: f64,
    plateau: Option<usize>,
}

impl MockLearner {
    pub fn new(seed: u64) -> Self {
        let rate = 0.05 * (1.0 + rng_for(seed, &[tag::LEARNER]).random::<f64>());
        MockLearner {
            seen: HashSet::new(),
            rate,
            plateau: None,
        }
    }

    /// Stops improving once `distinct_samples` distinct samples have been seen.
    pub fn with_plateau(mut self, distinct_samples: usize) -> Self {
        self.plateau = Some(distinct_samples);
        self
    }

    pub fn distinct_seen(&self) -> usize {
        self.seen.len()
    }

    pub fn metric(&self) -> f64 {
        let d = match self.plateau {
            Some(p) => self.seen.len().min(p),
            None => self.seen.len(),
        };
        METRIC_FLOOR + (INITIAL_METRIC - METRIC_FLOOR) / (1.0 + self.rate * d as f64)
    }
}

impl Learner for MockLearner {
    type Error = Infallible;

    fn consume_batch(&mut self, batch: &Batch) -> Result<(), Infallible> {
        self.seen.extend(batch.sample_ids.iter().copied());
        Ok(())
    }

    fn evaluate(&mut self) -> Result<f64, Infallible> {
        Ok(self.metric())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(ids: &[usize]) -> Batch {
        Batch {
            batch_id: 0,
            phase: 1,
            shard: 0,
            sample_ids: ids.to_vec(),
            word_count: ids.len(),
        }
    }

    #[test]
    fn fresh_learner_reports_initial_metric() {
        assert_eq!(MockLearner::new(3).evaluate().unwrap(), INITIAL_METRIC);
    }

    #[test]
    fn same_seed_same_stream_same_metrics() {
        let stream = [batch(&[1, 2]), batch(&[2, 3]), batch(&[7])];
        let run = |seed| {
            let mut l = MockLearner::new(seed);
            stream
                .iter()
                .map(|b| {
                    l.consume_batch(b).unwrap();
                    l.evaluate().unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn final_metric_depends_on_distinct_set_only() {
        let mut a = MockLearner::new(1);
        let mut b = MockLearner::new(1);
        for ids in [&[1, 2][..], &[3], &[1, 4]] {
            a.consume_batch(&batch(ids)).unwrap();
        }
        for ids in [&[4, 3][..], &[2, 2, 1]] {
            b.consume_batch(&batch(ids)).unwrap();
        }
        assert_eq!(a.evaluate().unwrap(), b.evaluate().unwrap());
    }

    #[test]
    fn metric_decreases_until_plateau() {
        let mut l = MockLearner::new(0).with_plateau(3);
        let mut prev = l.evaluate().unwrap();
        for id in 0..3 {
            l.consume_batch(&batch(&[id])).unwrap();
            let m = l.evaluate().unwrap();
            assert!(m < prev);
            prev = m;
        }
        l.consume_batch(&batch(&[10, 11])).unwrap();
        assert_eq!(l.evaluate().unwrap(), prev);
    }
}
