//! Jenks natural breaks (Fisher's exact 1-D classification) and shard assignment.
//!
//! The dynamic program runs over the sorted *distinct* values, each weighted
//! by its multiplicity. The objective is still the within-class squared
//! deviation (SDCM) of the full multiset, but equal values can never straddle
//! a break. Some optimal multiset partition always keeps ties together, so
//! nothing is lost, and assignment by inclusive upper bound is unambiguous.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::difficulty::DifficultyVector;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng::{rng_for, tag};

/// Inclusive upper bound of each class, strictly ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakSet {
    upper_bounds: Vec<f64>,
}

impl BreakSet {
    pub fn new(upper_bounds: Vec<f64>) -> Result<Self> {
        if upper_bounds.is_empty() {
            return Err(Error::InvalidArgument("break set needs at least one class".into()));
        }
        if upper_bounds.windows(2).any(|w| w[0] >= w[1]) || upper_bounds.iter().any(|b| b.is_nan()) {
            return Err(Error::InvalidArgument("upper bounds must be strictly ascending".into()));
        }
        Ok(BreakSet { upper_bounds })
    }

    pub fn k(&self) -> usize {
        self.upper_bounds.len()
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper_bounds
    }

    /// Lowest class whose upper bound is `>= value`; values above the last
    /// bound land in the last class.
    pub fn class_of(&self, value: f64) -> usize {
        self.upper_bounds
            .partition_point(|&b| b < value)
            .min(self.k() - 1)
    }
}

fn sorted_distinct(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::new();
    let mut weight: Vec<f64> = Vec::new();
    for v in sorted {
        match distinct.last() {
            Some(&last) if last == v => *weight.last_mut().unwrap() += 1.0,
            _ => {
                distinct.push(v);
                weight.push(1.0);
            }
        }
    }
    (distinct, weight)
}

/// Weighted prefix sums over values shifted by their mean, which keeps the
/// `q - s^2/n` class cost well conditioned.
struct PrefixSums {
    w: Vec<f64>,
    s: Vec<f64>,
    q: Vec<f64>,
}

impl PrefixSums {
    fn new(values: &[f64], weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let shift = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
        let n = values.len();
        let (mut w, mut s, mut q) = (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]);
        for i in 0..n {
            let x = values[i] - shift;
            w[i + 1] = w[i] + weights[i];
            s[i + 1] = s[i] + weights[i] * x;
            q[i + 1] = q[i] + weights[i] * x * x;
        }
        PrefixSums { w, s, q }
    }

    /// Squared deviation of entries `a..b` from their own mean.
    #[inline]
    fn cost(&self, a: usize, b: usize) -> f64 {
        let n = self.w[b] - self.w[a];
        let s = self.s[b] - self.s[a];
        let q = self.q[b] - self.q[a];
        (q - s * s / n).max(0.0)
    }
}

pub fn jenks_breaks(values: &[f64], k: usize) -> Result<BreakSet> {
    jenks_breaks_with(values, k, Exec::default())
}

/// Optimal contiguous k-partition of the sorted values minimising SDCM.
///
/// Among optimal partitions the one with the smallest first break is chosen,
/// then the smallest second break, and so on.
pub fn jenks_breaks_with(values: &[f64], k: usize, exec: Exec) -> Result<BreakSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot classify an empty value set".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("values must be finite".into()));
    }
    let (distinct, weights) = sorted_distinct(values);
    let m = distinct.len();
    if k > m {
        return Err(Error::TooManyClasses { k, distinct: m });
    }
    let sums = PrefixSums::new(&distinct, &weights);

    // best[i]: minimal cost of splitting entries i..m into `classes` classes.
    // choice[classes][i]: smallest end of the first class attaining it.
    let mut best: Vec<f64> = (0..=m).map(|i| if i < m { sums.cost(i, m) } else { f64::INFINITY }).collect();
    let mut choice: Vec<Vec<usize>> = vec![vec![m; m + 1]];
    for classes in 2..=k {
        let prev = &best;
        let last_start = m - classes;
        let layer = exec.map(last_start + 1, |i| {
            let mut min = f64::INFINITY;
            let mut arg = i + 1;
            for end in i + 1..=m - (classes - 1) {
                let c = sums.cost(i, end) + prev[end];
                if c < min {
                    min = c;
                    arg = end;
                }
            }
            (min, arg)
        });
        let mut next = vec![f64::INFINITY; m + 1];
        let mut args = vec![m; m + 1];
        for (i, (c, a)) in layer.into_iter().enumerate() {
            next[i] = c;
            args[i] = a;
        }
        best = next;
        choice.push(args);
    }

    let mut upper_bounds = Vec::with_capacity(k);
    let mut start = 0;
    for classes in (1..=k).rev() {
        let end = choice[classes - 1][start];
        upper_bounds.push(distinct[end - 1]);
        start = end;
    }
    debug_assert_eq!(start, m);
    BreakSet::new(upper_bounds)
}

fn squared_deviation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Sum of squared deviations from class means under `breaks`.
pub fn sdcm(values: &[f64], breaks: &BreakSet) -> f64 {
    let mut classes = vec![Vec::new(); breaks.k()];
    for &v in values {
        classes[breaks.class_of(v)].push(v);
    }
    classes.iter().map(|c| squared_deviation(c)).sum()
}

/// Goodness of variance fit, `1 - SDCM / SDAM`; defined as 1 when all values
/// are equal.
pub fn gvf(values: &[f64], breaks: &BreakSet) -> f64 {
    let sdam = squared_deviation(values);
    if sdam == 0.0 {
        return 1.0;
    }
    1.0 - sdcm(values, breaks) / sdam
}

/// Partition of sample ids into `k` shards, shard 0 easiest.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardSet {
    shards: Vec<Vec<usize>>,
    shard_of: Vec<usize>,
    breaks: Option<BreakSet>,
}

impl ShardSet {
    /// Builds a shard set from a per-sample shard index.
    pub fn from_assignment(shard_of: Vec<usize>, k: usize) -> Result<Self> {
        let mut shards = vec![Vec::new(); k];
        for (id, &s) in shard_of.iter().enumerate() {
            let shard = shards.get_mut(s).ok_or_else(|| {
                Error::InvalidArgument(format!("sample {id} assigned to shard {s} >= k={k}"))
            })?;
            shard.push(id);
        }
        if let Some(empty) = shards.iter().position(Vec::is_empty) {
            return Err(Error::DegenerateShard(empty));
        }
        Ok(ShardSet {
            shards,
            shard_of,
            breaks: None,
        })
    }

    pub fn k(&self) -> usize {
        self.shards.len()
    }

    pub fn shard(&self, index: usize) -> &[usize] {
        &self.shards[index]
    }

    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn shard_of(&self, id: usize) -> usize {
        self.shard_of[id]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.shard_of
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.shards.iter().map(Vec::len).collect()
    }

    pub fn num_samples(&self) -> usize {
        self.shard_of.len()
    }

    pub fn breaks(&self) -> Option<&BreakSet> {
        self.breaks.as_ref()
    }

    /// One shard index per line, line `i` holding sample `i`.
    pub fn assignment_text(&self) -> String {
        let mut out = String::with_capacity(self.shard_of.len() * 2);
        for s in &self.shard_of {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }
}

/// Jenks-shards the samples by difficulty; ties at a break go to the lower shard.
pub fn assign_shards(scores: &DifficultyVector, k: usize) -> Result<ShardSet> {
    assign_shards_with(scores, k, Exec::default())
}

pub fn assign_shards_with(scores: &DifficultyVector, k: usize, exec: Exec) -> Result<ShardSet> {
    let breaks = jenks_breaks_with(scores.values(), k, exec)?;
    let shard_of = scores.values().iter().map(|&v| breaks.class_of(v)).collect();
    let mut set = ShardSet::from_assignment(shard_of, k)?;
    set.breaks = Some(breaks);
    Ok(set)
}

/// Random split into `k` near-equal shards, for the no-curriculum baseline.
pub fn random_shards(num_samples: usize, k: usize, seed: u64) -> Result<ShardSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > num_samples {
        return Err(Error::TooManyClasses {
            k,
            distinct: num_samples,
        });
    }
    let mut ids: Vec<usize> = (0..num_samples).collect();
    ids.shuffle(&mut rng_for(seed, &[tag::BASELINE_SHARDS]));
    let mut shard_of = vec![0; num_samples];
    for (pos, id) in ids.into_iter().enumerate() {
        shard_of[id] = pos * k / num_samples;
    }
    ShardSet::from_assignment(shard_of, k)
}
