//! Execution mode switch for the data-parallel inner loops.
//!
//! With the `parallel` feature the [`Exec::Parallel`] mode runs on the rayon
//! global pool; without it both modes run sequentially. Results are identical
//! in either mode: every parallel loop is an order-preserving map or an
//! associative reduction over integer counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Order-preserving `(0..n).map(f).collect()`.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Fold each index into an accumulator, then merge accumulators.
    /// `merge` must be associative and `init` its identity.
    pub fn fold_reduce<A, I, F, M>(self, n: usize, init: I, fold: F, merge: M) -> A
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(A, usize) -> A + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n)
                .into_par_iter()
                .fold(&init, &fold)
                .reduce(&init, &merge),
            _ => {
                let _ = &merge;
                (0..n).fold(init(), fold)
            }
        }
    }
}
