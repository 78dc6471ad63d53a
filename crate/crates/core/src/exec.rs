//! Execution strategy for the data-parallel inner loops.
//!
//! Every hot loop in the crate (per-row convolution, per-episode batches,
//! stimulus sweeps) goes through [`Exec`]. With the `parallel` feature the
//! `Parallel` variant dispatches to rayon; without it the variant still
//! exists and silently runs sequentially, so callers never need `cfg`s.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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
    /// True when this strategy will actually fan out over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Runs `f(row_index, row)` over every `width`-sized row of `data`.
    pub fn for_each_row<F>(self, data: &mut [f64], width: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(y, row)| f(y, row));
            return;
        }
        data.chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}
