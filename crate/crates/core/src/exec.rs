//! Row-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature enabled (the default) row loops can be spread
//! over the rayon pool. Reductions are always combined in row order, so
//! results do not depend on the number of worker threads.

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

/// `Parallel` when the feature is enabled, `Sequential` otherwise.
impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Execution::Parallel;
        #[cfg(not(feature = "parallel"))]
        Execution::Sequential
    }
}

impl Execution {
    /// Apply `f(row_index, row)` to every `row_len` chunk of `data`.
    pub fn for_each_row<F>(self, data: &mut [C64], row_len: usize, f: F)
    where
        F: Fn(usize, &mut [C64]) + Sync + Send,
    {
        match self {
            Execution::Sequential => {
                data.chunks_mut(row_len).enumerate().for_each(|(i, r)| f(i, r))
            }
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                data.par_chunks_mut(row_len).enumerate().for_each(|(i, r)| f(i, r))
            }
        }
    }

    /// Like [`Execution::for_each_row`] but hands each worker a scratch
    /// buffer created by `init`.
    pub fn for_each_row_with<S, I, F>(self, data: &mut [C64], row_len: usize, init: I, f: F)
    where
        S: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, usize, &mut [C64]) + Sync + Send,
    {
        match self {
            Execution::Sequential => {
                let mut s = init();
                data.chunks_mut(row_len).enumerate().for_each(|(i, r)| f(&mut s, i, r))
            }
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                data.par_chunks_mut(row_len)
                    .enumerate()
                    .for_each_init(&init, |s, (i, r)| f(s, i, r))
            }
        }
    }

    /// Evaluate `f` per row and return the per-row results in row order.
    pub fn map_rows<T, F>(self, data: &[C64], row_len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[C64]) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => data.chunks(row_len).enumerate().map(|(i, r)| f(i, r)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                data.par_chunks(row_len).enumerate().map(|(i, r)| f(i, r)).collect()
            }
        }
    }

    /// Map over independent jobs, keeping input order.
    pub fn map_jobs<T, U, F>(self, jobs: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send,
    {
        match self {
            Execution::Sequential => jobs.into_iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                jobs.into_par_iter().map(f).collect()
            }
        }
    }
}
