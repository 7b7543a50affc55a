//! Square 2D FFT built from rustfft row transforms and a blocked transpose.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::exec::Execution;

const BLOCK: usize = 32;

pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    exec: Execution,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).field("exec", &self.exec).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize, exec: Execution) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), exec }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    /// Unnormalized forward transform over both axes.
    pub fn forward(&self, a: &mut Array2<C64>) {
        self.transform(a, &self.forward);
    }

    /// Unnormalized inverse transform; divide by `n²` to undo [`Fft2::forward`].
    pub fn inverse(&self, a: &mut Array2<C64>) {
        self.transform(a, &self.inverse);
    }

    fn transform(&self, a: &mut Array2<C64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(a.dim(), (n, n), "array shape does not match FFT size");
        let data = a.as_slice_mut().expect("standard layout");
        self.rows(data, plan);
        transpose_in_place(data, n);
        self.rows(data, plan);
        transpose_in_place(data, n);
    }

    fn rows(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let scratch_len = plan.get_inplace_scratch_len();
        match self.exec {
            Execution::Sequential => {
                let mut scratch = vec![C64::default(); scratch_len];
                plan.process_with_scratch(data, &mut scratch);
            }
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                // a handful of rows per task keeps scheduling overhead low
                let rows_per_task = (self.n / (4 * rayon::current_num_threads())).max(1);
                let chunk = rows_per_task * self.n;
                self.exec.for_each_row_with(
                    data,
                    chunk,
                    || vec![C64::default(); scratch_len],
                    |scratch, _, rows| plan.process_with_scratch(rows, scratch),
                );
            }
        }
    }
}

fn transpose_in_place(data: &mut [C64], n: usize) {
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}
