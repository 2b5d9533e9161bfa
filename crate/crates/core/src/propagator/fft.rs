//! Three-dimensional FFT built from rustfft line transforms.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::exec;

/// Forward/inverse plans for an `n³` box.
#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized transform in place; data is x-fastest.
    pub fn process(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        let plan = if inverse { &self.inverse } else { &self.forward };
        // x and y inside each z-slab
        exec::for_chunks_mut(data, n * n, |_, slab| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for row in slab.chunks_mut(n) {
                plan.process_with_scratch(row, &mut scratch);
            }
            let mut line = vec![Complex64::default(); n];
            for ix in 0..n {
                for iy in 0..n {
                    line[iy] = slab[ix + n * iy];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for iy in 0..n {
                    slab[ix + n * iy] = line[iy];
                }
            }
        });
        // z lines
        let src: &[Complex64] = data;
        let lines = exec::map_indices(n * n, |xy| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let mut line: Vec<Complex64> = (0..n).map(|iz| src[xy + n * n * iz]).collect();
            plan.process_with_scratch(&mut line, &mut scratch);
            line
        });
        for (xy, line) in lines.into_iter().enumerate() {
            for (iz, v) in line.into_iter().enumerate() {
                data[xy + n * n * iz] = v;
            }
        }
    }
}
