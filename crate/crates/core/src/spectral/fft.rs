//! Centered discrete Fourier transforms on the periodic lattice.
//!
//! With sample points `x_j = (j − N/2)Δx` the forward transform is
//! `F_a = Σ_j f_j e^{−i ξ_a x_j}` and the inverse is `f_j = N^{−n} Σ_a F_a e^{i ξ_a x_j}`.
//! Relative to a plain DFT this is a sign flip `(−1)^a` per axis.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct FftNd {
    n: usize,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub fn new(n: usize, size: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            n,
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn len(&self) -> usize {
        self.size.pow(self.n as u32)
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
        self.flip_signs(data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.flip_signs(data);
        self.apply(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn flip_signs(&self, data: &mut [Complex64]) {
        let size = self.size;
        match self.n {
            1 => {
                for v in data.iter_mut().skip(1).step_by(2) {
                    *v = -*v;
                }
            }
            _ => {
                for (row, chunk) in data.chunks_mut(size).enumerate() {
                    for (col, v) in chunk.iter_mut().enumerate() {
                        if (row + col) % 2 == 1 {
                            *v = -*v;
                        }
                    }
                }
            }
        }
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer does not match the lattice size");
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        match self.n {
            1 => plan.process_with_scratch(data, &mut scratch),
            _ => {
                plan.process_with_scratch(data, &mut scratch);
                transpose_square(data, self.size);
                plan.process_with_scratch(data, &mut scratch);
                transpose_square(data, self.size);
            }
        }
    }
}

fn transpose_square(data: &mut [Complex64], size: usize) {
    for i in 0..size {
        for j in (i + 1)..size {
            data.swap(i * size + j, j * size + i);
        }
    }
}

/// Plain forward DFT of a one-dimensional series (no centering, no scaling).
pub fn dft(series: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(series.len()).process(series);
}

/// Inverse of [`dft`], normalized by the length.
pub fn idft(series: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(series.len()).process(series);
    let scale = 1.0 / series.len() as f64;
    for v in series.iter_mut() {
        *v *= scale;
    }
}
