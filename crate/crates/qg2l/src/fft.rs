//! 2D complex FFT workspace built on rustfft.
//!
//! One engine per thread or per call; plans are shared-immutable but scratch
//! buffers are owned, so an engine is cheap to clone and never shared mutably.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

pub struct SpectralEngine {
    grid: Arc<Grid>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transpose: Vec<Complex64>,
}

impl SpectralEngine {
    pub fn new(grid: &Arc<Grid>) -> SpectralEngine {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        SpectralEngine {
            grid: grid.clone(),
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            transpose: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn pass_rows(&mut self, buf: &mut [Complex64], forward: bool) {
        let n = self.grid.n();
        let plan = if forward { &self.fwd } else { &self.inv };
        for row in buf.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut self.scratch);
        }
    }

    fn transpose(&mut self, buf: &mut [Complex64]) {
        let n = self.grid.n();
        for iy in 0..n {
            for ix in 0..n {
                self.transpose[ix * n + iy] = buf[iy * n + ix];
            }
        }
        buf.copy_from_slice(&self.transpose);
    }

    /// In-place 2D synthesis: coefficients -> grid values (unnormalized
    /// inverse, matching `u(x_m) = Σ û_j e^{+i k_j·x_m}`).
    pub fn inverse2d(&mut self, buf: &mut [Complex64]) {
        self.pass_rows(buf, false);
        self.transpose(buf);
        self.pass_rows(buf, false);
        self.transpose(buf);
    }

    /// In-place 2D analysis: grid values -> coefficients (scaled by 1/N²).
    pub fn forward2d(&mut self, buf: &mut [Complex64]) {
        self.pass_rows(buf, true);
        self.transpose(buf);
        self.pass_rows(buf, true);
        self.transpose(buf);
        let s = 1.0 / (self.grid.n() * self.grid.n()) as f64;
        for c in buf.iter_mut() {
            *c *= s;
        }
    }
}
