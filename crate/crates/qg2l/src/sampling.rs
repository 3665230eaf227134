//! Deterministic random streams and random-field generation.
//!
//! Every stochastic object in the harness draws from a ChaCha stream derived
//! from `(master seed, purpose, index)`, so ensembles are reproducible and
//! independent of scheduling order or thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rustfft::num_complex::Complex64;
use std::sync::Arc;

use crate::fft::SpectralEngine;
use crate::field::{Field2L, LayerWeights, ScalarField};
use crate::grid::Grid;
use crate::spectral::{bilinear_b, dissipation_from_psi, inner_l2, laplacian, norm_hk, norm_hk_sq};

/// Stream purposes, kept distinct so adding runs of one kind never shifts
/// the draws of another.
pub mod purpose {
    pub const INIT: u32 = 1;
    pub const SIM: u32 = 2;
    pub const COUPLE: u32 = 3;
    pub const SHORT: u32 = 4;
    pub const ENSEMBLE_X: u32 = 5;
    pub const ENSEMBLE_Y: u32 = 6;
    pub const K0: u32 = 7;
    pub const COUPLE_BOUND: u32 = 8;
    pub const GAP: u32 = 9;
    pub const TEST: u32 = 99;
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Counter-based stream for `(master, purpose, index)`.
pub fn stream(master: u64, purpose: u32, index: u64) -> ChaCha12Rng {
    let mut state = master ^ ((purpose as u64) << 32) ^ 0xA076_1D64_78BD_642F;
    let mut seed = [0u8; 32];
    let _ = splitmix(&mut state);
    let mut state = state ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Random zero-mean scalar field supported on the dealias band, with
/// per-mode amplitude `amplitude · (1+λ)^{-slope/2}` times a standard
/// complex Gaussian. Modes are filled in the deterministic eigen-order.
pub fn random_scalar_field<R: Rng>(grid: &Arc<Grid>, amplitude: f64, slope: f64, rng: &mut R) -> ScalarField {
    let mut f = ScalarField::zeros(grid);
    let cut = grid.dealias_cut();
    for rank in 1..=grid.num_modes() {
        let m = grid.mode(rank);
        if m.j.0.abs() > cut || m.j.1.abs() > cut {
            continue;
        }
        let profile = amplitude * (1.0 + m.lambda).powf(-slope / 2.0);
        let g1: f64 = rng.sample(rand_distr::StandardNormal);
        let g2: f64 = rng.sample(rand_distr::StandardNormal);
        f.set_mode(m.j.0, m.j.1, Complex64::new(g1, g2) * profile / std::f64::consts::SQRT_2);
    }
    f
}

/// Two independent random layers.
pub fn random_field_2l<R: Rng>(grid: &Arc<Grid>, amplitude: f64, slope: f64, rng: &mut R) -> Field2L {
    let l1 = random_scalar_field(grid, amplitude, slope, rng);
    let l2 = random_scalar_field(grid, amplitude, slope, rng);
    Field2L::from_layers(l1, l2)
}

/// Measure the bilinear-bound constant: the largest observed ratio
/// `|(B(ψ,ψ),ξ)| / (‖ψ‖ |Δψ| |Δξ|)` over random streamfunction pairs with a
/// range of spectral slopes. The bound itself is Lemma-level; its constant is
/// not available in closed form, so it is recorded as measured.
pub fn measure_k0_hat(eng: &mut SpectralEngine, w: &LayerWeights, trials: usize, master: u64) -> f64 {
    let grid = eng.grid().clone();
    let mut rng = stream(master, purpose::K0, 0);
    let slopes = [0.25, 0.75, 1.25, 2.0, 3.0];
    let mut k0 = 0.0f64;
    for t in 0..trials {
        let slope = slopes[t % slopes.len()];
        let psi = random_field_2l(&grid, 1.0, slope, &mut rng);
        let xi = random_field_2l(&grid, 1.0, slopes[(t / slopes.len()) % slopes.len()], &mut rng);
        let b = bilinear_b(eng, &psi, &psi, w);
        let num = inner_l2(&b, &xi, w).abs();
        let den = norm_hk(&psi, 1, w)
            * norm_hk_sq(&psi, 2, w).sqrt()
            * norm_hk_sq(&xi, 2, w).sqrt();
        if den > 0.0 {
            k0 = k0.max(num / den);
        }
    }
    k0
}

/// Convenience diagnostics used across the verification harness.
pub fn dissipation_of_q(q: &Field2L, w: &LayerWeights) -> f64 {
    let psi = crate::spectral::streamfunction_from_vorticity(q, w);
    dissipation_from_psi(&psi, w)
}

/// `Δψ` of a two-layer field, layerwise.
pub fn laplacian_2l(psi: &Field2L) -> Field2L {
    Field2L::from_layers(laplacian(psi.layer(0)), laplacian(psi.layer(1)))
}
