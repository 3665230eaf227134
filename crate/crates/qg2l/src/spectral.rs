//! Spectral operators for the two-layer system: the elliptic q–ψ relation,
//! the dealiased Jacobian and bilinear advection term, weighted Sobolev norms,
//! the two vorticity-level norms, and low-mode projection.
//!
//! Conventions. A real field `u` has `u(x) = Σ_j û_j e^{i k_j · x}` with
//! `k_j = 2π/L · j`, so `∫ uv dx = L² Σ û conj(v̂)` and the scalar Sobolev
//! seminorm is `‖u‖_s² = L² Σ |k|^{2s} |û|²`. Weighted two-layer versions
//! carry the layer heights: `(a,b) = h₁(a₁,b₁) + h₂(a₂,b₂)`.

use rustfft::num_complex::Complex64;

use crate::fft::SpectralEngine;
use crate::field::{Field2L, LayerWeights, ScalarField};

fn assert_same_grid(a: &ScalarField, b: &ScalarField) {
    assert!(a.grid().same_as(b.grid()), "grid mismatch");
}

/// Per-mode solve of `q̂ = (-λI + M)ψ̂` for `ψ̂`, with
/// `M = [[-F₁, F₁], [F₂, -F₂]]`. The 2×2 block has determinant
/// `λ(λ + F₁ + F₂) > 0` for every represented mode, so it is never singular.
#[inline]
pub fn psi_hat_from_q_hat(lambda: f64, w: &LayerWeights, q1: Complex64, q2: Complex64) -> (Complex64, Complex64) {
    debug_assert!(lambda > 0.0, "elliptic solve on the mean mode");
    let det = lambda * (lambda + w.f1 + w.f2);
    let p1 = (-(lambda + w.f2) * q1 - w.f1 * q2) / det;
    let p2 = (-w.f2 * q1 - (lambda + w.f1) * q2) / det;
    (p1, p2)
}

#[inline]
pub fn q_hat_from_psi_hat(lambda: f64, w: &LayerWeights, p1: Complex64, p2: Complex64) -> (Complex64, Complex64) {
    let q1 = -(lambda + w.f1) * p1 + w.f1 * p2;
    let q2 = w.f2 * p1 - (lambda + w.f2) * p2;
    (q1, q2)
}

/// Solve `q = (Δ + M)ψ` for the streamfunction, mode by mode.
pub fn streamfunction_from_vorticity(q: &Field2L, w: &LayerWeights) -> Field2L {
    let grid = q.grid().clone();
    let n = grid.n();
    let mut psi = Field2L::zeros(&grid);
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            if grid.rank_of_index(idx) == 0 {
                continue;
            }
            let lam = grid.lambda_at(ix, iy);
            let (p1, p2) = psi_hat_from_q_hat(lam, w, q.layer(0).coeffs()[idx], q.layer(1).coeffs()[idx]);
            psi.layer_mut(0).coeffs_mut()[idx] = p1;
            psi.layer_mut(1).coeffs_mut()[idx] = p2;
        }
    }
    psi
}

/// Apply `q = (Δ + M)ψ` mode by mode.
pub fn vorticity_from_streamfunction(psi: &Field2L, w: &LayerWeights) -> Field2L {
    let grid = psi.grid().clone();
    let n = grid.n();
    let mut q = Field2L::zeros(&grid);
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            if grid.rank_of_index(idx) == 0 {
                continue;
            }
            let lam = grid.lambda_at(ix, iy);
            let (q1, q2) = q_hat_from_psi_hat(lam, w, psi.layer(0).coeffs()[idx], psi.layer(1).coeffs()[idx]);
            q.layer_mut(0).coeffs_mut()[idx] = q1;
            q.layer_mut(1).coeffs_mut()[idx] = q2;
        }
    }
    q
}

/// `Δu` as a spectral multiplier.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let grid = u.grid().clone();
    let n = grid.n();
    let mut out = u.clone();
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            out.coeffs_mut()[idx] *= -grid.lambda_at(ix, iy);
        }
    }
    out
}

/// Dealiased gradient component of `u`: `i k_axis û`, truncated to the 2/3
/// band, returned as a raw buffer ready for synthesis.
fn gradient_buf(u: &ScalarField, axis: usize) -> Vec<Complex64> {
    let grid = u.grid();
    let n = grid.n();
    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for iy in 0..n {
        for ix in 0..n {
            if !grid.in_dealias_band(ix, iy) {
                continue;
            }
            let j = if axis == 0 { grid.freq(ix) } else { grid.freq(iy) };
            let k = grid.wavenumber(j);
            let idx = iy * n + ix;
            buf[idx] = Complex64::new(0.0, k) * u.coeffs()[idx];
        }
    }
    buf
}

/// `Σ cᵢ J(a, bᵢ)` with `J(a,b) = ∂ₓa ∂ᵧb − ∂ᵧa ∂ₓb`, computed
/// pseudo-spectrally with the 2/3 rule. The gradient of `a` is synthesized
/// once and shared across the summands; the result is truncated to the
/// dealias band and its mean mode zeroed exactly.
pub fn jacobian_combined(eng: &mut SpectralEngine, a: &ScalarField, parts: &[(&ScalarField, f64)]) -> ScalarField {
    let grid = a.grid().clone();
    assert!(eng.grid().same_as(&grid), "grid mismatch");
    let n = grid.n();
    let mut ax = gradient_buf(a, 0);
    let mut ay = gradient_buf(a, 1);
    eng.inverse2d(&mut ax);
    eng.inverse2d(&mut ay);

    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
    for &(b, c) in parts {
        assert_same_grid(a, b);
        let mut bx = gradient_buf(b, 0);
        let mut by = gradient_buf(b, 1);
        eng.inverse2d(&mut bx);
        eng.inverse2d(&mut by);
        for i in 0..n * n {
            let j = ax[i].re * by[i].re - ay[i].re * bx[i].re;
            acc[i].re += c * j;
        }
    }
    eng.forward2d(&mut acc);
    for iy in 0..n {
        for ix in 0..n {
            if !grid.in_dealias_band(ix, iy) {
                acc[iy * n + ix] = Complex64::new(0.0, 0.0);
            }
        }
    }
    acc[0] = Complex64::new(0.0, 0.0);
    ScalarField::from_raw_symmetrized(&grid, acc)
}

/// Dealiased Jacobian `J(a,b) = ∇⊥a · ∇b`.
pub fn jacobian(eng: &mut SpectralEngine, a: &ScalarField, b: &ScalarField) -> ScalarField {
    jacobian_combined(eng, a, &[(b, 1.0)])
}

/// The bilinear advection term
/// `B(ψ,ξ) = ( J(ψ₁, Δξ₁) + F₁ J(ψ₁, ξ₂) ; J(ψ₂, Δξ₂) + F₂ J(ψ₂, ξ₁) )`.
pub fn bilinear_b(eng: &mut SpectralEngine, psi: &Field2L, xi: &Field2L, w: &LayerWeights) -> Field2L {
    assert!(psi.grid().same_as(xi.grid()), "grid mismatch");
    let d1 = laplacian(xi.layer(0));
    let d2 = laplacian(xi.layer(1));
    let b1 = jacobian_combined(eng, psi.layer(0), &[(&d1, 1.0), (xi.layer(1), w.f1)]);
    let b2 = jacobian_combined(eng, psi.layer(1), &[(&d2, 1.0), (xi.layer(0), w.f2)]);
    Field2L::from_layers(b1, b2)
}

/// Scalar `∫ uv dx` via Parseval.
pub fn inner_scalar(a: &ScalarField, b: &ScalarField) -> f64 {
    assert_same_grid(a, b);
    let mut acc = 0.0;
    for (x, y) in a.coeffs().iter().zip(b.coeffs().iter()) {
        acc += x.re * y.re + x.im * y.im;
    }
    acc * a.grid().parseval()
}

/// Scalar Sobolev seminorm squared `‖u‖_s² = L² Σ |k|^{2s} |û|²`.
pub fn sobolev_sq_scalar(u: &ScalarField, s: i32) -> f64 {
    let grid = u.grid();
    let n = grid.n();
    let mut acc = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            if grid.rank_of_index(idx) == 0 {
                continue;
            }
            let lam = grid.lambda_at(ix, iy);
            acc += lam.powi(s) * u.coeffs()[idx].norm_sqr();
        }
    }
    acc * grid.parseval()
}

/// Weighted two-layer inner product `(a,b) = h₁(a₁,b₁) + h₂(a₂,b₂)`.
pub fn inner_l2(a: &Field2L, b: &Field2L, w: &LayerWeights) -> f64 {
    w.h1 * inner_scalar(a.layer(0), b.layer(0)) + w.h2 * inner_scalar(a.layer(1), b.layer(1))
}

/// Weighted Sobolev norm squared `‖ψ‖_k² = h₁‖ψ₁‖_k² + h₂‖ψ₂‖_k²`, `k ∈ [-2, 4]`.
pub fn norm_hk_sq(psi: &Field2L, k: i32, w: &LayerWeights) -> f64 {
    assert!((-2..=4).contains(&k), "Sobolev order outside supported range");
    w.h1 * sobolev_sq_scalar(psi.layer(0), k) + w.h2 * sobolev_sq_scalar(psi.layer(1), k)
}

pub fn norm_hk(psi: &Field2L, k: i32, w: &LayerWeights) -> f64 {
    norm_hk_sq(psi, k, w).sqrt()
}

/// `|||q|||₋₁² = ‖ψ‖² + p|ψ₁-ψ₂|²` evaluated from an already-known ψ.
pub fn triple_norm_minus1_sq_from_psi(psi: &Field2L, w: &LayerWeights) -> f64 {
    let grid = psi.grid();
    let n = grid.n();
    let mut acc = 0.0;
    let p = w.p();
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            if grid.rank_of_index(idx) == 0 {
                continue;
            }
            let lam = grid.lambda_at(ix, iy);
            let p1 = psi.layer(0).coeffs()[idx];
            let p2 = psi.layer(1).coeffs()[idx];
            acc += lam * (w.h1 * p1.norm_sqr() + w.h2 * p2.norm_sqr()) + p * (p1 - p2).norm_sqr();
        }
    }
    acc * grid.parseval()
}

/// `|||q|||₀² = |Δψ|² + p‖ψ₁-ψ₂‖²` evaluated from an already-known ψ.
pub fn triple_norm_0_sq_from_psi(psi: &Field2L, w: &LayerWeights) -> f64 {
    let grid = psi.grid();
    let n = grid.n();
    let mut acc = 0.0;
    let p = w.p();
    for iy in 0..n {
        for ix in 0..n {
            let idx = iy * n + ix;
            if grid.rank_of_index(idx) == 0 {
                continue;
            }
            let lam = grid.lambda_at(ix, iy);
            let p1 = psi.layer(0).coeffs()[idx];
            let p2 = psi.layer(1).coeffs()[idx];
            acc += lam * lam * (w.h1 * p1.norm_sqr() + w.h2 * p2.norm_sqr()) + p * lam * (p1 - p2).norm_sqr();
        }
    }
    acc * grid.parseval()
}

/// `|||q|||₋₁²` with the streamfunction recovered internally.
pub fn triple_norm_minus1_sq(q: &Field2L, w: &LayerWeights) -> f64 {
    triple_norm_minus1_sq_from_psi(&streamfunction_from_vorticity(q, w), w)
}

pub fn triple_norm_minus1(q: &Field2L, w: &LayerWeights) -> f64 {
    triple_norm_minus1_sq(q, w).sqrt()
}

/// `|||q|||₀²` with the streamfunction recovered internally.
pub fn triple_norm_0_sq(q: &Field2L, w: &LayerWeights) -> f64 {
    triple_norm_0_sq_from_psi(&streamfunction_from_vorticity(q, w), w)
}

/// Weighted dissipation functional `|Δψ|² = h₁|Δψ₁|² + h₂|Δψ₂|²`.
pub fn dissipation_from_psi(psi: &Field2L, w: &LayerWeights) -> f64 {
    norm_hk_sq(psi, 2, w)
}

/// `a₀ = 1 + 2λ₁⁻¹ max(F₁,F₂)`, the norm-equivalence constant of the
/// sandwich `‖ψ‖² ≤ |||q|||₋₁² ≤ a₀‖ψ‖²`.
pub fn a0_constant(lambda_1: f64, w: &LayerWeights) -> f64 {
    1.0 + 2.0 / lambda_1 * w.f1.max(w.f2)
}

fn project_low_scalar(u: &mut ScalarField, n_modes: usize) {
    let grid = u.grid().clone();
    let total = grid.n() * grid.n();
    for idx in 0..total {
        let r = grid.rank_of_index(idx);
        if r == 0 || r as usize > n_modes {
            u.coeffs_mut()[idx] = Complex64::new(0.0, 0.0);
        }
    }
}

/// `Πₙ`: keep the first `n_modes` conjugate pairs in the deterministic
/// eigenvalue order, zero the rest. Idempotent.
pub fn project_low(u: &ScalarField, n_modes: usize) -> ScalarField {
    assert!(n_modes >= 1 && n_modes <= u.grid().num_modes(), "mode count out of range");
    let mut out = u.clone();
    project_low_scalar(&mut out, n_modes);
    out
}

/// `Πₙ` applied to both layers.
pub fn project_low_2l(x: &Field2L, n_modes: usize) -> Field2L {
    assert!(n_modes >= 1 && n_modes <= x.grid().num_modes(), "mode count out of range");
    let mut out = x.clone();
    project_low_scalar(out.layer_mut(0), n_modes);
    project_low_scalar(out.layer_mut(1), n_modes);
    out
}

/// Complement projection `Πₙ⊥ = I - Πₙ`.
pub fn project_high(u: &ScalarField, n_modes: usize) -> ScalarField {
    let mut out = u.clone();
    let low = project_low(u, n_modes);
    out.axpy(-1.0, &low);
    out
}
