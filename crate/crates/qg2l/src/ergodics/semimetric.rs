//! The premetric `θ_α`, the bounded semimetric `d_N`, the Lyapunov-weighted
//! semimetric `d̃`, and the Lyapunov function `V = |||·|||₋₁²`.

use crate::field::{Field2L, LayerWeights};
use crate::spectral::triple_norm_minus1_sq;

/// Parameters of the contraction semimetric.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SemimetricParams {
    /// Hölder exponent, in `(0, α₀)` with `α₀ ≤ 1/2`.
    pub alpha: f64,
    /// Energy weight `υ = κ₁/κ₂`.
    pub upsilon: f64,
    /// Scale `N ≥ 1` in `d_N = min(Nθ(x,y), Nθ(y,x), 1)`.
    pub n_scale: f64,
}

impl SemimetricParams {
    pub fn validate(&self, alpha0: f64) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha < alpha0) {
            return Err(format!(
                "semimetric.alpha: must lie in (0, alpha0) = (0, {alpha0}), got {}",
                self.alpha
            ));
        }
        if !(alpha0 <= 0.5) {
            return Err("alpha0 must not exceed 1/2".to_string());
        }
        if !(self.upsilon > 0.0) {
            return Err("semimetric.upsilon must be positive".to_string());
        }
        if !(self.n_scale >= 1.0) {
            return Err("semimetric.n_scale must be at least 1".to_string());
        }
        Ok(())
    }
}

/// `θ_α(x,y) = |||x-y|||₋₁^{2α} · exp(α υ |||x|||₋₁²)`. Asymmetric in (x,y).
pub fn theta_alpha(x: &Field2L, y: &Field2L, sp: &SemimetricParams, w: &LayerWeights) -> f64 {
    assert!(x.grid().same_as(y.grid()), "grid mismatch");
    let diff_sq = triple_norm_minus1_sq(&x.minus(y), w);
    let vx = triple_norm_minus1_sq(x, w);
    diff_sq.powf(sp.alpha) * (sp.alpha * sp.upsilon * vx).exp()
}

/// `d_N(x,y) = min(N θ_α(x,y), N θ_α(y,x), 1)`: symmetric, in [0,1],
/// zero iff the represented coefficients coincide.
pub fn d_n(x: &Field2L, y: &Field2L, sp: &SemimetricParams, w: &LayerWeights) -> f64 {
    let txy = sp.n_scale * theta_alpha(x, y, sp, w);
    let tyx = sp.n_scale * theta_alpha(y, x, sp, w);
    txy.min(tyx).min(1.0)
}

/// Lyapunov function `V(x) = |||x|||₋₁²`.
pub fn lyapunov_v(x: &Field2L, w: &LayerWeights) -> f64 {
    triple_norm_minus1_sq(x, w)
}

/// `d̃(x,y) = sqrt(d_N(x,y)·(1 + V(x) + V(y)))`.
pub fn d_tilde(x: &Field2L, y: &Field2L, sp: &SemimetricParams, w: &LayerWeights) -> f64 {
    (d_n(x, y, sp, w) * (1.0 + lyapunov_v(x, w) + lyapunov_v(y, w))).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::sampling::{purpose, random_field_2l, stream};

    fn setup() -> (std::sync::Arc<Grid>, LayerWeights, SemimetricParams) {
        let g = Grid::new(2.0 * std::f64::consts::PI, 16);
        let w = LayerWeights::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let sp = SemimetricParams { alpha: 0.25, upsilon: 2.0, n_scale: 2.0 };
        (g, w, sp)
    }

    #[test]
    fn theta_hand_value_and_trivial_cases() {
        // α=1/4, υ=2, |||x-y|||=1, |||x|||²=1 → θ = e^{1/2}.
        let (g, w, sp) = setup();
        // Single cos mode at λ=1, layer 1, amplitude chosen so |||·|||₋₁² = 1.
        // For a layer-1-only ψ-mode at λ: |||q|||₋₁² = (λ h₁ + p/…)… easier:
        // pick x with V(x)=1 by scaling a random field.
        let mut rng = stream(61, purpose::TEST, 0);
        let mut x = random_field_2l(&g, 1.0, 1.0, &mut rng);
        let vx = lyapunov_v(&x, &w);
        x.scale(1.0 / vx.sqrt());
        let mut diff = random_field_2l(&g, 1.0, 1.0, &mut rng);
        let vd = lyapunov_v(&diff, &w);
        diff.scale(1.0 / vd.sqrt());
        let mut y = x.clone();
        y.axpy(-1.0, &diff);
        let th = theta_alpha(&x, &y, &sp, &w);
        let expect = (0.5f64).exp(); // 1^{2α}·e^{αυ·1}
        assert!((th - expect).abs() < 1e-10 * expect, "{th} vs {expect}");
        assert_eq!(theta_alpha(&x, &x.clone(), &sp, &w), 0.0);
        // x = 0: θ(0,y) = |||y|||^{2α}.
        let z = Field2L::zeros(&g);
        let t0 = theta_alpha(&z, &y, &sp, &w);
        let vy = lyapunov_v(&y, &w);
        assert!((t0 - vy.powf(sp.alpha)).abs() < 1e-12 * t0.max(1e-30));
    }

    #[test]
    fn theta_scaling_identity() {
        // θ(cx, cy) = |c|^{2α} exp(αυ(c²-1)|||x|||²) θ(x,y).
        let (g, w, sp) = setup();
        let mut rng = stream(62, purpose::TEST, 0);
        let x = random_field_2l(&g, 0.7, 1.0, &mut rng);
        let y = random_field_2l(&g, 0.7, 1.0, &mut rng);
        for c in [0.5f64, 2.0, -1.3] {
            let mut cx = x.clone();
            cx.scale(c);
            let mut cy = y.clone();
            cy.scale(c);
            let lhs = theta_alpha(&cx, &cy, &sp, &w);
            let vx = lyapunov_v(&x, &w);
            let rhs = (c * c).powf(sp.alpha)
                * (sp.alpha * sp.upsilon * (c * c - 1.0) * vx).exp()
                * theta_alpha(&x, &y, &sp, &w);
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs(), "c={c}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn d_n_symmetry_range_and_hand_value() {
        let (g, w, sp) = setup();
        let mut rng = stream(63, purpose::TEST, 0);
        for _ in 0..10 {
            let x = random_field_2l(&g, 1.0, 1.0, &mut rng);
            let y = random_field_2l(&g, 1.0, 1.0, &mut rng);
            let dxy = d_n(&x, &y, &sp, &w);
            let dyx = d_n(&y, &x, &sp, &w);
            assert_eq!(dxy, dyx);
            assert!((0.0..=1.0).contains(&dxy));
            assert_eq!(d_n(&x, &x.clone(), &sp, &w), 0.0);
        }
        // Far-apart states cap at 1.
        let mut big = random_field_2l(&g, 1.0, 1.0, &mut rng);
        big.scale(100.0);
        let z = Field2L::zeros(&g);
        assert_eq!(d_n(&big, &z, &sp, &w), 1.0);
    }

    #[test]
    fn d_tilde_matches_recomputation() {
        let (g, w, sp) = setup();
        let mut rng = stream(64, purpose::TEST, 0);
        let x = random_field_2l(&g, 0.5, 1.0, &mut rng);
        let y = random_field_2l(&g, 0.5, 1.0, &mut rng);
        let dt = d_tilde(&x, &y, &sp, &w);
        let recompute = (d_n(&x, &y, &sp, &w) * (1.0 + lyapunov_v(&x, &w) + lyapunov_v(&y, &w))).sqrt();
        assert_eq!(dt, recompute);
        assert_eq!(d_tilde(&x, &x.clone(), &sp, &w), 0.0);
    }
}
