//! Generalized coupling: a controlled copy `Ỹ` of the system driven by the
//! same noise path as `X`, with the finite-dimensional feedback control
//!
//! ```text
//!   G(X, Ỹ) = a Πₙ Δ(ψ₁ - ψ̃₁)
//! ```
//!
//! acting on the top layer only, plus the accumulated Girsanov cost
//! `∫ |Qₙ^{-1/2} G|² ds` that governs absolute continuity of the controlled
//! noise law.

use rand::Rng;

use crate::field::{Field2L, LayerWeights, ScalarField};
use crate::model::{Blowup, NoiseSpec, Stepper};
use crate::spectral::{
    dissipation_from_psi, laplacian, project_low, sobolev_sq_scalar,
    streamfunction_from_vorticity, triple_norm_minus1_sq_from_psi,
};

/// Control gain and the number of controlled (lowest) eigen-pairs.
#[derive(Debug, Clone, Copy)]
pub struct ControlSpec {
    /// Gain `a`; the contraction proof takes `a = r`, but the two may be
    /// decoupled for viscosity-condition experiments.
    pub gain: f64,
    /// Number of controlled conjugate pairs `n`.
    pub n_modes: usize,
}

impl ControlSpec {
    /// Validate against a grid, viscosity and noise spectrum:
    /// `a > 0`, `σ_k > 0` for all `k ≤ n` (range-Q condition), and
    /// `ν - 2aλₙ⁻¹ > 0` (condition_n).
    pub fn validate(&self, grid: &crate::grid::Grid, nu: f64, spec: &NoiseSpec) -> Result<(), String> {
        if !(self.gain > 0.0) {
            return Err("control.a: gain must be strictly positive".to_string());
        }
        if self.n_modes < 1 || self.n_modes > grid.num_modes() {
            return Err(format!(
                "control.n: must be in 1..={} for this grid",
                grid.num_modes()
            ));
        }
        if !spec.supports_modes(self.n_modes) {
            return Err(format!(
                "control.n: sigma_k = 0 for some k <= {}: violates the range-Q condition (Pi_n H within range Q)",
                self.n_modes
            ));
        }
        let lam_n = grid.lambda_n(self.n_modes);
        if !(nu - 2.0 * self.gain / lam_n > 0.0) {
            return Err(format!(
                "control.n: condition_n violated: nu - 2a/lambda_n = {} <= 0",
                nu - 2.0 * self.gain / lam_n
            ));
        }
        Ok(())
    }
}

/// Coupled pair sharing one noise path.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub x: Field2L,
    pub y_tilde: Field2L,
    /// Accumulated `∫ |Qₙ^{-1/2} G|² ds`, nondecreasing in `t`.
    pub girsanov_cost: f64,
    pub t: f64,
}

impl CoupledState {
    pub fn new(x: Field2L, y_tilde: Field2L) -> CoupledState {
        assert!(x.grid().same_as(y_tilde.grid()), "grid mismatch");
        CoupledState { x, y_tilde, girsanov_cost: 0.0, t: 0.0 }
    }
}

/// `G = a Πₙ Δ(ψ₁ - ψ̃₁)` from the streamfunction difference directly.
pub fn control_g_from_psi_diff(phi1: &ScalarField, cs: &ControlSpec) -> ScalarField {
    let mut g = project_low(&laplacian(phi1), cs.n_modes);
    g.scale(cs.gain);
    g
}

/// `G(X, Ỹ)`, supported on the first `n` pairs of layer 1 only.
pub fn control_g(x: &Field2L, y_tilde: &Field2L, cs: &ControlSpec, w: &LayerWeights) -> ScalarField {
    assert!(x.grid().same_as(y_tilde.grid()), "grid mismatch");
    let psi_x = streamfunction_from_vorticity(x, w);
    let psi_y = streamfunction_from_vorticity(y_tilde, w);
    let mut phi1 = psi_x.layer(0).clone();
    phi1.axpy(-1.0, psi_y.layer(0));
    control_g_from_psi_diff(&phi1, cs)
}

/// `∫|Qₙ^{-1/2}G|²` increment over one step: `dt Σ_{k≤n} |Ĝ_k|²/σ_k` in the
/// orthonormal eigenbasis, which per conjugate pair is `2L²|Ĝ(k)|²/σ_k`.
pub fn girsanov_cost_increment(g: &ScalarField, spec: &NoiseSpec, cs: &ControlSpec, dt: f64) -> f64 {
    let grid = g.grid();
    let two_l2 = 2.0 * grid.parseval();
    let mut acc = 0.0;
    for rank in 1..=cs.n_modes {
        let m = grid.mode(rank);
        let idx = grid.index_of_freq(m.j.1) * grid.n() + grid.index_of_freq(m.j.0);
        let c2 = g.coeffs()[idx].norm_sqr();
        if c2 > 0.0 {
            acc += two_l2 * c2 / spec.sigma(rank);
        }
    }
    acc * dt
}

/// Advance a coupled pair one step: `X` by the plain scheme, `Ỹ` by the same
/// scheme with forcing `f + G(X,Ỹ)`, both receiving the same realization
/// `dW`. The cost accumulates the explicit control actually applied.
pub fn step_coupled(
    stepper: &mut Stepper,
    s: &CoupledState,
    cs: &ControlSpec,
    spec: &NoiseSpec,
    dw: &ScalarField,
) -> Result<CoupledState, Blowup> {
    let w = stepper.params().weights;
    let dt = stepper.params().dt;
    let psi_x = streamfunction_from_vorticity(&s.x, &w);
    let psi_y = streamfunction_from_vorticity(&s.y_tilde, &w);
    let mut phi1 = psi_x.layer(0).clone();
    phi1.axpy(-1.0, psi_y.layer(0));
    let g = control_g_from_psi_diff(&phi1, cs);

    let mut x_next = stepper.deterministic_substep(&s.x, &psi_x, None);
    x_next.layer_mut(0).axpy(1.0, dw);
    let mut y_next = stepper.deterministic_substep(&s.y_tilde, &psi_y, Some(&g));
    y_next.layer_mut(0).axpy(1.0, dw);
    let t_next = s.t + dt;
    if !x_next.is_finite() || !y_next.is_finite() {
        return Err(Blowup {
            t: t_next,
            record: Box::new(crate::model::TrajectoryRecord {
                dt,
                times: vec![],
                v: vec![],
                dissipation: vec![],
                energy1: vec![],
                energy2: vec![],
                v_steps: vec![],
                diss_integral_steps: vec![],
                mart_x_steps: vec![],
                mart_qv_steps: vec![],
                initial_state: s.x.clone(),
                final_state: s.x.clone(),
            }),
        });
    }
    Ok(CoupledState {
        x: x_next,
        y_tilde: y_next,
        girsanov_cost: s.girsanov_cost + girsanov_cost_increment(&g, spec, cs, dt),
        t: t_next,
    })
}

/// Per-step diagnostics of one coupled run, in the same layout as
/// `TrajectoryRecord`: entry `m` is at time `m·dt`.
#[derive(Debug, Clone)]
pub struct CoupledRecord {
    pub dt: f64,
    /// `|||ξ|||₋₁²` with `ξ = X - Ỹ`.
    pub xi_v_steps: Vec<f64>,
    /// Accumulated Girsanov cost.
    pub cost_steps: Vec<f64>,
    /// `|G|²` (scalar L²) evaluated at each step's state.
    pub g2_steps: Vec<f64>,
    /// Running max of `|G|² / (a²λₙ |||ξ|||₋₁²)` over all steps.
    pub a3_max_ratio: f64,
    /// X-side diagnostics for the energy estimates.
    pub x_v_steps: Vec<f64>,
    pub x_diss_integral_steps: Vec<f64>,
    pub x_mart_x_steps: Vec<f64>,
    pub x_mart_qv_steps: Vec<f64>,
    pub x_final: Field2L,
    pub y_final: Field2L,
}

impl CoupledRecord {
    pub fn xi_hat(&self, gamma: f64) -> f64 {
        self.x_mart_x_steps
            .iter()
            .zip(self.x_mart_qv_steps.iter())
            .map(|(x, qv)| if *qv == 0.0 { *x } else { x - gamma * qv })
            .fold(0.0f64, f64::max)
    }
}

/// Integrate a coupled pair over `T ≈ steps·dt` with fresh shared noise.
pub fn integrate_coupled<R: Rng>(
    stepper: &mut Stepper,
    x0: &Field2L,
    y0: &Field2L,
    spec: &NoiseSpec,
    cs: &ControlSpec,
    t_horizon: f64,
    rng: &mut R,
) -> Result<CoupledRecord, Blowup> {
    let p = stepper.params().clone();
    let grid = p.grid.clone();
    let w = p.weights;
    let dt = p.dt;
    let steps = (t_horizon / dt).round() as usize;
    let lam_n = grid.lambda_n(cs.n_modes);
    let a2_lam = cs.gain * cs.gain * lam_n;

    let active: Vec<(usize, f64)> = spec
        .sigmas()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > 0.0)
        .map(|(i, s)| {
            let m = grid.mode(i + 1);
            (grid.index_of_freq(m.j.1) * grid.n() + grid.index_of_freq(m.j.0), *s)
        })
        .collect();
    let two_l2 = 2.0 * grid.parseval();

    let mut rec = CoupledRecord {
        dt,
        xi_v_steps: Vec::with_capacity(steps + 1),
        cost_steps: Vec::with_capacity(steps + 1),
        g2_steps: Vec::with_capacity(steps + 1),
        a3_max_ratio: 0.0,
        x_v_steps: Vec::with_capacity(steps + 1),
        x_diss_integral_steps: Vec::with_capacity(steps + 1),
        x_mart_x_steps: Vec::with_capacity(steps + 1),
        x_mart_qv_steps: Vec::with_capacity(steps + 1),
        x_final: x0.clone(),
        y_final: y0.clone(),
    };

    let mut x = x0.clone();
    let mut y = y0.clone();
    let mut cost = 0.0;
    let mut diss_integral = 0.0;
    let mut mart_x = 0.0;
    let mut mart_qv = 0.0;

    for step_idx in 0..=steps {
        let t_next = (step_idx + 1) as f64 * dt;
        let psi_x = streamfunction_from_vorticity(&x, &w);
        let psi_y = streamfunction_from_vorticity(&y, &w);
        let mut phi = psi_x.clone();
        phi.axpy(-1.0, &psi_y);
        let xi_v = triple_norm_minus1_sq_from_psi(&phi, &w);
        let g = control_g_from_psi_diff(phi.layer(0), cs);
        let g2 = sobolev_sq_scalar(&g, 0);

        rec.xi_v_steps.push(xi_v);
        rec.cost_steps.push(cost);
        rec.g2_steps.push(g2);
        rec.x_v_steps.push(triple_norm_minus1_sq_from_psi(&psi_x, &w));
        rec.x_diss_integral_steps.push(diss_integral);
        rec.x_mart_x_steps.push(mart_x);
        rec.x_mart_qv_steps.push(mart_qv);
        if xi_v > 0.0 {
            rec.a3_max_ratio = rec.a3_max_ratio.max(g2 / (a2_lam * xi_v));
        }
        if step_idx == steps {
            break;
        }

        diss_integral += dt * dissipation_from_psi(&psi_x, &w);
        cost += girsanov_cost_increment(&g, spec, cs, dt);

        let x_star = stepper.deterministic_substep(&x, &psi_x, None);
        let psi_star = streamfunction_from_vorticity(&x_star, &w);
        let y_star = stepper.deterministic_substep(&y, &psi_y, Some(&g));

        let dw = crate::model::noise_increment(&grid, spec, dt, rng);
        for &(idx, sig) in &active {
            let p1 = psi_star.layer(0).coeffs()[idx];
            let wv = dw.coeffs()[idx];
            mart_x -= two_l2 * (p1.re * wv.re + p1.im * wv.im);
            mart_qv += dt * sig * two_l2 * p1.norm_sqr();
        }

        x = x_star;
        x.layer_mut(0).axpy(1.0, &dw);
        y = y_star;
        y.layer_mut(0).axpy(1.0, &dw);
        if !x.is_finite() || !y.is_finite() {
            rec.x_final = x0.clone();
            return Err(Blowup {
                t: t_next,
                record: Box::new(crate::model::TrajectoryRecord {
                    dt,
                    times: vec![],
                    v: vec![],
                    dissipation: vec![],
                    energy1: vec![],
                    energy2: vec![],
                    v_steps: rec.x_v_steps.clone(),
                    diss_integral_steps: rec.x_diss_integral_steps.clone(),
                    mart_x_steps: rec.x_mart_x_steps.clone(),
                    mart_qv_steps: rec.x_mart_qv_steps.clone(),
                    initial_state: x0.clone(),
                    final_state: x0.clone(),
                }),
            });
        }
    }
    rec.x_final = x;
    rec.y_final = y;
    Ok(rec)
}

/// Lemma-level a-priori bound on the realized Girsanov cost:
///
/// ```text
///   (c ‖Qₙ^{-1/2}‖² / χ) · |||x₀-y₀|||₋₁² · exp(υ(|||x₀|||₋₁² + Ξ)) · (1 - e^{-χt})
/// ```
///
/// with `c = a²λₙ`. `Ξ` is the realized energy-estimate variable at the A2
/// scale (i.e. `2h₁Ξ̂` for this model). Requires `χ > 0`.
#[allow(clippy::too_many_arguments)]
pub fn girsanov_cost_bound(
    x0: &Field2L,
    y0: &Field2L,
    chi: f64,
    upsilon: f64,
    xi_a2: f64,
    t: f64,
    cs: &ControlSpec,
    spec: &NoiseSpec,
    w: &LayerWeights,
) -> f64 {
    assert!(chi > 0.0, "girsanov_cost_bound requires chi > 0");
    let grid = x0.grid();
    let c = cs.gain * cs.gain * grid.lambda_n(cs.n_modes);
    let qn = spec.qn_inv_norm_sq(cs.n_modes);
    let diff = x0.minus(y0);
    let d2 = crate::spectral::triple_norm_minus1_sq(&diff, w);
    let v0 = crate::spectral::triple_norm_minus1_sq(x0, w);
    c * qn / chi * d2 * (upsilon * (v0 + xi_a2)).exp() * (1.0 - (-chi * t).exp())
}
