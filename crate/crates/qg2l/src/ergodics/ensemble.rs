//! Monte Carlo representation of a transition law and the empirical
//! Wasserstein semimetric between two of them (exact assignment, upper-biased
//! versus the true infimum over couplings).

use rayon::prelude::*;

use crate::ergodics::assignment::min_cost_assignment;
use crate::ergodics::semimetric::{lyapunov_v, SemimetricParams};
use crate::field::{Field2L, LayerWeights};
use crate::model::{integrate, Blowup, ModelParams, NoiseSpec, Stepper};
use crate::sampling::stream;
use crate::spectral::triple_norm_minus1_sq;

/// Samples from one transition law `P_t(q₀, ·)`, all on the same grid and at
/// the same time stamp, with their seed lineage recorded.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub states: Vec<Field2L>,
    pub t: f64,
    pub master_seed: u64,
    pub purpose: u32,
}

impl Ensemble {
    pub fn new(states: Vec<Field2L>, t: f64, master_seed: u64, purpose: u32) -> Ensemble {
        assert!(!states.is_empty(), "ensemble must be nonempty");
        let grid = states[0].grid().clone();
        assert!(states.iter().all(|s| s.grid().same_as(&grid)), "mixed grids in ensemble");
        Ensemble { states, t, master_seed, purpose }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Integrate `n` independent trajectories from `q0` to time `t`; trajectory
/// `i` draws from the stream `(master, purpose, base_index + i)`, so the
/// result does not depend on scheduling.
pub fn generate_ensemble_offset(
    p: &ModelParams,
    spec: &NoiseSpec,
    q0: &Field2L,
    t: f64,
    n: usize,
    master_seed: u64,
    purpose: u32,
    base_index: u64,
) -> Result<Ensemble, Blowup> {
    let states: Result<Vec<Field2L>, Blowup> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut stepper = Stepper::new(p.clone());
            let mut rng = stream(master_seed, purpose, base_index + i as u64);
            integrate(&mut stepper, q0, spec, t, &mut rng, usize::MAX).map(|rec| rec.final_state)
        })
        .collect();
    Ok(Ensemble::new(states?, t, master_seed, purpose))
}

pub fn generate_ensemble(
    p: &ModelParams,
    spec: &NoiseSpec,
    q0: &Field2L,
    t: f64,
    n: usize,
    master_seed: u64,
    purpose: u32,
) -> Result<Ensemble, Blowup> {
    generate_ensemble_offset(p, spec, q0, t, n, master_seed, purpose, 0)
}

/// Which semimetric the assignment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemimetricKind {
    DN,
    DTilde,
}

/// Pairwise cost matrix with per-sample Lyapunov values precomputed.
fn cost_matrix(
    a: &Ensemble,
    b: &Ensemble,
    sp: &SemimetricParams,
    w: &LayerWeights,
    kind: SemimetricKind,
) -> Vec<Vec<f64>> {
    let va: Vec<f64> = a.states.iter().map(|x| lyapunov_v(x, w)).collect();
    let vb: Vec<f64> = b.states.iter().map(|x| lyapunov_v(x, w)).collect();
    a.states
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            b.states
                .iter()
                .enumerate()
                .map(|(j, y)| {
                    let diff_sq = triple_norm_minus1_sq(&x.minus(y), w);
                    let pow = diff_sq.powf(sp.alpha);
                    let txy = sp.n_scale * pow * (sp.alpha * sp.upsilon * va[i]).exp();
                    let tyx = sp.n_scale * pow * (sp.alpha * sp.upsilon * vb[j]).exp();
                    let dn = txy.min(tyx).min(1.0);
                    match kind {
                        SemimetricKind::DN => dn,
                        SemimetricKind::DTilde => (dn * (1.0 + va[i] + vb[j])).sqrt(),
                    }
                })
                .collect()
        })
        .collect()
}

/// Empirical Wasserstein semimetric between two equally-sized ensembles via
/// exact minimum-cost perfect matching: `(1/n)·min_π Σ d(a_i, b_{π(i)})`.
/// Upper-biased for the distance between the underlying laws.
pub fn empirical_wasserstein(
    a: &Ensemble,
    b: &Ensemble,
    sp: &SemimetricParams,
    w: &LayerWeights,
    kind: SemimetricKind,
) -> f64 {
    assert_eq!(a.len(), b.len(), "ensemble size mismatch");
    assert!(a.len() <= 128, "assignment capped at 128 samples");
    let cost = cost_matrix(a, b, sp, w, kind);
    let (_, total) = min_cost_assignment(&cost);
    total / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodics::semimetric::{d_n, d_tilde};
    use crate::grid::Grid;
    use crate::sampling::{purpose, random_field_2l};

    fn setup() -> (std::sync::Arc<Grid>, LayerWeights, SemimetricParams) {
        let g = Grid::new(2.0 * std::f64::consts::PI, 16);
        let w = LayerWeights::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let sp = SemimetricParams { alpha: 0.2, upsilon: 1.0, n_scale: 4.0 };
        (g, w, sp)
    }

    #[test]
    fn identical_ensembles_have_zero_distance() {
        let (g, w, sp) = setup();
        let mut rng = stream(81, purpose::TEST, 0);
        let states: Vec<Field2L> = (0..6).map(|_| random_field_2l(&g, 0.5, 1.0, &mut rng)).collect();
        let a = Ensemble::new(states.clone(), 1.0, 81, purpose::TEST);
        let b = Ensemble::new(states, 1.0, 81, purpose::TEST);
        assert_eq!(empirical_wasserstein(&a, &b, &sp, &w, SemimetricKind::DN), 0.0);
        assert_eq!(empirical_wasserstein(&a, &b, &sp, &w, SemimetricKind::DTilde), 0.0);
    }

    #[test]
    fn singletons_reduce_to_the_semimetric() {
        let (g, w, sp) = setup();
        let mut rng = stream(82, purpose::TEST, 0);
        let x = random_field_2l(&g, 0.5, 1.0, &mut rng);
        let y = random_field_2l(&g, 0.5, 1.0, &mut rng);
        let a = Ensemble::new(vec![x.clone()], 0.0, 82, purpose::TEST);
        let b = Ensemble::new(vec![y.clone()], 0.0, 82, purpose::TEST);
        let got = empirical_wasserstein(&a, &b, &sp, &w, SemimetricKind::DN);
        assert!((got - d_n(&x, &y, &sp, &w)).abs() < 1e-14);
        let got_t = empirical_wasserstein(&a, &b, &sp, &w, SemimetricKind::DTilde);
        assert!((got_t - d_tilde(&x, &y, &sp, &w)).abs() < 1e-14);
    }

    #[test]
    fn three_samples_match_permutation_brute_force() {
        let (g, w, sp) = setup();
        let mut rng = stream(83, purpose::TEST, 0);
        let xs: Vec<Field2L> = (0..3).map(|_| random_field_2l(&g, 0.5, 1.0, &mut rng)).collect();
        let ys: Vec<Field2L> = (0..3).map(|_| random_field_2l(&g, 0.5, 1.0, &mut rng)).collect();
        let a = Ensemble::new(xs.clone(), 0.0, 83, purpose::TEST);
        let b = Ensemble::new(ys.clone(), 0.0, 83, purpose::TEST);
        let got = empirical_wasserstein(&a, &b, &sp, &w, SemimetricKind::DTilde);
        // All 6 permutations by hand.
        let perms: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let best = perms
            .iter()
            .map(|p| {
                (0..3).map(|i| d_tilde(&xs[i], &ys[p[i]], &sp, &w)).sum::<f64>() / 3.0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((got - best).abs() < 1e-12, "{got} vs {best}");
        // Optimality: never above the mean cost of any fixed permutation.
        for p in perms {
            let fixed = (0..3).map(|i| d_tilde(&xs[i], &ys[p[i]], &sp, &w)).sum::<f64>() / 3.0;
            assert!(got <= fixed + 1e-12);
        }
    }

    #[test]
    fn ensemble_generation_is_schedule_independent() {
        let (g, w, _sp) = setup();
        let p = ModelParams::new(
            g.clone(),
            0.5,
            1.0,
            0.0,
            w,
            crate::field::ScalarField::zeros(&g),
            1e-2,
        )
        .unwrap();
        let spec = NoiseSpec::power_law(&g, 1e-3, 1.5, 12).unwrap();
        let mut rng = stream(84, purpose::INIT, 0);
        let q0 = random_field_2l(&g, 0.5, 1.0, &mut rng);
        let e1 = generate_ensemble(&p, &spec, &q0, 0.2, 8, 84, purpose::ENSEMBLE_X).unwrap();
        // Re-run inside a single-thread pool: identical states regardless.
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let e2 = pool
            .install(|| generate_ensemble(&p, &spec, &q0, 0.2, 8, 84, purpose::ENSEMBLE_X))
            .unwrap();
        for (s1, s2) in e1.states.iter().zip(e2.states.iter()) {
            assert!(s1.bit_eq(s2));
        }
    }
}
