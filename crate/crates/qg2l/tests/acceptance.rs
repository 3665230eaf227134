//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Criteria 6-9 share one Monte Carlo bundle (the coupled/single/short runs
//! of the synchronization configuration).

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use qg2l::coupling::{integrate_coupled, ControlSpec, CoupledRecord};
use qg2l::ergodics::constants::{alpha0_of, compute_constants, tv_bound_large, tv_bound_small, ErgodicityConstants};
use qg2l::ergodics::ensemble::{empirical_wasserstein, generate_ensemble, Ensemble, SemimetricKind};
use qg2l::ergodics::semimetric::{d_tilde, SemimetricParams};
use qg2l::ergodics::verify::{check_assumptions, contraction_factor, wasserstein_coupling_bound};
use qg2l::fft::SpectralEngine;
use qg2l::field::{Field2L, LayerWeights, ScalarField};
use qg2l::grid::Grid;
use qg2l::model::{integrate, noise_increment, ModelParams, NoiseSpec, Stepper, TrajectoryRecord};
use qg2l::sampling::{measure_k0_hat, purpose, random_field_2l, stream};
use qg2l::spectral::{
    a0_constant, bilinear_b, inner_l2, jacobian, norm_hk_sq, streamfunction_from_vorticity,
    triple_norm_minus1_sq, triple_norm_0_sq,
};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!("criterion {criterion}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn laplacian_2l(psi: &Field2L) -> Field2L {
    Field2L::from_layers(
        qg2l::spectral::laplacian(psi.layer(0)),
        qg2l::spectral::laplacian(psi.layer(1)),
    )
}

#[test]
fn criterion_01_norm_identity_suite() {
    let started = Instant::now();
    let g = Grid::new(std::f64::consts::PI / 2.0, 32);
    let w = LayerWeights::new(1.0, 2.0, 0.5, 0.25).unwrap();
    let a0 = a0_constant(g.lambda_1(), &w);
    let mut rng = stream(1001, purpose::TEST, 0);
    let mut worst_m1 = 0.0f64;
    let mut worst_0 = 0.0f64;
    for _ in 0..200 {
        let q = random_field_2l(&g, 1.0, 1.0, &mut rng);
        let psi = streamfunction_from_vorticity(&q, &w);
        let tm1 = triple_norm_minus1_sq(&q, &w);
        let t0 = triple_norm_0_sq(&q, &w);
        let ip = inner_l2(&q, &psi, &w);
        worst_m1 = worst_m1.max((ip + tm1).abs() / tm1);
        let ip0 = inner_l2(&q, &laplacian_2l(&psi), &w);
        worst_0 = worst_0.max((ip0 - t0).abs() / t0);
        let ns = norm_hk_sq(&psi, 1, &w);
        assert!(ns <= tm1 * (1.0 + 1e-12), "lower sandwich violated");
        assert!(tm1 <= a0 * ns * (1.0 + 1e-12), "upper sandwich violated");
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "01 norm identities",
        worst_m1 <= 1e-10 && worst_0 <= 1e-10 && elapsed < 10.0,
        &format!("max rel defect {worst_m1:.2e}/{worst_0:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_02_bilinear_structure() {
    let started = Instant::now();
    let g = Grid::new(std::f64::consts::PI / 2.0, 32);
    let w = LayerWeights::new(1.0, 1.0, 0.5, 0.5).unwrap();
    let mut eng = SpectralEngine::new(&g);
    let mut rng = stream(1002, purpose::TEST, 0);
    let mut worst_energy = 0.0f64;
    let mut worst_anti = 0.0f64;
    for _ in 0..1000 {
        let psi = random_field_2l(&g, 1.0, 1.2, &mut rng);
        let xi = random_field_2l(&g, 1.0, 1.2, &mut rng);
        let phi = random_field_2l(&g, 1.0, 1.2, &mut rng);
        let b_psi = bilinear_b(&mut eng, &psi, &xi, &w);
        let b_phi = bilinear_b(&mut eng, &phi, &xi, &w);
        let scale = norm_hk_sq(&b_psi, 0, &w).sqrt() * norm_hk_sq(&psi, 0, &w).sqrt();
        worst_energy = worst_energy.max(inner_l2(&b_psi, &psi, &w).abs() / scale);
        let lhs = inner_l2(&b_psi, &phi, &w);
        let rhs = inner_l2(&b_phi, &psi, &w);
        let anti_scale = lhs.abs().max(rhs.abs()).max(
            norm_hk_sq(&b_psi, 0, &w).sqrt() * norm_hk_sq(&phi, 0, &w).sqrt(),
        );
        worst_anti = worst_anti.max((lhs + rhs).abs() / anti_scale);
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "02 bilinear structure",
        worst_energy <= 1e-10 && worst_anti <= 1e-10 && elapsed < 30.0,
        &format!("energy defect {worst_energy:.2e}, antisymmetry defect {worst_anti:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_03_jacobian_exactness() {
    // J(sin x, sin y) = cos x cos y on L = 2π, N = 32, max-norm on the grid.
    let g = Grid::new(2.0 * std::f64::consts::PI, 32);
    let mut eng = SpectralEngine::new(&g);
    let mut a = ScalarField::zeros(&g);
    a.set_mode(1, 0, Complex64::new(0.0, -0.5));
    let mut b = ScalarField::zeros(&g);
    b.set_mode(0, 1, Complex64::new(0.0, -0.5));
    let j = jacobian(&mut eng, &a, &b);
    let mut buf = j.coeffs().to_vec();
    eng.inverse2d(&mut buf);
    let n = g.n();
    let mut max_err = 0.0f64;
    for iy in 0..n {
        for ix in 0..n {
            let x = g.l() * ix as f64 / n as f64;
            let y = g.l() * iy as f64 / n as f64;
            let expect = x.cos() * y.cos();
            max_err = max_err.max((buf[iy * n + ix].re - expect).abs());
        }
    }
    report("03 jacobian exactness", max_err <= 1e-12, &format!("max-norm error {max_err:.2e}"));
}

#[test]
fn criterion_04_noise_calibration() {
    let g = Grid::new(std::f64::consts::PI / 2.0, 32);
    let spec = NoiseSpec::power_law(&g, 1e-3, 2.0, 60).unwrap();
    let dt = 0.125;
    let n_draws = 10_000usize;
    let spot = [1usize, 3, 7, 20, 50];
    let mut rng = stream(1004, purpose::TEST, 0);
    let mut sums = [0.0f64; 5];
    let mut sq = [0.0f64; 5];
    for _ in 0..n_draws {
        let dw = noise_increment(&g, &spec, dt, &mut rng);
        for (i, &rank) in spot.iter().enumerate() {
            let m = g.mode(rank);
            let idx = g.index_of_freq(m.j.1) * g.n() + g.index_of_freq(m.j.0);
            let s = std::f64::consts::SQRT_2 * g.l() * dw.coeffs()[idx].re;
            sums[i] += s;
            sq[i] += s * s;
        }
    }
    let mut detail = String::new();
    let mut pass = true;
    for (i, &rank) in spot.iter().enumerate() {
        let mean = sums[i] / n_draws as f64;
        let var = sq[i] / n_draws as f64 - mean * mean;
        let expect = spec.sigma(rank) * dt;
        let se = expect * (2.0 / (n_draws as f64 - 1.0)).sqrt();
        let z = (var - expect).abs() / se;
        pass &= z <= 4.0;
        detail.push_str(&format!("k={rank} z={z:.2} "));
    }
    report("04 noise calibration", pass, detail.trim());
}

#[test]
fn criterion_05_deterministic_dissipation() {
    let g = Grid::new(std::f64::consts::PI / 2.0, 32);
    let w = LayerWeights::new(1.0, 1.0, 0.25, 0.25).unwrap();
    let p = ModelParams::new(g.clone(), 0.05, 0.5, 0.1, w, ScalarField::zeros(&g), 2e-3).unwrap();
    let mut st = Stepper::new(p.clone());
    let mut rng = stream(1005, purpose::INIT, 0);
    let q0 = random_field_2l(&g, 0.5, 1.0, &mut rng);
    let rec = integrate(&mut st, &q0, &NoiseSpec::none(), 5.0, &mut stream(1005, purpose::SIM, 0), 25).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for pair in rec.v_steps.windows(2) {
        worst = worst.max(pair[1] - pair[0]);
    }
    report(
        "05 deterministic dissipation",
        worst <= 1e-12,
        &format!("worst per-step V increment {worst:.2e} over {} steps", rec.v_steps.len() - 1),
    );
}

/// Shared Monte Carlo bundle for criteria 6-9: the synchronization
/// configuration with weak stratification (so the stated κ₀ = 2r decay is
/// attainable), ν = 1e-2, and the control band chosen by condition_n.
struct SyncBundle {
    consts: ErgodicityConstants,
    weights: LayerWeights,
    coupled: Vec<CoupledRecord>,
    singles: Vec<TrajectoryRecord>,
    short_xi: Vec<f64>,
    v0: f64,
    t_couple: f64,
}

fn sync_bundle() -> &'static SyncBundle {
    static BUNDLE: OnceLock<SyncBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        let master = 2026u64;
        let g = Grid::new(std::f64::consts::PI / 2.0, 32);
        let w = LayerWeights::new(1.0, 1.0, 0.25, 0.25).unwrap();
        let nu = 1e-2;
        let r = 0.5;
        let dt = 2e-3;
        let p = ModelParams::new(g.clone(), nu, r, 0.0, w, ScalarField::zeros(&g), dt).unwrap();
        let spec = NoiseSpec::power_law(&g, 1e-5, 2.0, 30).unwrap();
        // First band with ν - 2rλₙ⁻¹ > 0: λₙ = 128 at n = 12 on this grid.
        let cs = ControlSpec { gain: r, n_modes: 12 };
        cs.validate(&g, nu, &spec).expect("control band admissible");

        let mut eng = SpectralEngine::new(&g);
        let k0 = measure_k0_hat(&mut eng, &w, 1000, master);
        let consts = compute_constants(&p, &spec, &cs, None, k0);
        assert!(consts.flags.all_contraction_conditions(), "sync config must pass conditions: {:?}", consts.flags);

        let t_couple = 10.0 / r;
        let coupled: Vec<CoupledRecord> = (0..32usize)
            .into_par_iter()
            .map(|i| {
                let mut ir = stream(master, purpose::INIT, 100 + i as u64);
                let x0 = random_field_2l(&g, 0.1, 1.5, &mut ir);
                let y0 = random_field_2l(&g, 0.1, 1.5, &mut ir);
                let mut st = Stepper::new(p.clone());
                integrate_coupled(&mut st, &x0, &y0, &spec, &cs, t_couple, &mut stream(master, purpose::COUPLE, i as u64))
                    .expect("coupled run stays finite")
            })
            .collect();

        let mut ir = stream(master, purpose::INIT, 0);
        let q0 = random_field_2l(&g, 0.1, 1.5, &mut ir);
        let v0 = triple_norm_minus1_sq(&q0, &w);
        // A4 wants 64 trajectories; half the coupling horizon is plenty for
        // five probe times on the e^{-gamma1 t} scale.
        let singles: Vec<TrajectoryRecord> = (0..64usize)
            .into_par_iter()
            .map(|i| {
                let mut st = Stepper::new(p.clone());
                integrate(&mut st, &q0, &spec, 0.5 * t_couple, &mut stream(master, purpose::SIM, i as u64), 50)
                    .expect("single run stays finite")
            })
            .collect();

        let short_xi: Vec<f64> = (0..1000usize)
            .into_par_iter()
            .map(|i| {
                let mut st = Stepper::new(p.clone());
                integrate(&mut st, &q0, &spec, 0.2, &mut stream(master, purpose::SHORT, i as u64), usize::MAX)
                    .expect("short run stays finite")
                    .xi_hat(consts.gamma)
            })
            .collect();

        SyncBundle { consts, weights: w, coupled, singles, short_xi, v0, t_couple }
    })
}

#[test]
fn criterion_06_a1_synchronization() {
    let started = Instant::now();
    let b = sync_bundle();
    let rep = check_assumptions(&b.coupled, &b.singles, &b.short_xi, b.v0, &b.consts).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "06 A1 synchronization",
        rep.a1.pass && rep.a1.sync_median_ratio < 0.1,
        &format!(
            "pathwise margin {:.3e}, median ratio {:.3e} at T = {}, {elapsed:.1}s",
            rep.a1.worst_exponent_margin, rep.a1.sync_median_ratio, b.t_couple
        ),
    );
}

#[test]
fn criterion_07_a2_energy() {
    let b = sync_bundle();
    let rep = check_assumptions(&b.coupled, &b.singles, &b.short_xi, b.v0, &b.consts).unwrap();
    report(
        "07 A2 energy estimate",
        rep.a2.pass,
        &format!(
            "pathwise margin {:.3e}, tail {} on {} short runs",
            rep.a2.worst_margin,
            if rep.a2.tail_pass { "ok" } else { "violated" },
            rep.a2.short_runs
        ),
    );
}

#[test]
fn criterion_08_a3_exact() {
    let b = sync_bundle();
    let max_ratio = b.coupled.iter().map(|r| r.a3_max_ratio).fold(0.0f64, f64::max);
    report(
        "08 A3 control bound",
        max_ratio <= 1.0 + 1e-10,
        &format!("max |G|^2/(a^2 lambda_n |||xi|||^2) = {max_ratio:.12}"),
    );
}

#[test]
fn criterion_09_a4_lyapunov() {
    let b = sync_bundle();
    let rep = check_assumptions(&b.coupled, &b.singles, &b.short_xi, b.v0, &b.consts).unwrap();
    let detail: Vec<String> = rep
        .a4
        .points
        .iter()
        .map(|pt| format!("t={:.1}: {:.3e}<={:.3e}", pt.t, pt.mean_v, pt.bound))
        .collect();
    report("09 A4 Lyapunov drift", rep.a4.pass, &detail.join(", "));
}

#[test]
fn criterion_10_contraction() {
    let started = Instant::now();
    let master = 3030u64;
    let g = Grid::new(std::f64::consts::PI / 2.0, 32);
    let w = LayerWeights::new(1.0, 1.0, 0.25, 0.25).unwrap();
    let nu = 0.1;
    let r = 1.0;
    let dt = 2e-3;
    let p = ModelParams::new(g.clone(), nu, r, 0.0, w, ScalarField::zeros(&g), dt).unwrap();
    let spec = NoiseSpec::power_law(&g, 1e-5, 2.0, 30).unwrap();
    let cs = ControlSpec { gain: r, n_modes: 4 };
    cs.validate(&g, nu, &spec).unwrap();
    let mut eng = SpectralEngine::new(&g);
    let k0 = measure_k0_hat(&mut eng, &w, 400, master);
    let consts = compute_constants(&p, &spec, &cs, None, k0);
    assert!(consts.flags.all_contraction_conditions(), "contraction config must pass: {:?}", consts.flags);
    let sp = SemimetricParams { alpha: 0.5 * consts.alpha0, upsilon: consts.upsilon, n_scale: 1.0 };
    sp.validate(consts.alpha0).unwrap();

    // Distinct starts, normalized to V = 1.
    let g2 = g.clone();
    let normalize = |seed_idx: u64| -> Field2L {
        let mut ir = stream(master, purpose::INIT, seed_idx);
        let mut x = random_field_2l(&g2, 0.5, 1.5, &mut ir);
        let v = triple_norm_minus1_sq(&x, &w);
        x.scale(1.0 / v.sqrt());
        x
    };
    let x0 = normalize(0);
    let y0 = normalize(1);

    // Pilot coupled runs give the tenfold-decay horizon and the cost sample.
    let pilot: Vec<CoupledRecord> = (0..32usize)
        .into_par_iter()
        .map(|i| {
            let mut st = Stepper::new(p.clone());
            integrate_coupled(&mut st, &x0, &y0, &spec, &cs, 2.0, &mut stream(master, purpose::COUPLE, i as u64))
                .expect("pilot run stays finite")
        })
        .collect();
    let mut ratios: Vec<f64> = pilot
        .iter()
        .map(|rec| (rec.xi_v_steps.last().unwrap() / rec.xi_v_steps[0]).sqrt())
        .collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = ratios[ratios.len() / 2];
    assert!(median < 1.0, "coupled difference must decay, median ratio {median}");
    let t_c = 2.0 * std::f64::consts::LN_10 / -median.ln();

    let ens_x = generate_ensemble(&p, &spec, &x0, t_c, 64, master, purpose::ENSEMBLE_X).unwrap();
    let ens_y = generate_ensemble(&p, &spec, &y0, t_c, 64, master, purpose::ENSEMBLE_Y).unwrap();
    let contraction = contraction_factor(&x0, &y0, &ens_x, &ens_y, &sp, &w).unwrap();

    // Coupled runs from exactly (x0, y0) over [0, t_c] for the M_δ estimate.
    let bound_runs: Vec<CoupledRecord> = (0..32usize)
        .into_par_iter()
        .map(|i| {
            let mut st = Stepper::new(p.clone());
            integrate_coupled(&mut st, &x0, &y0, &spec, &cs, t_c, &mut stream(master, purpose::COUPLE_BOUND, i as u64))
                .expect("bound run stays finite")
        })
        .collect();
    let costs: Vec<f64> = bound_runs.iter().map(|r| *r.cost_steps.last().unwrap()).collect();
    let xi_a2: Vec<f64> = bound_runs.iter().map(|r| 2.0 * w.h1 * r.xi_hat(consts.gamma)).collect();
    let bound = wasserstein_coupling_bound(&x0, &y0, &consts, &sp, t_c, &costs, &xi_a2, &w).unwrap();

    let elapsed = started.elapsed().as_secs_f64();
    report(
        "10 contraction",
        contraction.rho_hat < 1.0 && bound.bound >= contraction.w_d_n && elapsed < 900.0,
        &format!(
            "rho_hat = {:.4} at t = {:.2}, coupling bound {:.4} >= empirical W_dN {:.4}, {elapsed:.1}s",
            contraction.rho_hat, t_c, bound.bound, contraction.w_d_n
        ),
    );
}

#[test]
fn criterion_11_formula_spot_checks() {
    let a = tv_bound_small(1.0, 0.5);
    let b = tv_bound_large(0.0, 0.5);
    let c = alpha0_of(2.0, 1.0);
    // κ₂ with ν=1, TrQ=1, λ₁=1, γ=1/4 via the constants assembly.
    let g = Grid::new(2.0 * std::f64::consts::PI, 16);
    let w = LayerWeights::new(1.0, 1.0, 1.0, 1.0).unwrap();
    let p = ModelParams::new(g.clone(), 1.0, 5.0, 0.0, w, ScalarField::zeros(&g), 1e-3).unwrap();
    let spec = NoiseSpec::from_sigmas(vec![0.5]).unwrap();
    let cs = ControlSpec { gain: 5.0, n_modes: 1 };
    let consts = compute_constants(&p, &spec, &cs, Some(0.25), 0.1);
    let pass = (a - 1.0f64.min(2f64.powf(1.0 / 3.0))).abs() <= 1e-15
        && (b - (1.0 - 1.0 / 48.0)).abs() <= 1e-15
        && (c - 0.5).abs() <= 1e-15
        && (consts.kappa2 - 0.5).abs() <= 1e-15;
    report(
        "11 formula spot checks",
        pass,
        &format!("tv_small={a}, tv_large={b}, alpha0={c}, kappa2={}", consts.kappa2),
    );
}

#[test]
fn criterion_12_negative_control() {
    // r = 0 with tiny viscosity: the viscosity-variant inequality fails and
    // cmd_verify must report an A1 failure and make no contraction claim.
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = "\
grid.l = 6.283185307179586
grid.n = 32
model.nu = 1e-3
model.r = 0.0
model.f1 = 0.25
model.f2 = 0.25
noise.law = powerlaw
noise.amplitude = 1e-6
noise.exponent = 2.0
noise.k_max = 20
control.a = 1e-3
control.n = 5
run.dt = 1e-3
run.t = 2.0
run.ensemble = 16
run.seed = 99
run.sample_every = 100
verify.pairs = 16
verify.short_runs = 64
verify.short_t = 0.2
verify.k0_trials = 200
verify.contraction_samples = 8
";
    let cfg = qg2l::harness::load_config_text(cfg_text).unwrap();
    let out = dir.path().join("verify");
    let code = qg2l::harness::cmd_verify(&cfg, &out, true).unwrap();
    let report_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    let a1_pass = report_json["assumptions"]["a1"]["pass"].as_bool().unwrap();
    let conditions = report_json["conditions_pass"].as_bool().unwrap();
    let contraction_claimed = !report_json["contraction"].is_null();
    let viscosity_flag = report_json["constants"]["flags"]["viscosity_variant"].as_bool().unwrap();
    let r_flag = report_json["constants"]["flags"]["r_gt_r0"].as_bool().unwrap();
    report(
        "12 negative control",
        code == 4 && !a1_pass && !conditions && !contraction_claimed && !viscosity_flag && !r_flag,
        &format!(
            "exit {code}, a1.pass={a1_pass}, conditions={conditions}, contraction claimed={contraction_claimed}"
        ),
    );
}

#[test]
fn criterion_13_replay_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "\
grid.l = 1.5707963267948966
grid.n = 32
model.nu = 0.1
model.r = 1.0
model.f1 = 0.25
model.f2 = 0.25
noise.law = powerlaw
noise.amplitude = 1e-4
noise.exponent = 2.0
noise.k_max = 12
run.dt = 2e-3
run.t = 0.5
run.ensemble = 3
run.seed = 31
",
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_qg2l");
    let out = dir.path().join("orig");
    let status = std::process::Command::new(bin)
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .args(["--threads", "2", "--quiet"])
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = out.join("manifest.json");
    let mut pass = true;
    let mut detail = String::new();
    for threads in ["1", "4"] {
        let replay_out = dir.path().join(format!("replay_{threads}"));
        let status = std::process::Command::new(bin)
            .args(["replay", "--manifest"])
            .arg(&manifest)
            .arg("--out")
            .arg(&replay_out)
            .args(["--threads", threads, "--quiet"])
            .status()
            .unwrap();
        pass &= status.success();
        detail.push_str(&format!("threads={threads}: exit {:?} ", status.code()));
    }
    report("13 replay determinism", pass, detail.trim());
}

/// Companion to the acceptance run: the measured bilinear constant is part
/// of the record (the closed-form k₀ is not available).
#[test]
fn record_measured_k0() {
    let b = sync_bundle();
    println!(
        "measured k0_hat = {:.6e} (k_B_hat = {:.6e}) on the sync grid",
        b.consts.k0_hat, b.consts.k_b_hat
    );
    assert!(b.consts.k0_hat > 0.0 && b.consts.k0_hat.is_finite());
    let _ = &b.weights;
}
