//! The five harness commands. Every command is a pure function of
//! (config, seeds) at the byte level of its artifacts; wall-clock time goes
//! only into the manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint;
use crate::coupling::{integrate_coupled, CoupledRecord};
use crate::ergodics::constants::{compute_constants, ErgodicityConstants};
use crate::ergodics::ensemble::{generate_ensemble_offset, Ensemble};
use crate::ergodics::semimetric::{d_tilde, SemimetricParams};
use crate::ergodics::verify::{
    check_a1, check_a3, check_assumptions, contraction_factor, smallness_estimates,
    spectral_gap_check, wasserstein_coupling_bound, AssumptionsReport, ContractionReport,
    CouplingBoundReport, SmallnessEstimates, SpectralGapReport, TestObservable,
};
use crate::field::Field2L;
use crate::fft::SpectralEngine;
use crate::grid::Grid;
use crate::harness::config::{ConfigError, ExperimentConfig, InitSpec};
use crate::harness::manifest::{checksum_file, sha256_hex, ArtifactChecksum, RunManifest, MANIFEST_SCHEMA_VERSION};
use crate::model::{integrate, Blowup, Stepper, TrajectoryRecord};
use crate::sampling::{measure_k0_hat, purpose, random_field_2l, stream};
use crate::spectral::triple_norm_minus1_sq;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical blow-up at t = {t}")]
    Blowup { t: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl HarnessError {
    /// Exit codes: 0 success, 2 validation failure, 3 numerical blow-up,
    /// 4 condition-check failure, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(ConfigError::Condition { .. }) => 4,
            HarnessError::Config(_) => 2,
            HarnessError::Blowup { .. } => 3,
            HarnessError::Io(_) => 1,
            HarnessError::Other(_) => 1,
        }
    }
}

impl From<Blowup> for HarnessError {
    fn from(b: Blowup) -> HarnessError {
        HarnessError::Blowup { t: b.t }
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn init_state(cfg: &ExperimentConfig, grid: &Arc<Grid>, index: u64) -> Result<Field2L, HarnessError> {
    match &cfg.init {
        InitSpec::Zero => Ok(Field2L::zeros(grid)),
        InitSpec::Random { amplitude, slope } => {
            let mut rng = stream(cfg.seed, purpose::INIT, index);
            Ok(random_field_2l(grid, *amplitude, *slope, &mut rng))
        }
        InitSpec::Checkpoint(path) => {
            let (field, _t) = checkpoint::read_file(Path::new(path))?
                .map_err(|e| HarnessError::Other(format!("checkpoint {path}: {e}")))?;
            if !field.grid().same_as(grid) {
                return Err(HarnessError::Other(format!(
                    "checkpoint {path}: grid mismatch (expected N={} L={})",
                    grid.n(),
                    grid.l()
                )));
            }
            Ok(field)
        }
    }
}

fn trajectory_csv(rec: &TrajectoryRecord) -> String {
    let mut out = String::from("t,v,dissipation,energy1,energy2\n");
    for i in 1..rec.times.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(rec.times[i]),
            fmt_f64(rec.v[i]),
            fmt_f64(rec.dissipation[i]),
            fmt_f64(rec.energy1[i]),
            fmt_f64(rec.energy2[i]),
        ));
    }
    out
}

fn pair_csv(rec: &CoupledRecord, sample_every: usize) -> String {
    let mut out = String::from("t,xi_v,girsanov_cost,g_norm2\n");
    let steps = rec.xi_v_steps.len() - 1;
    for m in 1..=steps {
        if m % sample_every == 0 || m == steps {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(m as f64 * rec.dt),
                fmt_f64(rec.xi_v_steps[m]),
                fmt_f64(rec.cost_steps[m]),
                fmt_f64(rec.g2_steps[m]),
            ));
        }
    }
    out
}

struct ArtifactWriter {
    dir: PathBuf,
    names: Vec<String>,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> std::io::Result<ArtifactWriter> {
        std::fs::create_dir_all(dir)?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), names: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn finish(
        self,
        command: &str,
        cfg: &ExperimentConfig,
        started: Instant,
    ) -> std::io::Result<Vec<ArtifactChecksum>> {
        let mut artifacts = Vec::new();
        for name in &self.names {
            artifacts.push(checksum_file(&self.dir, name)?);
        }
        let config_text = cfg.normalized_text();
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(config_text.as_bytes()),
            config_text,
            master_seed: cfg.seed,
            threads: cfg.threads,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            artifacts: artifacts.clone(),
        };
        manifest.write(&self.dir)?;
        Ok(artifacts)
    }
}

fn k0_hat_for(cfg: &ExperimentConfig, grid: &Arc<Grid>) -> f64 {
    match cfg.k0_hat_override {
        Some(k) => k,
        None => {
            let mut eng = SpectralEngine::new(grid);
            measure_k0_hat(&mut eng, &cfg.weights(), cfg.k0_trials, cfg.seed)
        }
    }
}

/// Single or ensemble integration; writes per-member time-series CSV and
/// initial/final checkpoints. A blow-up still writes the partial series and
/// the last finite state before reporting exit code 3.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<i32, HarnessError> {
    let started = Instant::now();
    let p = cfg.model_params()?;
    let grid = p.grid.clone();
    let spec = cfg.noise_spec(&grid);
    let mut writer = ArtifactWriter::new(out)?;

    let inits: Vec<Field2L> = (0..cfg.ensemble)
        .map(|m| init_state(cfg, &grid, m as u64))
        .collect::<Result<_, _>>()?;
    let results: Vec<Result<TrajectoryRecord, Blowup>> = inits
        .par_iter()
        .enumerate()
        .map(|(m, q0)| {
            let mut stepper = Stepper::new(p.clone());
            let mut rng = stream(cfg.seed, purpose::SIM, m as u64);
            integrate(&mut stepper, q0, &spec, cfg.t_horizon, &mut rng, cfg.sample_every)
        })
        .collect();

    let mut blowup_at: Option<f64> = None;
    for (m, (q0, res)) in inits.iter().zip(results.iter()).enumerate() {
        writer.write(&format!("checkpoint_{m:03}_t0.qg2l"), &checkpoint::encode(q0, 0.0))?;
        match res {
            Ok(rec) => {
                writer.write(&format!("trajectory_{m:03}.csv"), trajectory_csv(rec).as_bytes())?;
                let t_final = rec.times.last().copied().unwrap_or(0.0);
                writer.write(
                    &format!("checkpoint_{m:03}_final.qg2l"),
                    &checkpoint::encode(&rec.final_state, t_final),
                )?;
            }
            Err(b) => {
                writer.write(&format!("trajectory_{m:03}.csv"), trajectory_csv(&b.record).as_bytes())?;
                let t_last = b.t - p.dt;
                writer.write(
                    &format!("checkpoint_{m:03}_lastgood.qg2l"),
                    &checkpoint::encode(&b.record.final_state, t_last),
                )?;
                blowup_at.get_or_insert(b.t);
            }
        }
    }
    writer.finish("simulate", cfg, started)?;
    if let Some(t) = blowup_at {
        if !quiet {
            eprintln!("blow-up at t = {t}; last good state checkpointed");
        }
        return Err(HarnessError::Blowup { t });
    }
    if !quiet {
        println!("simulate: {} member(s), T = {}, artifacts in {}", cfg.ensemble, cfg.t_horizon, out.display());
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct CoupleSummary {
    schema_version: u32,
    pairs: usize,
    k0_hat: f64,
    a1: crate::ergodics::verify::A1Report,
    a3: crate::ergodics::verify::A3Report,
    terminal_xi_ratios: Vec<f64>,
    constants: ErgodicityConstants,
}

/// Coupled pairs sharing a noise path; writes per-pair CSV and an A1/A3
/// verdict summary. Refuses configurations violating condition_n or range-Q.
pub fn cmd_couple(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<i32, HarnessError> {
    let started = Instant::now();
    cfg.check_coupling_conditions()?;
    let p = cfg.model_params()?;
    let grid = p.grid.clone();
    let spec = cfg.noise_spec(&grid);
    let cs = cfg.control_spec();
    let mut writer = ArtifactWriter::new(out)?;

    let pairs: Vec<(Field2L, Field2L)> = (0..cfg.ensemble)
        .map(|i| {
            Ok((
                init_state(cfg, &grid, 2 * i as u64)?,
                init_state(cfg, &grid, 2 * i as u64 + 1)?,
            ))
        })
        .collect::<Result<_, HarnessError>>()?;
    let results: Vec<Result<CoupledRecord, Blowup>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x0, y0))| {
            let mut stepper = Stepper::new(p.clone());
            let mut rng = stream(cfg.seed, purpose::COUPLE, i as u64);
            integrate_coupled(&mut stepper, x0, y0, &spec, &cs, cfg.t_horizon, &mut rng)
        })
        .collect();

    let mut records = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => {
                writer.write(&format!("pair_{i:03}.csv"), pair_csv(&rec, cfg.sample_every).as_bytes())?;
                records.push(rec);
            }
            Err(b) => {
                writer.finish("couple", cfg, started)?;
                return Err(b.into());
            }
        }
    }

    let k0 = k0_hat_for(cfg, &grid);
    let consts = compute_constants(&p, &spec, &cs, cfg.gamma, k0);
    let a1 = check_a1(&records, &consts);
    let a3 = check_a3(&records);
    let ratios: Vec<f64> = records
        .iter()
        .filter(|r| r.xi_v_steps[0] > 0.0)
        .map(|r| (r.xi_v_steps.last().unwrap() / r.xi_v_steps[0]).sqrt())
        .collect();
    let summary = CoupleSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        pairs: records.len(),
        k0_hat: k0,
        a1,
        a3,
        terminal_xi_ratios: ratios,
        constants: consts,
    };
    writer.write(
        "couple_summary.json",
        serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes(),
    )?;
    writer.finish("couple", cfg, started)?;
    if !quiet {
        println!(
            "couple: {} pair(s), A1 {} A3 {}, summary in {}",
            summary.pairs,
            if summary.a1.pass { "pass" } else { "FAIL" },
            if summary.a3.pass { "pass" } else { "FAIL" },
            out.display()
        );
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
struct ConstantsReport {
    schema_version: u32,
    k0_hat: f64,
    constants: ErgodicityConstants,
}

/// Print and persist the constants table.
pub fn cmd_constants(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<i32, HarnessError> {
    let started = Instant::now();
    let p = cfg.model_params()?;
    let grid = p.grid.clone();
    let spec = cfg.noise_spec(&grid);
    let cs = cfg.control_spec();
    let k0 = k0_hat_for(cfg, &grid);
    let consts = compute_constants(&p, &spec, &cs, cfg.gamma, k0);
    let mut writer = ArtifactWriter::new(out)?;
    let report = ConstantsReport { schema_version: REPORT_SCHEMA_VERSION, k0_hat: k0, constants: consts.clone() };
    writer.write(
        "constants.json",
        serde_json::to_string_pretty(&report).expect("constants serialize").as_bytes(),
    )?;
    writer.finish("constants", cfg, started)?;
    if !quiet {
        println!("kappa0              = {}", consts.kappa0);
        println!("kappa1              = {}", consts.kappa1);
        println!("kappa2              = {}", consts.kappa2);
        println!("kappa3              = {}", consts.kappa3);
        println!("upsilon             = {}", consts.upsilon);
        println!("chi                 = {}", consts.chi);
        println!("gamma               = {}", consts.gamma);
        println!("alpha0              = {}", consts.alpha0);
        println!("gamma1              = {}", consts.gamma1);
        println!("K                   = {}", consts.k_const);
        println!("K_V                 = {}", consts.k_v);
        println!("T_Q                 = {}", consts.t_q);
        println!("Tr Q                = {}", consts.tr_q);
        println!("r0                  = {}", consts.r0);
        println!("a0                  = {}", consts.a0);
        println!("lambda_1            = {}", consts.lambda_1);
        println!("lambda_n            = {}", consts.lambda_n);
        println!("k0_hat (measured)   = {}", consts.k0_hat);
        println!("k_B_hat             = {}", consts.k_b_hat);
        println!("flag r > r0         = {}", consts.flags.r_gt_r0);
        println!("flag condition_n    = {}", consts.flags.condition_n);
        println!("flag viscosity      = {}", consts.flags.viscosity_variant);
        println!("flag chi > 0        = {}", consts.flags.chi_positive);
        println!("flag kappa2 > 0     = {}", consts.flags.kappa2_positive);
        println!("flag gamma valid    = {}", consts.flags.gamma_valid);
        println!("flag sigma support  = {}", consts.flags.sigma_support);
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub k0_hat: f64,
    pub constants: ErgodicityConstants,
    pub semimetric: SemimetricParams,
    pub conditions_pass: bool,
    pub assumptions: Option<AssumptionsReport>,
    pub t_couple: f64,
    pub coupled_pairs: usize,
    pub singles: usize,
    pub short_runs: usize,
    pub t_contraction: Option<f64>,
    pub contraction: Option<ContractionReport>,
    pub contraction_skipped: Option<String>,
    pub coupling_bound: Option<CouplingBoundReport>,
    pub bound_ge_empirical: Option<bool>,
    pub gap: Option<SpectralGapReport>,
    pub smallness: Option<SmallnessEstimates>,
    pub error: Option<String>,
}

/// Full verification: measure k̂₀, assemble constants, run coupled pairs and
/// singles, check A1–A4, measure the contraction factor when the parameter
/// conditions pass, and compare the coupling bound with the empirical
/// Wasserstein estimate. Partial results are preserved on error.
pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<i32, HarnessError> {
    let started = Instant::now();
    let p = cfg.model_params()?;
    let grid = p.grid.clone();
    let spec = cfg.noise_spec(&grid);
    let cs = cfg.control_spec();
    if !spec.supports_modes(cs.n_modes) {
        return Err(ConfigError::Condition {
            name: "range-Q".to_string(),
            msg: format!("sigma_k = 0 for some k <= {} (control cost undefined)", cs.n_modes),
        }
        .into());
    }
    let w = p.weights;
    let mut writer = ArtifactWriter::new(out)?;

    let k0 = k0_hat_for(cfg, &grid);
    let consts = compute_constants(&p, &spec, &cs, cfg.gamma, k0);
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => 0.5 * consts.alpha0,
    };
    let sp = SemimetricParams { alpha, upsilon: consts.upsilon, n_scale: cfg.n_scale };
    sp.validate(consts.alpha0)
        .map_err(|msg| ConfigError::Invalid { key: "semimetric.alpha".to_string(), msg })?;
    let conditions_pass = consts.flags.all_contraction_conditions();

    let mut report = VerifyReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_hash: sha256_hex(cfg.normalized_text().as_bytes()),
        k0_hat: k0,
        constants: consts.clone(),
        semimetric: sp,
        conditions_pass,
        assumptions: None,
        t_couple: cfg.t_horizon,
        coupled_pairs: cfg.verify_pairs,
        singles: cfg.ensemble,
        short_runs: cfg.verify_short_runs,
        t_contraction: None,
        contraction: None,
        contraction_skipped: None,
        coupling_bound: None,
        bound_ge_empirical: None,
        gap: None,
        smallness: None,
        error: None,
    };

    macro_rules! bail_with_report {
        ($writer:expr, $report:expr, $err:expr) => {{
            let err: HarnessError = $err.into();
            $report.error = Some(err.to_string());
            $writer.write(
                "verify_report.json",
                serde_json::to_string_pretty(&$report).expect("report serializes").as_bytes(),
            )?;
            $writer.finish("verify", cfg, started)?;
            return Err(err);
        }};
    }

    // Coupled pairs from independent random starts.
    let coupled: Vec<Result<CoupledRecord, Blowup>> = (0..cfg.verify_pairs)
        .into_par_iter()
        .map(|i| {
            let mut ir = stream(cfg.seed, purpose::INIT, 100 + i as u64);
            let amp = match cfg.init {
                InitSpec::Random { amplitude, .. } => amplitude,
                _ => 0.3,
            };
            let slope = match cfg.init {
                InitSpec::Random { slope, .. } => slope,
                _ => 1.5,
            };
            let x0 = random_field_2l(&grid, amp, slope, &mut ir);
            let y0 = random_field_2l(&grid, amp, slope, &mut ir);
            let mut stepper = Stepper::new(p.clone());
            let mut rng = stream(cfg.seed, purpose::COUPLE, i as u64);
            integrate_coupled(&mut stepper, &x0, &y0, &spec, &cs, cfg.t_horizon, &mut rng)
        })
        .collect();
    let coupled: Vec<CoupledRecord> = match coupled.into_iter().collect() {
        Ok(v) => v,
        Err(b) => {
            let b: Blowup = b;
            bail_with_report!(writer, report, HarnessError::Blowup { t: b.t })
        }
    };

    // Singles from a common initial state (A4 needs one fixed q0).
    let q0 = init_state(cfg, &grid, 0)?;
    let v0 = triple_norm_minus1_sq(&q0, &w);
    let singles: Vec<Result<TrajectoryRecord, Blowup>> = (0..cfg.ensemble)
        .into_par_iter()
        .map(|i| {
            let mut stepper = Stepper::new(p.clone());
            let mut rng = stream(cfg.seed, purpose::SIM, i as u64);
            integrate(&mut stepper, &q0, &spec, cfg.t_horizon, &mut rng, cfg.sample_every)
        })
        .collect();
    let singles: Vec<TrajectoryRecord> = match singles.into_iter().collect() {
        Ok(v) => v,
        Err(b) => {
            let b: Blowup = b;
            bail_with_report!(writer, report, HarnessError::Blowup { t: b.t })
        }
    };

    // Short runs for the martingale tail.
    let short_xi: Vec<Result<f64, Blowup>> = (0..cfg.verify_short_runs)
        .into_par_iter()
        .map(|i| {
            let mut stepper = Stepper::new(p.clone());
            let mut rng = stream(cfg.seed, purpose::SHORT, i as u64);
            integrate(&mut stepper, &q0, &spec, cfg.verify_short_t, &mut rng, usize::MAX)
                .map(|rec| rec.xi_hat(consts.gamma))
        })
        .collect();
    let short_xi: Vec<f64> = match short_xi.into_iter().collect() {
        Ok(v) => v,
        Err(b) => {
            let b: Blowup = b;
            bail_with_report!(writer, report, HarnessError::Blowup { t: b.t })
        }
    };

    match check_assumptions(&coupled, &singles, &short_xi, v0, &consts) {
        Ok(a) => report.assumptions = Some(a),
        Err(e) => bail_with_report!(writer, report, HarnessError::Other(e)),
    }

    // Contraction measurement, only meaningful when the conditions pass.
    if conditions_pass {
        let sync_median = report.assumptions.as_ref().unwrap().a1.sync_median_ratio;
        let t_c = match cfg.contraction_t {
            Some(t) => Some(t),
            None => {
                if sync_median.is_finite() && sync_median > 0.0 && sync_median < 1.0 {
                    // Time for a tenfold decay of the coupled difference,
                    // extrapolated from the realized median slope.
                    Some(cfg.t_horizon * std::f64::consts::LN_10 / -sync_median.ln())
                } else {
                    None
                }
            }
        };
        let y0c = init_state(cfg, &grid, 1)?;
        let d0 = d_tilde(&q0, &y0c, &sp, &w);
        match (t_c, d0 > 0.0) {
            (Some(t_c), true) => {
                report.t_contraction = Some(t_c);
                let ens = || -> Result<(Ensemble, Ensemble), Blowup> {
                    let ex = generate_ensemble_offset(
                        &p,
                        &spec,
                        &q0,
                        t_c,
                        cfg.contraction_samples,
                        cfg.seed,
                        purpose::ENSEMBLE_X,
                        0,
                    )?;
                    let ey = generate_ensemble_offset(
                        &p,
                        &spec,
                        &y0c,
                        t_c,
                        cfg.contraction_samples,
                        cfg.seed,
                        purpose::ENSEMBLE_Y,
                        0,
                    )?;
                    Ok((ex, ey))
                };
                let (ens_x, ens_y) = match ens() {
                    Ok(v) => v,
                    Err(b) => bail_with_report!(writer, report, HarnessError::Blowup { t: b.t }),
                };
                match contraction_factor(&q0, &y0c, &ens_x, &ens_y, &sp, &w) {
                    Ok(c) => report.contraction = Some(c),
                    Err(e) => report.contraction_skipped = Some(e),
                }

                // Coupled runs from exactly (q0, y0c) feed the M_δ estimate.
                let bound_runs: Vec<Result<CoupledRecord, Blowup>> = (0..cfg.verify_pairs)
                    .into_par_iter()
                    .map(|i| {
                        let mut stepper = Stepper::new(p.clone());
                        let mut rng = stream(cfg.seed, purpose::COUPLE_BOUND, i as u64);
                        integrate_coupled(&mut stepper, &q0, &y0c, &spec, &cs, t_c, &mut rng)
                    })
                    .collect();
                let bound_runs: Vec<CoupledRecord> = match bound_runs.into_iter().collect() {
                    Ok(v) => v,
                    Err(b) => {
                        let b: Blowup = b;
                        bail_with_report!(writer, report, HarnessError::Blowup { t: b.t })
                    }
                };
                let costs: Vec<f64> =
                    bound_runs.iter().map(|r| *r.cost_steps.last().unwrap()).collect();
                let xi_a2: Vec<f64> =
                    bound_runs.iter().map(|r| 2.0 * w.h1 * r.xi_hat(consts.gamma)).collect();
                match wasserstein_coupling_bound(&q0, &y0c, &consts, &sp, t_c, &costs, &xi_a2, &w) {
                    Ok(cb) => {
                        report.bound_ge_empirical = report
                            .contraction
                            .as_ref()
                            .map(|c| cb.bound >= c.w_d_n - 1e-12);
                        report.smallness = Some(smallness_estimates(
                            &consts,
                            &sp,
                            t_c,
                            cb.m_delta_hat,
                            cb.c_xi_hat,
                            &xi_a2,
                        ));
                        report.coupling_bound = Some(cb);
                    }
                    Err(e) => report.contraction_skipped = Some(e),
                }

                // Spectral-gap check on Hölder-type observables.
                if let Some(c) = &report.contraction {
                    let n_eval = 8.min(ens_y.len());
                    let eval_points: Vec<Field2L> = ens_y.states[..n_eval].to_vec();
                    let mut point_ensembles = Vec::new();
                    let mut gap_err = None;
                    for (pi, pt) in eval_points.iter().enumerate() {
                        match generate_ensemble_offset(
                            &p,
                            &spec,
                            pt,
                            t_c,
                            16,
                            cfg.seed,
                            purpose::GAP,
                            (pi as u64) * 10_000,
                        ) {
                            Ok(e) => point_ensembles.push(e),
                            Err(b) => {
                                gap_err = Some(b.t);
                                break;
                            }
                        }
                    }
                    if let Some(t) = gap_err {
                        bail_with_report!(writer, report, HarnessError::Blowup { t })
                    }
                    let observables = [
                        TestObservable::CappedNorm,
                        TestObservable::SaturatedEnergy,
                        TestObservable::Constant,
                    ];
                    report.gap = Some(spectral_gap_check(
                        &observables,
                        &ens_x,
                        &eval_points,
                        &point_ensembles,
                        c.rho_hat,
                        &ens_x,
                        &ens_y,
                        &sp,
                        &w,
                    ));
                }
            }
            (None, _) => {
                report.contraction_skipped =
                    Some("no contraction time: coupled difference did not decay".to_string());
            }
            (_, false) => {
                report.contraction_skipped =
                    Some("d_tilde(x0, y0) = 0: identical start states".to_string());
            }
        }
    } else {
        report.contraction_skipped =
            Some("parameter conditions failed; no contraction claim".to_string());
    }

    writer.write(
        "verify_report.json",
        serde_json::to_string_pretty(&report).expect("report serializes").as_bytes(),
    )?;
    writer.finish("verify", cfg, started)?;

    let assumptions_pass = report.assumptions.as_ref().map(|a| a.all_pass).unwrap_or(false);
    if !quiet {
        let a = report.assumptions.as_ref().unwrap();
        println!("conditions          : {}", if conditions_pass { "pass" } else { "FAIL" });
        println!("A1 synchronization  : {}", if a.a1.pass { "pass" } else { "FAIL" });
        println!("A2 energy/martingale: {}", if a.a2.pass { "pass" } else { "FAIL" });
        println!("A3 control bound    : {}", if a.a3.pass { "pass" } else { "FAIL" });
        println!("A4 Lyapunov drift   : {}", if a.a4.pass { "pass" } else { "FAIL" });
        match &report.contraction {
            Some(c) => println!("contraction rho_hat : {} (t = {})", c.rho_hat, c.t),
            None => println!(
                "contraction         : skipped ({})",
                report.contraction_skipped.as_deref().unwrap_or("unknown")
            ),
        }
        if let (Some(cb), Some(c)) = (&report.coupling_bound, &report.contraction) {
            println!("coupling bound      : {} >= empirical {}", cb.bound, c.w_d_n);
        }
    }
    Ok(if conditions_pass && assumptions_pass { 0 } else { 4 })
}

/// Re-run a manifest's command from its embedded config and compare artifact
/// checksums bit-exactly. Replay output goes to `<out>/replay/`.
pub fn cmd_replay(manifest_path: &Path, out_override: Option<&Path>, threads: Option<usize>, quiet: bool) -> Result<i32, HarnessError> {
    let manifest = RunManifest::load(manifest_path).map_err(HarnessError::Other)?;
    let mut cfg = crate::harness::config::load_config_text(&manifest.config_text)?;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    let replay_dir = match out_override {
        Some(p) => p.to_path_buf(),
        None => manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("replay"),
    };
    let run = || -> Result<i32, HarnessError> {
        match manifest.command.as_str() {
            "simulate" => cmd_simulate(&cfg, &replay_dir, true),
            "couple" => cmd_couple(&cfg, &replay_dir, true),
            "verify" => cmd_verify(&cfg, &replay_dir, true),
            "constants" => cmd_constants(&cfg, &replay_dir, true),
            other => Err(HarnessError::Other(format!("manifest command '{other}' not replayable"))),
        }
    };
    // Verify's exit code reflects verdicts, not failure; replay only cares
    // that artifacts were produced.
    match run() {
        Ok(_) => {}
        Err(e @ HarnessError::Blowup { .. }) => {
            // Blow-ups still write artifacts deterministically; compare them.
            if !quiet {
                eprintln!("replay run reported: {e}");
            }
        }
        Err(e) => return Err(e),
    }
    let mut all_ok = true;
    for artifact in &manifest.artifacts {
        let verdict = match checksum_file(&replay_dir, &artifact.name) {
            Ok(c) if c.sha256 == artifact.sha256 => "ok",
            Ok(_) => {
                all_ok = false;
                "MISMATCH"
            }
            Err(_) => {
                all_ok = false;
                "MISSING"
            }
        };
        if !quiet {
            println!("{}: {}", artifact.name, verdict);
        }
    }
    Ok(if all_ok { 0 } else { 1 })
}
