//! Experiment configuration: a flat `section.key = value` text format with
//! strict validation. Unknown keys are rejected so misspellings never fall
//! back to silent defaults, and rejection messages name the violated
//! precondition (by its condition name where one exists).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::coupling::ControlSpec;
use crate::field::{LayerWeights, ScalarField};
use crate::grid::Grid;
use crate::model::{params_from_physical, ModelParams, NoiseSpec, PhysicalParams};
use rustfft::num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown config key '{0}' (no silent defaults for misspellings)")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {msg}")]
    Invalid { key: String, msg: String },
    #[error("condition check failed [{name}]: {msg}")]
    Condition { name: String, msg: String },
}

/// Forcing patterns; all are projected to zero mean by construction.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    None,
    /// One cosine mode at integer wavenumbers `(jx, jy)` with amplitude.
    Single { jx: i32, jy: i32, amplitude: f64 },
    /// Equal amplitude on every pair with `j₁²+j₂² = m_sq`.
    Ring { m_sq: i64, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseLaw {
    None,
    /// `σ_k = c·λ_k^{-s}` for `k ≤ k_max`.
    PowerLaw { c: f64, s: f64, k_max: usize },
    /// Explicit list of `σ_k` by eigen-index.
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    /// Random band-limited field: per-mode amplitude `amp·(1+λ)^{-slope/2}`.
    Random { amplitude: f64, slope: f64 },
    Checkpoint(String),
}

/// Validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid_l: f64,
    pub grid_n: usize,
    pub nu: f64,
    pub r: f64,
    pub beta: f64,
    pub h1: f64,
    pub h2: f64,
    pub f1: f64,
    pub f2: f64,
    pub forcing: ForcingSpec,
    pub noise: NoiseLaw,
    pub control_gain: f64,
    pub control_n: usize,
    pub alpha: Option<f64>,
    pub n_scale: f64,
    pub gamma: Option<f64>,
    pub dt: f64,
    pub t_horizon: f64,
    pub sample_every: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub threads: usize,
    pub init: InitSpec,
    pub out_dir: String,
    pub k0_trials: usize,
    pub k0_hat_override: Option<f64>,
    pub verify_pairs: usize,
    pub verify_short_runs: usize,
    pub verify_short_t: f64,
    pub contraction_samples: usize,
    pub contraction_t: Option<f64>,
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: i + 1,
            msg: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Parse { line: i + 1, msg: "empty key".to_string() });
        }
        if map.insert(key.clone(), (v.trim().to_string(), i + 1)).is_some() {
            return Err(ConfigError::Parse { line: i + 1, msg: format!("duplicate key '{key}'") });
        }
    }
    Ok(map)
}

struct Keys {
    map: BTreeMap<String, (String, usize)>,
    used: std::collections::BTreeSet<String>,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_string());
        self.map.get(key).map(|(v, _)| v.clone())
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                key: key.to_string(),
                msg: format!("expected a number, got '{v}'"),
            }),
        }
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) if v == "auto" => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::Invalid {
                    key: key.to_string(),
                    msg: format!("expected a number or 'auto', got '{v}'"),
                }),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                key: key.to_string(),
                msg: format!("expected a nonnegative integer, got '{v}'"),
            }),
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                key: key.to_string(),
                msg: format!("expected an unsigned integer, got '{v}'"),
            }),
        }
    }

    fn i32(&mut self, key: &str, default: i32) -> Result<i32, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Invalid {
                key: key.to_string(),
                msg: format!("expected an integer, got '{v}'"),
            }),
        }
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or_else(|| default.to_string())
    }

    fn reject_unknown(&self) -> Result<(), ConfigError> {
        for key in self.map.keys() {
            if !self.used.contains(key) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
        }
        Ok(())
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid { key: key.to_string(), msg: format!("must be strictly positive, got {v}") })
    }
}

fn nonnegative(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid { key: key.to_string(), msg: format!("must be nonnegative, got {v}") })
    }
}

/// Parse and validate a config from text. Every module-level precondition is
/// re-checked here; violations carry the paper's condition name where one
/// exists (condition_n, range-Q, the γ bound).
pub fn load_config_text(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut keys = Keys { map: parse_kv(text)?, used: Default::default() };

    let grid_l = positive("grid.l", keys.f64("grid.l", std::f64::consts::PI / 2.0)?)?;
    let grid_n = keys.usize("grid.n", 32)?;
    if grid_n % 2 != 0 || grid_n < 8 {
        return Err(ConfigError::Invalid {
            key: "grid.n".to_string(),
            msg: format!("N must be even and >= 8, got {grid_n}"),
        });
    }

    let nu = positive("model.nu", keys.f64("model.nu", 0.1)?)?;
    let r = nonnegative("model.r", keys.f64("model.r", 1.0)?)?;
    let beta = keys.f64("model.beta", 0.0)?;

    // Stratification either directly (model.h1/h2/f1/f2) or from physical
    // constants (physical.*). Direct values win if both given.
    let (h1, h2, f1, f2) = if keys.map.contains_key("physical.f0") {
        let ph = PhysicalParams {
            f0: positive("physical.f0", keys.f64("physical.f0", 1.0)?)?,
            g: positive("physical.g", keys.f64("physical.g", 9.81)?)?,
            rho1: positive("physical.rho1", keys.f64("physical.rho1", 1.0)?)?,
            rho2: positive("physical.rho2", keys.f64("physical.rho2", 1.1)?)?,
            h1: positive("physical.h1", keys.f64("physical.h1", 1.0)?)?,
            h2: positive("physical.h2", keys.f64("physical.h2", 1.0)?)?,
        };
        let w = params_from_physical(&ph)
            .map_err(|msg| ConfigError::Invalid { key: "physical.rho1".to_string(), msg })?;
        (w.h1, w.h2, w.f1, w.f2)
    } else {
        (
            positive("model.h1", keys.f64("model.h1", 1.0)?)?,
            positive("model.h2", keys.f64("model.h2", 1.0)?)?,
            positive("model.f1", keys.f64("model.f1", 0.25)?)?,
            positive("model.f2", keys.f64("model.f2", 0.25)?)?,
        )
    };
    LayerWeights::new(h1, h2, f1, f2)
        .map_err(|msg| ConfigError::Invalid { key: "model.f1".to_string(), msg })?;

    let forcing = match keys.string("forcing.pattern", "none").as_str() {
        "none" => ForcingSpec::None,
        "single" => ForcingSpec::Single {
            jx: keys.i32("forcing.jx", 1)?,
            jy: keys.i32("forcing.jy", 0)?,
            amplitude: keys.f64("forcing.amplitude", 0.0)?,
        },
        "ring" => ForcingSpec::Ring {
            m_sq: keys.usize("forcing.m_sq", 2)? as i64,
            amplitude: keys.f64("forcing.amplitude", 0.0)?,
        },
        other => {
            return Err(ConfigError::Invalid {
                key: "forcing.pattern".to_string(),
                msg: format!("expected none|single|ring, got '{other}'"),
            })
        }
    };

    let noise = match keys.string("noise.law", "none").as_str() {
        "none" => NoiseLaw::None,
        "powerlaw" => {
            let c = nonnegative("noise.amplitude", keys.f64("noise.amplitude", 0.0)?)?;
            let s = keys.f64("noise.exponent", 2.0)?;
            if s <= 1.0 {
                return Err(ConfigError::Invalid {
                    key: "noise.exponent".to_string(),
                    msg: format!(
                        "power-law spectra need s > 1 for a trace-class continuum limit, got {s}"
                    ),
                });
            }
            NoiseLaw::PowerLaw { c, s, k_max: keys.usize("noise.k_max", 64)? }
        }
        "list" => {
            let raw = keys.take("noise.sigma").ok_or_else(|| ConfigError::Invalid {
                key: "noise.sigma".to_string(),
                msg: "noise.law = list requires noise.sigma".to_string(),
            })?;
            let vals: Result<Vec<f64>, _> = raw.split(',').map(|x| x.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|_| ConfigError::Invalid {
                key: "noise.sigma".to_string(),
                msg: "expected a comma-separated list of numbers".to_string(),
            })?;
            if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(ConfigError::Invalid {
                    key: "noise.sigma".to_string(),
                    msg: "entries must be finite and nonnegative".to_string(),
                });
            }
            NoiseLaw::List(vals)
        }
        other => {
            return Err(ConfigError::Invalid {
                key: "noise.law".to_string(),
                msg: format!("expected none|powerlaw|list, got '{other}'"),
            })
        }
    };

    let control_gain = match keys.f64_opt("control.a")? {
        Some(a) => a,
        None => r,
    };
    let control_n = keys.usize("control.n", 1)?;

    let alpha = keys.f64_opt("semimetric.alpha")?;
    let n_scale = keys.f64("semimetric.n_scale", 1.0)?;
    if !(n_scale >= 1.0) {
        return Err(ConfigError::Invalid {
            key: "semimetric.n_scale".to_string(),
            msg: format!("must be at least 1, got {n_scale}"),
        });
    }
    let gamma = keys.f64_opt("semimetric.gamma")?;

    let dt = positive("run.dt", keys.f64("run.dt", 1e-3)?)?;
    let t_horizon = nonnegative("run.t", keys.f64("run.t", 1.0)?)?;
    let sample_every = keys.usize("run.sample_every", 10)?.max(1);
    let ensemble = keys.usize("run.ensemble", 1)?.max(1);
    if ensemble > 128 {
        return Err(ConfigError::Invalid {
            key: "run.ensemble".to_string(),
            msg: "capped at 128 (exact assignment bound)".to_string(),
        });
    }
    let seed = keys.u64("run.seed", 1)?;
    let threads = keys.usize("run.threads", 0)?;

    let init = match keys.string("init.pattern", "random").as_str() {
        "zero" => InitSpec::Zero,
        "random" => InitSpec::Random {
            amplitude: keys.f64("init.amplitude", 0.3)?,
            slope: keys.f64("init.slope", 1.5)?,
        },
        "checkpoint" => InitSpec::Checkpoint(keys.string("init.path", "")),
        other => {
            return Err(ConfigError::Invalid {
                key: "init.pattern".to_string(),
                msg: format!("expected zero|random|checkpoint, got '{other}'"),
            })
        }
    };

    let out_dir = keys.string("output.dir", "out");
    let k0_trials = keys.usize("verify.k0_trials", 1000)?;
    let k0_hat_override = keys.f64_opt("verify.k0_hat")?;
    let verify_pairs = keys.usize("verify.pairs", 32)?;
    let verify_short_runs = keys.usize("verify.short_runs", 1000)?;
    let verify_short_t = positive("verify.short_t", keys.f64("verify.short_t", 0.5)?)?;
    let contraction_samples = keys.usize("verify.contraction_samples", 64)?;
    if contraction_samples > 128 {
        return Err(ConfigError::Invalid {
            key: "verify.contraction_samples".to_string(),
            msg: "capped at 128 (exact assignment bound)".to_string(),
        });
    }
    let contraction_t = keys.f64_opt("verify.contraction_t")?;

    keys.reject_unknown()?;

    let cfg = ExperimentConfig {
        grid_l,
        grid_n,
        nu,
        r,
        beta,
        h1,
        h2,
        f1,
        f2,
        forcing,
        noise,
        control_gain,
        control_n,
        alpha,
        n_scale,
        gamma,
        dt,
        t_horizon,
        sample_every,
        ensemble,
        seed,
        threads,
        init,
        out_dir,
        k0_trials,
        k0_hat_override,
        verify_pairs,
        verify_short_runs,
        verify_short_t,
        contraction_samples,
        contraction_t,
    };
    cfg.check_mode_counts()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse {
        line: 0,
        msg: format!("cannot read {}: {e}", path.display()),
    })?;
    load_config_text(&text)
}

impl ExperimentConfig {
    fn check_mode_counts(&self) -> Result<(), ConfigError> {
        let grid = Grid::new(self.grid_l, self.grid_n);
        if self.control_n < 1 || self.control_n > grid.num_modes() {
            return Err(ConfigError::Invalid {
                key: "control.n".to_string(),
                msg: format!("must be in 1..={}", grid.num_modes()),
            });
        }
        Ok(())
    }

    pub fn grid(&self) -> Arc<Grid> {
        Grid::new(self.grid_l, self.grid_n)
    }

    pub fn weights(&self) -> LayerWeights {
        LayerWeights::new(self.h1, self.h2, self.f1, self.f2).expect("validated at load")
    }

    pub fn forcing_field(&self, grid: &Arc<Grid>) -> ScalarField {
        let mut f = ScalarField::zeros(grid);
        match &self.forcing {
            ForcingSpec::None => {}
            ForcingSpec::Single { jx, jy, amplitude } => {
                if (*jx, *jy) != (0, 0) {
                    f.set_mode(*jx, *jy, Complex64::new(amplitude / 2.0, 0.0));
                }
            }
            ForcingSpec::Ring { m_sq, amplitude } => {
                for rank in 1..=grid.num_modes() {
                    let m = grid.mode(rank);
                    let msq = m.j.0 as i64 * m.j.0 as i64 + m.j.1 as i64 * m.j.1 as i64;
                    if msq == *m_sq {
                        f.set_mode(m.j.0, m.j.1, Complex64::new(amplitude / 2.0, 0.0));
                    }
                }
            }
        }
        f
    }

    pub fn noise_spec(&self, grid: &Grid) -> NoiseSpec {
        match &self.noise {
            NoiseLaw::None => NoiseSpec::none(),
            NoiseLaw::PowerLaw { c, s, k_max } => {
                NoiseSpec::power_law(grid, *c, *s, *k_max).expect("validated at load")
            }
            NoiseLaw::List(v) => NoiseSpec::from_sigmas(v.clone()).expect("validated at load"),
        }
    }

    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let grid = self.grid();
        let forcing = self.forcing_field(&grid);
        ModelParams::new(grid, self.nu, self.r, self.beta, self.weights(), forcing, self.dt)
            .map_err(|msg| ConfigError::Invalid { key: "model".to_string(), msg })
    }

    pub fn control_spec(&self) -> ControlSpec {
        ControlSpec { gain: self.control_gain, n_modes: self.control_n }
    }

    /// Coupling-level validation: range-Q support (`σ_k > 0` for `k ≤ n`)
    /// and condition_n (`ν - 2aλₙ⁻¹ > 0`), with named rejections.
    pub fn check_coupling_conditions(&self) -> Result<(), ConfigError> {
        let grid = self.grid();
        let spec = self.noise_spec(&grid);
        let cs = self.control_spec();
        if !(cs.gain > 0.0) {
            return Err(ConfigError::Invalid {
                key: "control.a".to_string(),
                msg: "gain must be strictly positive".to_string(),
            });
        }
        if !spec.supports_modes(cs.n_modes) {
            return Err(ConfigError::Condition {
                name: "range-Q".to_string(),
                msg: format!(
                    "sigma_k = 0 for some k <= {} (need Pi_n H within range Q)",
                    cs.n_modes
                ),
            });
        }
        let lam_n = grid.lambda_n(cs.n_modes);
        let slack = self.nu - 2.0 * cs.gain / lam_n;
        if !(slack > 0.0) {
            return Err(ConfigError::Condition {
                name: "condition_n".to_string(),
                msg: format!("nu - 2a/lambda_n = {slack} <= 0 with lambda_n = {lam_n}"),
            });
        }
        if let Some(g) = self.gamma {
            let grid2 = self.grid();
            let tr_q = spec.trace_q();
            if tr_q > 0.0 {
                let bound = grid2.lambda_1() * grid2.lambda_1() * self.nu / (2.0 * tr_q);
                if !(g < bound) {
                    return Err(ConfigError::Condition {
                        name: "gamma-bound".to_string(),
                        msg: format!("gamma = {g} must be < lambda_1^2 nu / (2 Tr Q) = {bound}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Canonical serialization: every effective value, sorted keys. Loading
    /// the output reproduces the same config (normalization is idempotent).
    pub fn normalized_text(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        lines.push(format!("grid.l = {:e}", self.grid_l));
        lines.push(format!("grid.n = {}", self.grid_n));
        lines.push(format!("model.nu = {:e}", self.nu));
        lines.push(format!("model.r = {:e}", self.r));
        lines.push(format!("model.beta = {:e}", self.beta));
        lines.push(format!("model.h1 = {:e}", self.h1));
        lines.push(format!("model.h2 = {:e}", self.h2));
        lines.push(format!("model.f1 = {:e}", self.f1));
        lines.push(format!("model.f2 = {:e}", self.f2));
        match &self.forcing {
            ForcingSpec::None => lines.push("forcing.pattern = none".to_string()),
            ForcingSpec::Single { jx, jy, amplitude } => {
                lines.push("forcing.pattern = single".to_string());
                lines.push(format!("forcing.jx = {jx}"));
                lines.push(format!("forcing.jy = {jy}"));
                lines.push(format!("forcing.amplitude = {amplitude:e}"));
            }
            ForcingSpec::Ring { m_sq, amplitude } => {
                lines.push("forcing.pattern = ring".to_string());
                lines.push(format!("forcing.m_sq = {m_sq}"));
                lines.push(format!("forcing.amplitude = {amplitude:e}"));
            }
        }
        match &self.noise {
            NoiseLaw::None => lines.push("noise.law = none".to_string()),
            NoiseLaw::PowerLaw { c, s, k_max } => {
                lines.push("noise.law = powerlaw".to_string());
                lines.push(format!("noise.amplitude = {c:e}"));
                lines.push(format!("noise.exponent = {s:e}"));
                lines.push(format!("noise.k_max = {k_max}"));
            }
            NoiseLaw::List(v) => {
                lines.push("noise.law = list".to_string());
                let items: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
                lines.push(format!("noise.sigma = {}", items.join(",")));
            }
        }
        lines.push(format!("control.a = {:e}", self.control_gain));
        lines.push(format!("control.n = {}", self.control_n));
        match self.alpha {
            Some(a) => lines.push(format!("semimetric.alpha = {a:e}")),
            None => lines.push("semimetric.alpha = auto".to_string()),
        }
        lines.push(format!("semimetric.n_scale = {:e}", self.n_scale));
        match self.gamma {
            Some(g) => lines.push(format!("semimetric.gamma = {g:e}")),
            None => lines.push("semimetric.gamma = auto".to_string()),
        }
        lines.push(format!("run.dt = {:e}", self.dt));
        lines.push(format!("run.t = {:e}", self.t_horizon));
        lines.push(format!("run.sample_every = {}", self.sample_every));
        lines.push(format!("run.ensemble = {}", self.ensemble));
        lines.push(format!("run.seed = {}", self.seed));
        lines.push(format!("run.threads = {}", self.threads));
        match &self.init {
            InitSpec::Zero => lines.push("init.pattern = zero".to_string()),
            InitSpec::Random { amplitude, slope } => {
                lines.push("init.pattern = random".to_string());
                lines.push(format!("init.amplitude = {amplitude:e}"));
                lines.push(format!("init.slope = {slope:e}"));
            }
            InitSpec::Checkpoint(p) => {
                lines.push("init.pattern = checkpoint".to_string());
                lines.push(format!("init.path = {p}"));
            }
        }
        lines.push(format!("output.dir = {}", self.out_dir));
        lines.push(format!("verify.k0_trials = {}", self.k0_trials));
        match self.k0_hat_override {
            Some(k) => lines.push(format!("verify.k0_hat = {k:e}")),
            None => lines.push("verify.k0_hat = auto".to_string()),
        }
        lines.push(format!("verify.pairs = {}", self.verify_pairs));
        lines.push(format!("verify.short_runs = {}", self.verify_short_runs));
        lines.push(format!("verify.short_t = {:e}", self.verify_short_t));
        lines.push(format!("verify.contraction_samples = {}", self.contraction_samples));
        match self.contraction_t {
            Some(t) => lines.push(format!("verify.contraction_t = {t:e}")),
            None => lines.push("verify.contraction_t = auto".to_string()),
        }
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}
