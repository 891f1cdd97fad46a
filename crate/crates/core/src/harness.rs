//! Experiment orchestration: config ingestion, seeded Monte Carlo sweeps
//! over the system axes, metric rows, and CSV/JSON persistence.
//!
//! Determinism contract: a `(config, spec, seed)` triple produces the same
//! rows regardless of thread count, because every trial derives its own
//! random stream from a fixed 64-bit mix of `(base_seed, sweep_value,
//! trial)` and aggregation is an ordered reduction. Wall-clock
//! `solve_time_s` rows are the one exception and are only emitted when
//! `record_timing` is on.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    sample_channels, sample_csi_errors, sample_topology, CsiErrorModel, NoisePowers, Polar,
    SystemConfig,
};
use crate::error::SecError;
use crate::passive::{ao_passive, EUpdate, PassiveProblem, PassiveStop};
use crate::rates::{ergodic_eve_correlation, rate_helper, rate_reflect};
use crate::robust::{ao_active, validate_outage, ActiveStop, EstimatedChannels, PccpParams};

/// Experiment family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Robust outage-constrained design against the active eavesdropper.
    Active,
    /// Average-secrecy design against the passive eavesdropper.
    Passive,
    /// Estimated cascades naively treated as perfect.
    Nonrobust,
    /// Active design plus a Monte Carlo outage audit of the result.
    Validate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Active => "active",
            Mode::Passive => "passive",
            Mode::Nonrobust => "nonrobust",
            Mode::Validate => "validate",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Mode {
    type Err = SecError;
    fn from_str(s: &str) -> Result<Self, SecError> {
        match s {
            "active" => Ok(Mode::Active),
            "passive" => Ok(Mode::Passive),
            "nonrobust" => Ok(Mode::Nonrobust),
            "validate" => Ok(Mode::Validate),
            other => Err(SecError::ConfigDomain {
                key: "mode".into(),
                detail: format!("unknown mode `{other}`"),
            }),
        }
    }
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepName {
    DeRatio,
    M,
    K,
    DeltaK,
    DeltaE,
    N,
}

impl fmt::Display for SweepName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepName::DeRatio => "de_ratio",
            SweepName::M => "m",
            SweepName::K => "k",
            SweepName::DeltaK => "delta_k",
            SweepName::DeltaE => "delta_e",
            SweepName::N => "n",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SweepName {
    type Err = SecError;
    fn from_str(s: &str) -> Result<Self, SecError> {
        match s.to_ascii_lowercase().as_str() {
            "de_ratio" => Ok(SweepName::DeRatio),
            "m" => Ok(SweepName::M),
            "k" => Ok(SweepName::K),
            "delta_k" => Ok(SweepName::DeltaK),
            "delta_e" => Ok(SweepName::DeltaE),
            "n" => Ok(SweepName::N),
            other => Err(SecError::ConfigDomain {
                key: "sweep".into(),
                detail: format!("unknown sweep parameter `{other}`"),
            }),
        }
    }
}

/// A named sweep with explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub name: SweepName,
    pub values: Vec<f64>,
}

/// Output file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = SecError;
    fn from_str(s: &str) -> Result<Self, SecError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(SecError::ConfigDomain {
                key: "format".into(),
                detail: format!("unknown format `{other}`"),
            }),
        }
    }
}

/// Everything describing one experiment run besides the physical system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub sweep: Option<SweepSpec>,
    pub trials: usize,
    pub base_seed: u64,
    pub output_path: String,
    pub format: OutputFormat,
    /// Emit wall-clock `solve_time_s` rows (breaks byte-level determinism).
    pub record_timing: bool,
    /// Error draws per outage audit.
    pub n_mc_outage: usize,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Eavesdropper position on the BS-user-K segment when not swept.
    pub de_ratio: f64,
    pub pccp: PccpParams,
    pub active_stop: ActiveStop,
    pub passive_stop: PassiveStop,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Active,
            sweep: None,
            trials: 1,
            base_seed: 1,
            output_path: "results.csv".into(),
            format: OutputFormat::Csv,
            record_timing: false,
            n_mc_outage: 10_000,
            threads: None,
            de_ratio: 0.5,
            pccp: PccpParams::default(),
            active_stop: ActiveStop::default(),
            passive_stop: PassiveStop::default(),
        }
    }
}

/// One metric row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: String,
    pub sweep_name: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub metric_name: String,
    pub metric_value: f64,
    pub status: String,
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: `base_seed XOR splitmix64-hash(sweep_value, trial)`.
/// The hash absorbs the sweep value's bit pattern and the trial index
/// through two splitmix64 rounds, so neighbouring sweep points do not
/// correlate their random streams.
pub fn mix_seed(base_seed: u64, sweep_value: f64, trial: u64) -> u64 {
    let h = splitmix64(splitmix64(sweep_value.to_bits()) ^ splitmix64(trial));
    base_seed ^ h
}

/// `mx, my` grid for a swept element count: the largest divisor not
/// exceeding `sqrt(m)` becomes `mx`.
pub fn grid_for(m: usize) -> (usize, usize) {
    let mut mx = 1;
    let mut d = 1;
    while d * d <= m {
        if m % d == 0 {
            mx = d;
        }
        d += 1;
    }
    (mx, m / mx)
}

// ---------------------------------------------------------------------------
// Config file handling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    system: RawSystem,
    experiment: RawExperiment,
    pccp: PccpParams,
    stop: RawStop,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSystem {
    n: usize,
    k: usize,
    mx: usize,
    my: usize,
    p_max_dbm: f64,
    sigma2_dbm: f64,
    sigma2_e_dbm: Option<f64>,
    rho0_db: f64,
    d0_m: f64,
    alpha_bs: f64,
    alpha_irs: f64,
    rician_bs: f64,
    rician_irs: f64,
    phi_elev_rad: f64,
    rho_outage: f64,
    delta_k: f64,
    delta_e: f64,
    d_irs_m: f64,
    theta_irs_rad: f64,
}

impl Default for RawSystem {
    fn default() -> Self {
        Self {
            n: 8,
            k: 5,
            mx: 8,
            my: 4,
            p_max_dbm: 30.0,
            sigma2_dbm: -100.0,
            sigma2_e_dbm: None,
            rho0_db: -30.0,
            d0_m: 1.0,
            alpha_bs: 2.2,
            alpha_irs: 2.2,
            rician_bs: 5.0,
            rician_irs: 5.0,
            phi_elev_rad: 2.0 * std::f64::consts::PI / 3.0,
            rho_outage: 0.05,
            delta_k: 0.05,
            delta_e: 0.05,
            d_irs_m: 50.0,
            theta_irs_rad: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawExperiment {
    mode: String,
    trials: usize,
    base_seed: u64,
    output: String,
    format: String,
    record_timing: bool,
    n_mc_outage: usize,
    threads: usize,
    de_ratio: f64,
    sweep_name: Option<String>,
    sweep_values: Option<Vec<f64>>,
    sweep_start: Option<f64>,
    sweep_stop: Option<f64>,
    sweep_step: Option<f64>,
}

impl Default for RawExperiment {
    fn default() -> Self {
        Self {
            mode: "active".into(),
            trials: 1,
            base_seed: 1,
            output: "results.csv".into(),
            format: "csv".into(),
            record_timing: false,
            n_mc_outage: 10_000,
            threads: 0,
            de_ratio: 0.5,
            sweep_name: None,
            sweep_values: None,
            sweep_start: None,
            sweep_stop: None,
            sweep_step: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawStop {
    active_tol: f64,
    active_max_outer: usize,
    passive_rel_tol: f64,
    passive_max_outer: usize,
}

impl Default for RawStop {
    fn default() -> Self {
        let a = ActiveStop::default();
        let p = PassiveStop::default();
        Self {
            active_tol: a.tol,
            active_max_outer: a.max_outer,
            passive_rel_tol: p.rel_tol,
            passive_max_outer: p.max_outer,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn convert(raw: RawConfig) -> Result<(SystemConfig, ExperimentSpec), SecError> {
    let sys = &raw.system;
    let sigma2 = dbm_to_watts(sys.sigma2_dbm);
    let sigma2_e = sys.sigma2_e_dbm.map(dbm_to_watts).unwrap_or(sigma2);
    let config = SystemConfig {
        n: sys.n,
        k: sys.k,
        mx: sys.mx,
        my: sys.my,
        p_max: dbm_to_watts(sys.p_max_dbm),
        noise: NoisePowers { users: vec![sigma2; sys.k], eve: sigma2_e },
        rho0: db_to_linear(sys.rho0_db),
        d0: sys.d0_m,
        alpha_bs: sys.alpha_bs,
        alpha_irs: sys.alpha_irs,
        k_bs: sys.rician_bs,
        k_irs: sys.rician_irs,
        phi_elev: sys.phi_elev_rad,
        rho_outage: sys.rho_outage,
        delta_k: sys.delta_k,
        delta_e: sys.delta_e,
        irs_position: Polar::new(sys.d_irs_m, sys.theta_irs_rad),
    };
    config.validate()?;

    let exp = &raw.experiment;
    if exp.trials < 1 {
        return Err(SecError::ConfigDomain {
            key: "trials".into(),
            detail: "need at least one trial".into(),
        });
    }
    if !(exp.de_ratio > 0.0 && exp.de_ratio < 1.0) {
        return Err(SecError::ConfigDomain {
            key: "de_ratio".into(),
            detail: "must lie in (0, 1)".into(),
        });
    }
    let sweep = match &exp.sweep_name {
        None => None,
        Some(name) => {
            let name: SweepName = name.parse()?;
            let values = if let Some(vals) = &exp.sweep_values {
                vals.clone()
            } else {
                match (exp.sweep_start, exp.sweep_stop, exp.sweep_step) {
                    (Some(a), Some(b), Some(s)) => range_values(a, b, s)?,
                    _ => {
                        return Err(SecError::ConfigDomain {
                            key: "sweep".into(),
                            detail: "need sweep_values or sweep_start/stop/step".into(),
                        })
                    }
                }
            };
            let spec = SweepSpec { name, values };
            validate_sweep(&spec)?;
            Some(spec)
        }
    };
    let spec = ExperimentSpec {
        mode: exp.mode.parse()?,
        sweep,
        trials: exp.trials,
        base_seed: exp.base_seed,
        output_path: exp.output.clone(),
        format: exp.format.parse()?,
        record_timing: exp.record_timing,
        n_mc_outage: exp.n_mc_outage,
        threads: if exp.threads == 0 { None } else { Some(exp.threads) },
        de_ratio: exp.de_ratio,
        pccp: raw.pccp,
        active_stop: ActiveStop { tol: raw.stop.active_tol, max_outer: raw.stop.active_max_outer },
        passive_stop: PassiveStop {
            rel_tol: raw.stop.passive_rel_tol,
            max_outer: raw.stop.passive_max_outer,
        },
    };
    Ok((config, spec))
}

/// Inclusive arithmetic progression with a small forgiveness at the stop.
pub fn range_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, SecError> {
    if !(step > 0.0) || stop < start {
        return Err(SecError::ConfigDomain {
            key: "sweep".into(),
            detail: "need step > 0 and stop >= start".into(),
        });
    }
    let mut vals = Vec::new();
    let mut v = start;
    while v <= stop + 1e-12 * step.max(1.0) {
        vals.push(v);
        v = start + step * (vals.len() as f64);
    }
    Ok(vals)
}

pub fn validate_sweep(spec: &SweepSpec) -> Result<(), SecError> {
    if spec.values.is_empty() {
        return Err(SecError::ConfigDomain {
            key: "sweep".into(),
            detail: "sweep has no values".into(),
        });
    }
    let bad = |detail: String| Err(SecError::ConfigDomain { key: "sweep".into(), detail });
    for &v in &spec.values {
        match spec.name {
            SweepName::DeRatio => {
                if !(v > 0.0 && v < 1.0) {
                    return bad(format!("de_ratio value {v} outside (0, 1)"));
                }
            }
            SweepName::M => {
                if v < 1.0 || v.fract() != 0.0 {
                    return bad(format!("element count {v} must be a positive integer"));
                }
            }
            SweepName::K => {
                if v < 2.0 || v.fract() != 0.0 {
                    return bad(format!("user count {v} must be an integer >= 2"));
                }
            }
            SweepName::N => {
                if v < 2.0 || v.fract() != 0.0 {
                    return bad(format!("antenna count {v} must be an integer >= 2"));
                }
            }
            SweepName::DeltaK | SweepName::DeltaE => {
                if !(0.0..1.0).contains(&v) {
                    return bad(format!("relative error {v} outside [0, 1)"));
                }
            }
        }
    }
    Ok(())
}

/// Parses a configuration file; missing keys fall back to the §-defaults
/// baked into [`RawSystem::default`]. An empty file yields the full
/// default configuration.
pub fn load_config(path: &Path) -> Result<(SystemConfig, ExperimentSpec), SecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config_str(&text, &path.display().to_string())
}

/// Parses configuration text (the file-less entry point used by the CLI
/// when no `--config` is given).
pub fn load_config_str(
    text: &str,
    origin: &str,
) -> Result<(SystemConfig, ExperimentSpec), SecError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| SecError::ConfigParse {
        path: origin.into(),
        detail: e.to_string(),
    })?;
    convert(raw)
}

/// Serializes a `(config, spec)` pair back into config-file text in the
/// file's native units.
pub fn dump_config(config: &SystemConfig, spec: &ExperimentSpec) -> String {
    let raw = RawConfig {
        system: RawSystem {
            n: config.n,
            k: config.k,
            mx: config.mx,
            my: config.my,
            p_max_dbm: watts_to_dbm(config.p_max),
            sigma2_dbm: watts_to_dbm(config.noise.users[0]),
            sigma2_e_dbm: Some(watts_to_dbm(config.noise.eve)),
            rho0_db: 10.0 * config.rho0.log10(),
            d0_m: config.d0,
            alpha_bs: config.alpha_bs,
            alpha_irs: config.alpha_irs,
            rician_bs: config.k_bs,
            rician_irs: config.k_irs,
            phi_elev_rad: config.phi_elev,
            rho_outage: config.rho_outage,
            delta_k: config.delta_k,
            delta_e: config.delta_e,
            d_irs_m: config.irs_position.dist,
            theta_irs_rad: config.irs_position.angle,
        },
        experiment: RawExperiment {
            mode: spec.mode.to_string(),
            trials: spec.trials,
            base_seed: spec.base_seed,
            output: spec.output_path.clone(),
            format: match spec.format {
                OutputFormat::Csv => "csv".into(),
                OutputFormat::Json => "json".into(),
            },
            record_timing: spec.record_timing,
            n_mc_outage: spec.n_mc_outage,
            threads: spec.threads.unwrap_or(0),
            de_ratio: spec.de_ratio,
            sweep_name: spec.sweep.as_ref().map(|s| s.name.to_string()),
            sweep_values: spec.sweep.as_ref().map(|s| s.values.clone()),
            sweep_start: None,
            sweep_stop: None,
            sweep_step: None,
        },
        pccp: spec.pccp,
        stop: RawStop {
            active_tol: spec.active_stop.tol,
            active_max_outer: spec.active_stop.max_outer,
            passive_rel_tol: spec.passive_stop.rel_tol,
            passive_max_outer: spec.passive_stop.max_outer,
        },
    };
    toml::to_string(&raw).expect("config serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

fn apply_sweep(
    config: &SystemConfig,
    de_ratio: f64,
    sweep: Option<(SweepName, f64)>,
) -> (SystemConfig, f64) {
    let mut cfg = config.clone();
    let mut ratio = de_ratio;
    if let Some((name, value)) = sweep {
        match name {
            SweepName::DeRatio => ratio = value,
            SweepName::M => {
                let (mx, my) = grid_for(value as usize);
                cfg.mx = mx;
                cfg.my = my;
            }
            SweepName::K => {
                cfg.k = value as usize;
                cfg.noise.users = vec![cfg.noise.users[0]; cfg.k];
            }
            SweepName::N => cfg.n = value as usize,
            SweepName::DeltaK => cfg.delta_k = value,
            SweepName::DeltaE => cfg.delta_e = value,
        }
    }
    (cfg, ratio)
}

struct TrialOutput {
    metrics: Vec<(&'static str, f64)>,
    status: String,
}

fn run_one_trial(
    mode: Mode,
    config: &SystemConfig,
    de_ratio: f64,
    seed: u64,
    spec: &ExperimentSpec,
) -> TrialOutput {
    match run_one_trial_inner(mode, config, de_ratio, seed, spec) {
        Ok(out) => out,
        Err(e) => TrialOutput {
            metrics: vec![("feasible", 0.0)],
            status: format!("error: {e}"),
        },
    }
}

fn run_one_trial_inner(
    mode: Mode,
    config: &SystemConfig,
    de_ratio: f64,
    seed: u64,
    spec: &ExperimentSpec,
) -> Result<TrialOutput, SecError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topology = sample_topology(config, de_ratio, &mut rng)?;
    let channels = sample_channels(config, &topology, &mut rng)?;
    let mut metrics: Vec<(&'static str, f64)> = Vec::new();
    let status = "ok".to_string();
    match mode {
        Mode::Active | Mode::Validate => {
            let errors = CsiErrorModel::from_channels(config, &channels);
            let (dk, de_mat) = sample_csi_errors(&errors, config.m(), &mut rng);
            let est = EstimatedChannels::from_errors(channels, &dk, &de_mat)?;
            let start = Instant::now();
            let sol = ao_active(&est, &errors, config, spec.active_stop, spec.pccp, &mut rng);
            let elapsed = start.elapsed().as_secs_f64();
            metrics.push(("secrecy_rate", if sol.feasible { sol.r_sec } else { 0.0 }));
            metrics.push(("feasible", if sol.feasible { 1.0 } else { 0.0 }));
            metrics.push(("iterations", sol.iterations as f64));
            if mode == Mode::Validate {
                let outage =
                    validate_outage(&sol, &est, &errors, spec.n_mc_outage, &mut rng, config);
                metrics.push(("empirical_outage", outage));
            }
            if spec.record_timing {
                metrics.push(("solve_time_s", elapsed));
            }
        }
        Mode::Passive => {
            let stats = ergodic_eve_correlation(config, &topology)?;
            let problem = PassiveProblem::ergodic(&channels, &stats, config);
            let start = Instant::now();
            let sol = ao_passive(&problem, spec.passive_stop, EUpdate::ClosedForm, &mut rng);
            let elapsed = start.elapsed().as_secs_f64();
            metrics.push(("avg_secrecy_rate", sol.achieved_rate));
            metrics.push(("feasible", if sol.achieved_rate > 0.0 { 1.0 } else { 0.0 }));
            metrics.push(("iterations", sol.iterations as f64));
            if spec.record_timing {
                metrics.push(("solve_time_s", elapsed));
            }
        }
        Mode::Nonrobust => {
            let errors = CsiErrorModel::from_channels(config, &channels);
            let (dk, de_mat) = sample_csi_errors(&errors, config.m(), &mut rng);
            let est = EstimatedChannels::from_errors(channels, &dk, &de_mat)?;
            let start = Instant::now();
            let sol =
                crate::passive::nonrobust_baseline(&est, config, spec.passive_stop, &mut rng);
            let elapsed = start.elapsed().as_secs_f64();
            let outage =
                nonrobust_outage(&sol, &est, &errors, spec.n_mc_outage, &mut rng, config);
            metrics.push(("secrecy_rate", sol.achieved_rate));
            metrics.push(("feasible", if sol.achieved_rate > 0.0 { 1.0 } else { 0.0 }));
            metrics.push(("iterations", sol.iterations as f64));
            metrics.push(("empirical_outage", outage));
            if spec.record_timing {
                metrics.push(("solve_time_s", elapsed));
            }
        }
    }
    Ok(TrialOutput { metrics, status })
}

/// Empirical outage of a non-robust design's claimed rate under redrawn
/// cascaded errors.
pub fn nonrobust_outage(
    sol: &crate::passive::PassiveSolution,
    est: &EstimatedChannels,
    errors: &CsiErrorModel,
    n_mc: usize,
    rng: &mut ChaCha8Rng,
    config: &SystemConfig,
) -> f64 {
    let kh = config.k - 1;
    let min_helper = (0..kh)
        .map(|idx| {
            rate_helper(
                &sol.z,
                sol.t[idx],
                &est.base.g_users[idx],
                &est.base.q,
                config.noise.users[idx],
            )
        })
        .fold(f64::INFINITY, f64::min);
    let sigma2_kk = *config.noise.users.last().unwrap();
    let mut violations = 0usize;
    for _ in 0..n_mc {
        let (dk, de_mat) = sample_csi_errors(errors, config.m(), rng);
        let h_k = &est.h_k_hat + dk;
        let h_e = &est.h_e_hat + de_mat;
        let r_k = rate_reflect(&sol.w, &sol.e, &h_k, sigma2_kk);
        let r_e = rate_reflect(&sol.w, &sol.e, &h_e, config.noise.eve);
        if min_helper.min(r_k) - r_e < sol.achieved_rate {
            violations += 1;
        }
    }
    violations as f64 / n_mc as f64
}

/// Runs the full sweep; one row per (sweep value, trial, metric), ordered
/// deterministically and independent of the worker-thread count.
pub fn run_sweep(config: &SystemConfig, spec: &ExperimentSpec) -> Vec<ResultRow> {
    let (sweep_name, values): (String, Vec<f64>) = match &spec.sweep {
        Some(s) => (s.name.to_string(), s.values.clone()),
        None => ("none".into(), vec![0.0]),
    };
    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|si| (0..spec.trials).map(move |t| (si, t)))
        .collect();

    let run_all = || -> Vec<(usize, usize, u64, TrialOutput)> {
        jobs.par_iter()
            .map(|&(si, trial)| {
                let value = values[si];
                let sweep = spec.sweep.as_ref().map(|s| (s.name, value));
                let (cfg, ratio) = apply_sweep(config, spec.de_ratio, sweep);
                let seed = mix_seed(spec.base_seed, value, trial as u64);
                let out = run_one_trial(spec.mode, &cfg, ratio, seed, spec);
                (si, trial, seed, out)
            })
            .collect()
    };
    let mut outputs = match spec.threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(run_all),
        _ => run_all(),
    };
    outputs.sort_by_key(|&(si, trial, _, _)| (si, trial));

    let mut rows = Vec::new();
    for (si, trial, seed, out) in outputs {
        for (metric, value) in &out.metrics {
            rows.push(ResultRow {
                mode: spec.mode.to_string(),
                sweep_name: sweep_name.clone(),
                sweep_value: values[si],
                trial,
                seed,
                metric_name: (*metric).to_string(),
                metric_value: *value,
                status: out.status.clone(),
            });
        }
    }
    rows
}

/// CSV header, fixed by the output contract.
pub const CSV_HEADER: &str = "mode,sweep_name,sweep_value,trial,seed,metric_name,metric_value,status";

/// Renders rows to CSV or JSON text (byte-stable for identical rows).
pub fn render_results(rows: &[ResultRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.mode,
                    r.sweep_name,
                    r.sweep_value,
                    r.trial,
                    r.seed,
                    r.metric_name,
                    r.metric_value,
                    r.status
                ));
            }
            out
        }
        OutputFormat::Json => {
            let mut out = serde_json::to_string_pretty(rows).expect("row serialization");
            out.push('\n');
            out
        }
    }
}

/// Writes rows to a file in the requested format.
pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<(), SecError> {
    let text = render_results(rows, format);
    std::fs::write(path, text).map_err(|source| SecError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_spec(mode: Mode) -> (SystemConfig, ExperimentSpec) {
        let config = SystemConfig::defaults(3, 3, 2, 2);
        let spec = ExperimentSpec {
            mode,
            trials: 2,
            base_seed: 7,
            n_mc_outage: 200,
            ..ExperimentSpec::default()
        };
        (config, spec)
    }

    #[test]
    fn load_defaults_from_empty_text() {
        let (config, spec) = load_config_str("", "inline").unwrap();
        assert_eq!(config.n, 8);
        assert_eq!(config.k, 5);
        assert_eq!(config.m(), 32);
        assert!((config.rho0 - 1e-3).abs() < 1e-18);
        assert!((config.p_max - 1.0).abs() < 1e-15);
        assert!((config.noise.users[0] - 1e-13).abs() < 1e-27);
        assert!((config.rho_outage - 0.05).abs() < 1e-15);
        assert_eq!(config.irs_position, Polar::new(50.0, 0.0));
        assert!((config.phi_elev - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-15);
        assert_eq!(spec.mode, Mode::Active);
        assert_eq!(spec.trials, 1);
    }

    #[test]
    fn domain_error_names_the_key() {
        let err = load_config_str("[system]\nrho_outage = 1.5\n", "inline").unwrap_err();
        match err {
            SecError::ConfigDomain { key, .. } => assert_eq!(key, "rho_outage"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn parse_error_reports_origin() {
        let err = load_config_str("[system\n", "broken.toml").unwrap_err();
        match err {
            SecError::ConfigParse { path, .. } => assert_eq!(path, "broken.toml"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
[system]
n = 4
k = 3
mx = 2
my = 4
p_max_dbm = 30.0
sigma2_dbm = -100.0
delta_k = 0.1

[experiment]
mode = "passive"
trials = 3
base_seed = 42
sweep_name = "m"
sweep_values = [16.0, 32.0]
"#;
        let (c1, s1) = load_config_str(text, "inline").unwrap();
        let dumped = dump_config(&c1, &s1);
        let (c2, s2) = load_config_str(&dumped, "dumped").unwrap();
        assert_eq!(c1, c2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn seed_mixing_separates_streams() {
        let a = mix_seed(1, 0.2, 0);
        let b = mix_seed(1, 0.2, 1);
        let c = mix_seed(1, 0.3, 0);
        let d = mix_seed(2, 0.2, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_eq!(a, mix_seed(1, 0.2, 0));
    }

    #[test]
    fn grid_factorization() {
        assert_eq!(grid_for(8), (2, 4));
        assert_eq!(grid_for(16), (4, 4));
        assert_eq!(grid_for(32), (4, 8));
        assert_eq!(grid_for(64), (8, 8));
        assert_eq!(grid_for(7), (1, 7));
    }

    #[test]
    fn range_value_generation() {
        let v = range_values(0.2, 0.8, 0.3).unwrap();
        assert_eq!(v.len(), 3);
        assert!((v[2] - 0.8).abs() < 1e-12);
        assert!(range_values(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn sweep_domain_validation() {
        let bad = SweepSpec { name: SweepName::DeRatio, values: vec![0.5, 1.5] };
        assert!(validate_sweep(&bad).is_err());
        let bad_m = SweepSpec { name: SweepName::M, values: vec![8.5] };
        assert!(validate_sweep(&bad_m).is_err());
        let ok = SweepSpec { name: SweepName::K, values: vec![3.0, 5.0] };
        assert!(validate_sweep(&ok).is_ok());
    }

    #[test]
    fn emit_results_examples() {
        let empty = render_results(&[], OutputFormat::Csv);
        assert_eq!(empty, format!("{CSV_HEADER}\n"));
        let row = ResultRow {
            mode: "active".into(),
            sweep_name: "de_ratio".into(),
            sweep_value: 0.5,
            trial: 0,
            seed: 99,
            metric_name: "secrecy_rate".into(),
            metric_value: 1.25,
            status: "ok".into(),
        };
        let csv = render_results(std::slice::from_ref(&row), OutputFormat::Csv);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "active,de_ratio,0.5,0,99,secrecy_rate,1.25,ok");
        let json = render_results(std::slice::from_ref(&row), OutputFormat::Json);
        let parsed: Vec<ResultRow> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, vec![row]);
    }

    #[test]
    fn passive_trial_rows_and_determinism() {
        let (config, mut spec) = desk_spec(Mode::Passive);
        spec.passive_stop.max_outer = 3;
        let rows1 = run_sweep(&config, &spec);
        let rows2 = run_sweep(&config, &spec);
        assert_eq!(rows1, rows2);
        // trials * metrics (avg rate, feasible, iterations).
        assert_eq!(rows1.len(), 2 * 3);
        assert!(rows1.iter().all(|r| r.metric_value.is_finite()));
    }

    #[test]
    fn thread_count_does_not_change_rows() {
        let (config, mut spec) = desk_spec(Mode::Passive);
        spec.passive_stop.max_outer = 2;
        spec.trials = 3;
        spec.threads = Some(1);
        let a = run_sweep(&config, &spec);
        spec.threads = Some(4);
        let b = run_sweep(&config, &spec);
        assert_eq!(a, b);
        let ca = render_results(&a, OutputFormat::Csv);
        let cb = render_results(&b, OutputFormat::Csv);
        assert_eq!(ca.as_bytes(), cb.as_bytes());
    }
}
