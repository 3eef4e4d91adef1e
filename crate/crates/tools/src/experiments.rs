//! Experiment configurations and drivers.
//!
//! Replication `r` of every Monte Carlo experiment uses the child seed
//! `child_seed(seed, r)`. Results are collected in replication order, so
//! outputs do not depend on the thread count.

use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use cmc_core::bounds::{class_constants, derive_class_params, theorem1_threshold, ClassConstants};
use cmc_core::estimate::{count, estimate, estimation_error, CountAccumulator};
use cmc_core::exact::total_variation;
use cmc_core::hardness::{
    block_pair_stationary, build_block_instance, cover_time_floor, cover_time_proof_point, cover_time_threshold,
    touring_exceeds, BlockParams, CoverTimeEstimate,
};
use cmc_core::mixing::{at, mixing_report, EtaMode, MixingReport};
use cmc_core::ope::{
    compose_policy, greedy_transform, perturbation_bound, plug_in_value, recover_greedy_m, solve_value,
    value_thresholds, ValueThresholds,
};
use cmc_core::policy::class_name;
use cmc_core::presets::{preset, Preset};
use cmc_core::rng::child_seed;
use cmc_core::simulate::{simulate, simulate_via_array_scheme};
use cmc_core::{CmcModel, InitialLaw, LoggingPolicy, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::formats::{read_cost_csv, read_initial_law, read_json, read_model, read_policy};

/// Configuration problems, reported with their own exit code.
#[derive(Debug, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ErrorCurve,
    PacValidation,
    MixingReport,
    CoverTime,
    OpeEval,
    GreedyPipeline,
}

/// Where the model, logging policy and initial law come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// A named preset.
    Preset(String),
    /// JSON files; the initial law defaults to uniform over pairs.
    Files {
        model: PathBuf,
        policy: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init: Option<PathBuf>,
    },
    /// A block hard instance started from its stationary pair law.
    Block {
        d: usize,
        k: usize,
        #[serde(default = "default_iota")]
        iota: f64,
        #[serde(default = "default_block_epsilon")]
        epsilon: f64,
        /// `ξ^(l)` for each control; all ones when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        xi: Option<Vec<Vec<u8>>>,
    },
}

fn default_iota() -> f64 {
    0.3
}
fn default_block_epsilon() -> f64 {
    0.01
}
fn default_replications() -> usize {
    20
}
fn default_epsilon() -> f64 {
    0.15
}
fn default_delta() -> f64 {
    0.1
}
fn one() -> f64 {
    1.0
}
fn default_c_max() -> f64 {
    64.0
}
fn default_alpha() -> f64 {
    0.9
}
fn default_cap() -> u128 {
    cmc_core::exact::DEFAULT_PATH_CAP
}
fn default_tol() -> f64 {
    0.05
}

/// One experiment. Every field but `kind` and `source` has a default, and
/// command-line flags override fields after the file is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub source: ModelSource,
    /// Sample sizes `m`. Mixing reports use the first entry as the horizon.
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Master seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Universal constant of the thresholds.
    #[serde(default = "one")]
    pub c: f64,
    /// Bernstein constant.
    #[serde(default = "one")]
    pub c_pel: f64,
    /// Calibration ceiling for `c` in PAC validation.
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    /// Touring-time horizon; the cover-time threshold when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Discount factor for OPE.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Target policy table (`d × k` JSON matrix) for OPE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_policy: Option<PathBuf>,
    /// Cost CSV for OPE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<PathBuf>,
    #[serde(default)]
    pub eta_mode: EtaMode,
    /// Path cap for exact enumeration.
    #[serde(default = "default_cap")]
    pub cap: u128,
    /// Row-sum tolerance before renormalizing recovered greedy rows.
    #[serde(default = "default_tol")]
    pub recovery_tol: f64,
    /// Output path; not part of the configuration hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A configuration with every default.
    pub fn new(kind: ExperimentKind, source: ModelSource) -> Self {
        serde_json::from_value(serde_json::json!({
            "kind": kind,
            "source": source,
        }))
        .expect("defaults deserialize")
    }

    /// Checks the invariants and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        let needs_grid = !matches!(self.kind, ExperimentKind::CoverTime);
        if needs_grid && self.m.is_empty() {
            return Err(config_err("the m grid is empty"));
        }
        if self.m.contains(&0) {
            return Err(config_err("m values must be positive"));
        }
        if !(self.epsilon > 0.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err("need epsilon > 0 and delta in (0, 1)"));
        }
        if !(self.c > 0.0) || !(self.c_pel > 0.0) || !(self.c_max >= self.c) {
            return Err(config_err("need c > 0, c_pel > 0 and c_max >= c"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_err("alpha must lie in (0, 1)"));
        }
        let mut files: Vec<&PathBuf> = Vec::new();
        if let ModelSource::Files { model, policy, init } = &self.source {
            files.extend([model, policy]);
            files.extend(init);
        }
        files.extend(&self.target_policy);
        files.extend(&self.cost);
        for f in files {
            if !f.exists() {
                return Err(config_err(format!("{} does not exist", f.display())));
            }
        }
        Ok(())
    }

    /// Seeds of all replications.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64)
            .map(|r| child_seed(self.seed, r))
            .collect()
    }
}

/// Loads the instance a source describes.
pub fn resolve_source(source: &ModelSource) -> Result<Preset> {
    Ok(match source {
        ModelSource::Preset(name) => preset(name).map_err(|e| config_err(e.to_string()))?,
        ModelSource::Files { model, policy, init } => {
            let model = read_model(model)?;
            let policy = read_policy(policy)?;
            let init = match init {
                Some(p) => read_initial_law(p)?,
                None => InitialLaw::uniform_pairs(model.d(), model.k()),
            };
            Preset {
                name: "files".into(),
                model,
                policy,
                init,
            }
        }
        ModelSource::Block {
            d,
            k,
            iota,
            epsilon,
            xi,
        } => {
            let mut params = BlockParams::all_ones(*d, *k, *iota, *epsilon);
            if let Some(xi) = xi {
                params.xi = xi.clone();
            }
            let (model, policy) = build_block_instance(&params)?;
            Preset {
                name: "block".into(),
                model,
                policy,
                init: InitialLaw::Pairs(block_pair_stationary(&params)?),
            }
        }
    })
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Class constants, when the class admits them for this instance.
pub fn constants_for(model: &CmcModel, policy: &LoggingPolicy) -> Option<ClassConstants> {
    let params = derive_class_params(model, policy).ok()?;
    class_constants(model.d(), model.k(), &params).ok()
}

// ---------------------------------------------------------------- error curve

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurveRow {
    pub m: usize,
    pub seed: u64,
    pub replication: usize,
    pub class: String,
    pub sup_error: f64,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub zeta1: Option<f64>,
    pub zeta2: Option<f64>,
    pub c_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurveSummary {
    pub m: usize,
    pub median_sup_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub rows: Vec<ErrorCurveRow>,
    pub summary: Vec<ErrorCurveSummary>,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Errors of `M̂` at every `m` in `grid`. Each replication simulates one path
/// of length `max(grid)` and estimates from its prefixes.
pub fn error_curve(instance: &Preset, grid: &[usize], seeds: &[u64]) -> Result<ErrorCurve> {
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let m_max = *grid.last().context("empty m grid")?;
    let (model, policy) = (&instance.model, &instance.policy);
    let (d, k) = (model.d(), model.k());
    let consts = constants_for(model, policy);
    let class = class_name(policy).to_string();
    let per_rep: Vec<Result<Vec<(usize, f64)>>> = seeds
        .par_iter()
        .map(|&seed| {
            let traj = simulate(model, policy, &instance.init, m_max, seed)?;
            let mut acc = CountAccumulator::new(d, k, traj.episode_horizon);
            let mut out = Vec::with_capacity(grid.len());
            let mut next = 0;
            for (i, p) in traj.pairs.iter().enumerate() {
                acc.push(*p);
                while next < grid.len() && grid[next] == i {
                    let est = estimate(&acc.clone().finish());
                    out.push((grid[next], estimation_error(&est.model, model)?.sup_norm));
                    next += 1;
                }
            }
            Ok(out)
        })
        .collect();
    let mut rows = Vec::new();
    for (r, res) in per_rep.into_iter().enumerate() {
        for (m, err) in res? {
            rows.push(ErrorCurveRow {
                m,
                seed: seeds[r],
                replication: r,
                class: class.clone(),
                sup_error: err,
                t: consts.map(|c| c.t),
                zeta1: consts.map(|c| c.zeta1),
                zeta2: consts.map(|c| c.zeta2),
                c_delta: consts.map(|c| c.c_delta),
            });
        }
    }
    rows.sort_by_key(|r| (r.m, r.replication));
    let summary = grid
        .iter()
        .map(|&m| {
            let errs: Vec<f64> = rows.iter().filter(|r| r.m == m).map(|r| r.sup_error).collect();
            ErrorCurveSummary {
                m,
                median_sup_error: median(&errs),
            }
        })
        .collect();
    Ok(ErrorCurve { rows, summary })
}

// ------------------------------------------------------------- PAC validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacAttempt {
    pub c: f64,
    pub m_star: usize,
    pub failures: usize,
    pub empirical_failure_rate: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacValidation {
    pub m_star: usize,
    pub failures: usize,
    pub empirical_failure_rate: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Allowed excess over `δ`: `2 √(δ / R)`.
    pub tolerance: f64,
    pub pass: bool,
    /// Constant of the final attempt.
    pub c: f64,
    /// Whether `c` had to be raised above its configured value.
    pub calibrated: bool,
    pub attempts: Vec<PacAttempt>,
}

/// Failure fraction of `sup_l ‖M̂ − M‖_∞ > ε` at the first-theorem threshold,
/// doubling `c` up to `c_max` until the fraction is within tolerance.
pub fn pac_validation(instance: &Preset, cfg: &ExperimentConfig) -> Result<PacValidation> {
    let (model, policy) = (&instance.model, &instance.policy);
    let (d, k) = (model.d(), model.k());
    let params = derive_class_params(model, policy)?;
    let consts = class_constants(d, k, &params)?;
    let seeds = cfg.seeds();
    let tolerance = 2.0 * (cfg.delta / seeds.len() as f64).sqrt();
    let mut attempts = Vec::new();
    let mut c = cfg.c;
    loop {
        let inputs = consts.inputs(d, k, cfg.epsilon, cfg.delta, c, cfg.c_pel);
        let threshold = theorem1_threshold(&inputs);
        ensure!(
            threshold.is_finite() && threshold < 1e10,
            "threshold {threshold} is out of reach"
        );
        let m_star = threshold.ceil() as usize;
        let errs: Vec<Result<f64>> = seeds
            .par_iter()
            .map(|&seed| {
                let traj = simulate(model, policy, &instance.init, m_star, seed)?;
                let est = estimate(&count(&traj, d, k));
                Ok(estimation_error(&est.model, model)?.sup_norm)
            })
            .collect();
        let mut failures = 0;
        for e in errs {
            if e? > cfg.epsilon {
                failures += 1;
            }
        }
        let rate = failures as f64 / seeds.len() as f64;
        let pass = rate <= cfg.delta + tolerance;
        attempts.push(PacAttempt {
            c,
            m_star,
            failures,
            empirical_failure_rate: rate,
            pass,
        });
        if pass || c * 2.0 > cfg.c_max {
            return Ok(PacValidation {
                m_star,
                failures,
                empirical_failure_rate: rate,
                delta: cfg.delta,
                epsilon: cfg.epsilon,
                tolerance,
                pass,
                c,
                calibrated: c != cfg.c,
                attempts,
            });
        }
        c *= 2.0;
    }
}

// ---------------------------------------------------------------- mixing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub i: usize,
    pub j: usize,
    pub eta_bar: f64,
    pub phi: f64,
    pub theta_bar: f64,
}

/// Flattens a report into per-`(i, j)` rows.
pub fn mixing_rows(report: &MixingReport) -> Vec<MixingRow> {
    let mut rows = Vec::new();
    for i in 0..=report.m {
        for j in i + 1..=report.m {
            rows.push(MixingRow {
                i,
                j,
                eta_bar: at(&report.eta_bar, i, j),
                phi: at(&report.phi, i, j),
                theta_bar: at(&report.theta_bar, i, j),
            });
        }
    }
    rows
}

// ---------------------------------------------------------------- cover time

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverTimeReport {
    pub n: usize,
    pub replications: usize,
    pub exceed: usize,
    pub p_exceed: f64,
    pub ci_half_width: f64,
    pub floor: f64,
    pub threshold: f64,
    pub proof_point: f64,
}

/// Empirical `P(𝕋 > n)` on the configured instance, in parallel over
/// replications.
pub fn cover_time(instance: &Preset, n: Option<usize>, seeds: &[u64], iota: f64) -> Result<CoverTimeReport> {
    let (model, policy) = (&instance.model, &instance.policy);
    let (d, k) = (model.d(), model.k());
    let threshold = cover_time_threshold(d, k, iota);
    let n = n.unwrap_or(threshold.floor() as usize);
    let hits: Vec<Result<bool>> = seeds
        .par_iter()
        .map(|&s| Ok(touring_exceeds(model, policy, &instance.init, n, s)?))
        .collect();
    let mut exceed = 0;
    for h in hits {
        exceed += usize::from(h?);
    }
    let est = CoverTimeEstimate::from_counts(n, seeds.len(), exceed);
    Ok(CoverTimeReport {
        n,
        replications: est.replications,
        exceed,
        p_exceed: est.p,
        ci_half_width: est.ci_half_width,
        floor: cover_time_floor(),
        threshold,
        proof_point: cover_time_proof_point(d, k, iota),
    })
}

// ---------------------------------------------------------------- OPE

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeRow {
    pub m: usize,
    pub seed: u64,
    pub replication: usize,
    pub value_error: f64,
    pub bound: f64,
    pub matrix_error: f64,
    pub residual: f64,
    pub undefined_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpeEval {
    pub v: Vec<f64>,
    pub rows: Vec<OpeRow>,
    pub thresholds: Option<ValueThresholds>,
}

/// Target policy and state-control cost for OPE. Defaults: the logging
/// table when it is stationary (uniform otherwise), and cost `(s + 1) / d`.
pub fn ope_inputs(instance: &Preset, cfg: &ExperimentConfig) -> Result<(Matrix, Matrix)> {
    let (d, k) = (instance.model.d(), instance.model.k());
    let pi = match &cfg.target_policy {
        Some(p) => read_json::<Matrix>(p)?,
        None => match &instance.policy {
            LoggingPolicy::StationaryRandomized { table } => table.clone(),
            _ => Matrix::filled(d, k, 1.0 / k as f64),
        },
    };
    let cost = match &cfg.cost {
        Some(p) => {
            let rows = read_cost_csv(std::fs::File::open(p)?, d, k)?;
            Matrix::from_rows(&rows)?
        }
        None => {
            let rows: Vec<Vec<f64>> = (0..d).map(|s| vec![(s + 1) as f64 / d as f64; k]).collect();
            Matrix::from_rows(&rows)?
        }
    };
    Ok((pi, cost))
}

pub fn ope_eval(instance: &Preset, cfg: &ExperimentConfig) -> Result<OpeEval> {
    let (model, policy) = (&instance.model, &instance.policy);
    let (d, k) = (model.d(), model.k());
    let (pi, cost) = ope_inputs(instance, cfg)?;
    let truth = compose_policy(model, &pi, &cost, cfg.alpha)?;
    let v = solve_value(&truth)?.v;
    let seeds = cfg.seeds();
    let m_max = *cfg.m.iter().max().context("empty m grid")?;
    let per_rep: Vec<Result<Vec<OpeRow>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| {
            let traj = simulate(model, policy, &instance.init, m_max, seed)?;
            let mut rows = Vec::new();
            for &m in &cfg.m {
                let prefix = cmc_core::Trajectory {
                    pairs: traj.pairs[..=m].to_vec(),
                    ..traj.clone()
                };
                let est = estimate(&count(&prefix, d, k));
                let hat = compose_policy(&est.model, &pi, &cost, cfg.alpha)?;
                let undefined: Vec<usize> = (0..d)
                    .filter(|&s| est.undefined_rows.iter().any(|&[u, l]| u == s && pi[(s, l)] > 0.0))
                    .collect();
                let plug = plug_in_value(&hat.m, &hat.g, cfg.alpha, &undefined)?;
                let value_error = plug
                    .solution
                    .v
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                rows.push(OpeRow {
                    m,
                    seed,
                    replication: r,
                    value_error,
                    bound: perturbation_bound(&truth.m, &hat.m, &truth.g, cfg.alpha)?,
                    matrix_error: truth.m.inf_norm_distance(&hat.m)?,
                    residual: plug.solution.residual,
                    undefined_rows: undefined.len(),
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    rows.sort_by_key(|r| (r.m, r.replication));
    let thresholds = derive_class_params(model, policy)
        .and_then(|p| class_constants(d, k, &p))
        .ok()
        .map(|c| {
            let inputs = c.inputs(d, k, cfg.epsilon, cfg.delta, cfg.c, cfg.c_pel);
            value_thresholds(&inputs, c.c_theta, &truth.g, cfg.alpha)
        });
    Ok(OpeEval { v, rows, thresholds })
}

// ---------------------------------------------------------------- greedy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyRow {
    pub m: usize,
    pub seed: u64,
    pub replication: usize,
    /// `sup_l ‖(1/υ) 𝔐̂_block − M^(l)‖_∞` before renormalization.
    pub recovery_error: f64,
    /// The same after renormalizing rows.
    pub renormalized_error: f64,
    /// Largest entrywise gap of the top-left block of `𝔐̂` to `(1 − υ)/d`.
    pub top_left_error: f64,
}

/// Simulate, transform, estimate the `2d`-state chain and read `M^(l)` back.
pub fn greedy_pipeline(instance: &Preset, cfg: &ExperimentConfig) -> Result<Vec<GreedyRow>> {
    let (model, policy) = (&instance.model, &instance.policy);
    let LoggingPolicy::Greedy { upsilon, .. } = policy else {
        bail!(config_err("greedy-pipeline needs a greedy logging policy"));
    };
    let upsilon = *upsilon;
    let (d, k) = (model.d(), model.k());
    let seeds = cfg.seeds();
    let per_rep: Vec<Result<Vec<GreedyRow>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| {
            let mut rows = Vec::new();
            for (g, &m) in cfg.m.iter().enumerate() {
                let traj = simulate(model, policy, &instance.init, m, seed)?;
                let mask_seed = child_seed(seed, g as u64 + 1);
                let tilde = greedy_transform(&traj, d, k, mask_seed)?;
                let est = estimate(&count(&tilde, 2 * d, k));
                let rec = recover_greedy_m(&est.model, upsilon, cfg.recovery_tol)?;
                let mut raw_err: f64 = 0.0;
                let mut top: f64 = 0.0;
                let corner = Matrix::filled(d, d, (1.0 - upsilon) / d as f64);
                for l in 0..k {
                    raw_err = raw_err.max(rec.raw[l].inf_norm_distance(model.matrix(l))?);
                    top = top.max(est.model.matrix(l).block(0, 0, d, d).max_abs_distance(&corner)?);
                }
                rows.push(GreedyRow {
                    m,
                    seed,
                    replication: r,
                    recovery_error: raw_err,
                    renormalized_error: estimation_error(&rec.model, model)?.sup_norm,
                    top_left_error: top,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    rows.sort_by_key(|r| (r.m, r.replication));
    Ok(rows)
}

// ---------------------------------------------------------------- helpers

/// Mean and 99% interval of one pair's visit count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitInterval {
    pub state: usize,
    pub control: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// 99% normal intervals of `E[N_s^(l)]` over replications at sample size `m`.
pub fn visit_intervals(instance: &Preset, m: usize, seeds: &[u64]) -> Result<Vec<VisitInterval>> {
    let (model, policy) = (&instance.model, &instance.policy);
    let (d, k) = (model.d(), model.k());
    let counts: Vec<Result<Vec<u64>>> = seeds
        .par_iter()
        .map(|&s| {
            let traj = simulate(model, policy, &instance.init, m, s)?;
            let c = count(&traj, d, k);
            Ok((0..d * k).map(|p| c.visits(p / k, p % k)).collect())
        })
        .collect();
    let counts: Vec<Vec<u64>> = counts.into_iter().collect::<Result<_>>()?;
    let r = counts.len() as f64;
    Ok((0..d * k)
        .map(|p| {
            let xs: Vec<f64> = counts.iter().map(|c| c[p] as f64).collect();
            let mean = xs.iter().sum::<f64>() / r;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0).max(1.0);
            let half = 2.576 * (var / r).sqrt();
            VisitInterval {
                state: p / k,
                control: p % k,
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
            }
        })
        .collect())
}

/// Empirical path-law TV between the direct and the array sampler. Path `r`
/// of the direct sampler uses `child_seed(seed, 2r)` and of the array
/// sampler `child_seed(seed, 2r + 1)`.
pub fn sampler_tv(instance: &Preset, m: usize, replications: usize, seed: u64) -> Result<f64> {
    let (model, policy) = (&instance.model, &instance.policy);
    let n = model.d() * model.k();
    let size = n.checked_pow(m as u32 + 1).context("path space too large")?;
    let encode = |t: &cmc_core::Trajectory| t.pairs.iter().fold(0, |acc, p| acc * n + p.flat(model.k()));
    let chunk = 10_000;
    let chunks: Vec<Result<(Vec<u64>, Vec<u64>)>> = (0..replications.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut a = vec![0u64; size];
            let mut b = vec![0u64; size];
            for r in c * chunk..((c + 1) * chunk).min(replications) {
                let r = r as u64;
                a[encode(&simulate(model, policy, &instance.init, m, child_seed(seed, 2 * r))?)] += 1;
                b[encode(&simulate_via_array_scheme(
                    model,
                    policy,
                    &instance.init,
                    m,
                    child_seed(seed, 2 * r + 1),
                )?)] += 1;
            }
            Ok((a, b))
        })
        .collect();
    let mut a = vec![0u64; size];
    let mut b = vec![0u64; size];
    for ch in chunks {
        let (x, y) = ch?;
        a.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        b.iter_mut().zip(y).for_each(|(s, v)| *s += v);
    }
    let total = replications as f64;
    let pa: Vec<f64> = a.iter().map(|&x| x as f64 / total).collect();
    let pb: Vec<f64> = b.iter().map(|&x| x as f64 / total).collect();
    Ok(total_variation(&pa, &pb))
}

/// Output of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Report {
    ErrorCurve(ErrorCurve),
    Pac(PacValidation),
    Mixing(MixingReport),
    CoverTime(CoverTimeReport),
    Ope(OpeEval),
    Greedy(Vec<GreedyRow>),
}

/// Runs a validated configuration.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let instance = resolve_source(&cfg.source)?;
    let seeds = cfg.seeds();
    Ok(match cfg.kind {
        ExperimentKind::ErrorCurve => Report::ErrorCurve(error_curve(&instance, &cfg.m, &seeds)?),
        ExperimentKind::PacValidation => Report::Pac(pac_validation(&instance, cfg)?),
        ExperimentKind::MixingReport => Report::Mixing(mixing_report(
            &instance.model,
            &instance.policy,
            &instance.init,
            cfg.m[0],
            cfg.cap,
            cfg.eta_mode,
        )?),
        ExperimentKind::CoverTime => {
            let iota = match &cfg.source {
                ModelSource::Block { iota, .. } => *iota,
                _ => return Err(config_err("cover-time needs a block source")),
            };
            Report::CoverTime(cover_time(&instance, cfg.n, &seeds, iota)?)
        }
        ExperimentKind::OpeEval => Report::Ope(ope_eval(&instance, cfg)?),
        ExperimentKind::GreedyPipeline => Report::Greedy(greedy_pipeline(&instance, cfg)?),
    })
}
