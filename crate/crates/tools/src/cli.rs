//! The `cmc` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cmc_core::bounds::{class_constants, derive_class_params, theorem1_threshold, theorem2_threshold};
use cmc_core::estimate::{count, estimate, estimation_error};
use cmc_core::hardness::{build_sigma_instance, sigma_stationary, BlockParams, SigmaParams};
use cmc_core::mixing::{mixing_report, EtaMode};
use cmc_core::ope::{
    compose_policy, perturbation_bound, plug_in_value, solve_value, value_thresholds, ValueThresholds,
};
use cmc_core::policy::class_name;
use cmc_core::presets::{Preset, CLASS_PRESETS};
use cmc_core::simulate::{simulate, simulate_via_array_scheme};
use cmc_core::{LoggingPolicy, Matrix};
use serde::Serialize;

use crate::experiments::{
    self, mixing_rows, resolve_source, with_threads, ConfigError, ExperimentConfig, ExperimentKind, ModelSource, Report,
};
use crate::formats::{
    open_out, read_cost_csv, read_json, read_model, read_trajectory, write_csv_rows, write_estimate_csv,
    write_json_with_meta, write_rows, write_trajectory_binary, write_trajectory_csv, BinaryHeader, Format,
};
use crate::meta::{short_hash, Meta};

/// Exit status for each error class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    /// Bad flags or configuration (also clap's usage status).
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    /// Malformed input files or data rejected by the model checks.
    pub const INPUT: u8 = 4;
}

/// Maps an error chain to its exit status.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return exit::CONFIG;
        }
        if cause.is::<std::io::Error>() {
            return exit::IO;
        }
        if cause.is::<cmc_core::Error>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return exit::INPUT;
        }
    }
    exit::OTHER
}

#[derive(Debug, Parser)]
#[command(
    name = "cmc",
    version,
    about = "Estimate controlled Markov chains from logged trajectories"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent or `-`.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for replication-level parallelism.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// Instance selection: a preset, or model and policy files.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SourceArgs {
    #[arg(long, conflicts_with_all = ["model", "policy"])]
    pub preset: Option<String>,
    #[arg(long, requires = "policy")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub init: Option<PathBuf>,
}

impl SourceArgs {
    fn source(&self) -> Result<ModelSource> {
        match (&self.preset, &self.model, &self.policy) {
            (Some(p), _, _) => Ok(ModelSource::Preset(p.clone())),
            (None, Some(m), Some(p)) => Ok(ModelSource::Files {
                model: m.clone(),
                policy: p.clone(),
                init: self.init.clone(),
            }),
            _ => Err(ConfigError("give --preset or both --model and --policy".into()).into()),
        }
    }

    fn load(&self) -> Result<Preset> {
        resolve_source(&self.source()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Direct,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sigma,
    Block,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory.
    Simulate(SimulateArgs),
    /// Estimate transition matrices from a trajectory.
    Estimate(EstimateArgs),
    /// Exact mixing coefficients by path enumeration.
    Mixing(MixingArgs),
    /// Class constants and sample-size thresholds.
    Bounds(BoundsArgs),
    /// Hard-instance families and the cover-time experiment.
    Hardness(HardnessArgs),
    /// Plug-in off-policy evaluation.
    Ope(OpeArgs),
    /// Run an experiment from a JSON configuration.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Index of the last observation.
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = Sampler::Direct)]
    pub sampler: Sampler,
    /// Write the binary format instead of `--format`.
    #[arg(long)]
    pub binary: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    /// Trajectory in CSV or binary form.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Needed when the trajectory file does not record them.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// True model; adds the estimation error to JSON output.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MixingArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = cmc_core::exact::DEFAULT_PATH_CAP)]
    pub cap: u128,
    #[arg(long, value_enum, default_value_t = EtaModeArg::AnyHistory)]
    pub eta_mode: EtaModeArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaModeArg {
    AnyHistory,
    SharedPrefix,
}

impl From<EtaModeArg> for EtaMode {
    fn from(m: EtaModeArg) -> Self {
        match m {
            EtaModeArg::AnyHistory => EtaMode::AnyHistory,
            EtaModeArg::SharedPrefix => EtaMode::SharedPrefix,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    /// Presets to tabulate; the five class presets when empty.
    #[arg(long = "preset")]
    pub presets: Vec<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub policy: Option<PathBuf>,
    #[arg(long, default_value_t = 0.15)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_pel: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HardnessArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long, default_value_t = 6)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.3)]
    pub iota: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// σ-family floor `p★`, below `1/(d+1)`.
    #[arg(long, default_value_t = 0.1)]
    pub p_star: f64,
    /// σ signs, comma separated (all +1 when absent).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub sigma: Vec<i8>,
    /// ξ bits per control: `0,1;1,1` for two controls.
    #[arg(long)]
    pub xi: Option<String>,
    /// Touring horizon; the cover-time threshold when absent.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub replications: usize,
    /// Also write the instance model JSON here.
    #[arg(long)]
    #[serde(skip)]
    pub emit: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OpeArgs {
    /// True model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Target policy: a stationary policy JSON or a bare `d × k` matrix.
    #[arg(long)]
    pub policy: PathBuf,
    /// `state,cost` or `state,control,cost` CSV; `(s + 1) / d` when absent.
    #[arg(long)]
    pub cost: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    /// Estimated model JSON. Without it, `--logging` data of length `--m`
    /// is simulated and estimated.
    #[arg(long, conflicts_with = "logging")]
    pub estimate: Option<PathBuf>,
    /// Logging policy JSON used to simulate data.
    #[arg(long, requires = "m")]
    pub logging: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Value accuracy for the threshold table.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub kind: Option<ExperimentKind>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Master seed; overrides the file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Parses `args` and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| ConfigError(e.to_string()))?;
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Mixing(a) => cmd_mixing(&a),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::Hardness(a) => cmd_hardness(&a),
        Command::Ope(a) => cmd_ope(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    }
}

fn finish(mut w: Box<dyn Write>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn write_table<T: Serialize, R: Serialize>(common: &Common, meta: &Meta, rows: &[R], json: &T) -> Result<()> {
    let mut w = open_out(common.out.as_deref())?;
    match common.format {
        Format::Csv => write_rows(&mut w, rows, meta)?,
        Format::Json => write_json_with_meta(&mut w, json, meta)?,
    }
    finish(w)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let inst = a.source.load()?;
    let (d, k) = (inst.model.d(), inst.model.k());
    let traj = match a.sampler {
        Sampler::Direct => simulate(&inst.model, &inst.policy, &inst.init, a.m, a.common.seed)?,
        Sampler::Array => simulate_via_array_scheme(&inst.model, &inst.policy, &inst.init, a.m, a.common.seed)?,
    };
    let meta = Meta::new("simulate", a, &[a.common.seed]);
    let mut w = open_out(a.common.out.as_deref())?;
    if a.binary {
        let header = BinaryHeader {
            d,
            k,
            policy_hash: short_hash(&inst.policy),
        };
        write_trajectory_binary(&mut w, &traj, header)?;
    } else {
        match a.common.format {
            Format::Csv => write_trajectory_csv(&mut w, &traj, d, k, &meta)?,
            Format::Json => write_json_with_meta(&mut w, &traj, &meta)?,
        }
    }
    finish(w)
}

#[derive(Serialize)]
struct EstimateOutput {
    #[serde(flatten)]
    estimate: cmc_core::estimate::EstimatedModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    sup_error: Option<f64>,
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let (traj, dims) = read_trajectory(&a.trajectory)?;
    let (d, k) = match (a.d, a.k, dims) {
        (Some(d), Some(k), _) => (d, k),
        (_, _, Some(dk)) => dk,
        _ => bail!(ConfigError(
            "the trajectory does not record d and k; pass --d and --k".into()
        )),
    };
    traj.validate(d, k)?;
    let counts = count(&traj, d, k);
    let est = estimate(&counts);
    let sup_error = match &a.truth {
        Some(p) => Some(estimation_error(&est.model, &read_model(p)?)?.sup_norm),
        None => None,
    };
    let meta = Meta::new("estimate", a, &[traj.seed]);
    let mut w = open_out(a.common.out.as_deref())?;
    match a.common.format {
        Format::Csv => write_estimate_csv(&mut w, &counts, &est, &meta)?,
        Format::Json => write_json_with_meta(
            &mut w,
            &EstimateOutput {
                estimate: est,
                sup_error,
            },
            &meta,
        )?,
    }
    finish(w)
}

fn cmd_mixing(a: &MixingArgs) -> Result<()> {
    let inst = a.source.load()?;
    let report = with_threads(a.common.threads, || {
        mixing_report(&inst.model, &inst.policy, &inst.init, a.m, a.cap, a.eta_mode.into())
    })??;
    let meta = Meta::new("mixing", a, &[]);
    write_table(&a.common, &meta, &mixing_rows(&report), &report)
}

#[derive(Debug, Serialize)]
struct BoundsRow {
    name: String,
    class: String,
    #[serde(rename = "T")]
    t: f64,
    zeta1: f64,
    zeta2: f64,
    c_delta: f64,
    m_star_thm1: f64,
    m_star_thm2: f64,
}

fn bounds_row(inst: &Preset, a: &BoundsArgs) -> Result<BoundsRow> {
    let (d, k) = (inst.model.d(), inst.model.k());
    let params = derive_class_params(&inst.model, &inst.policy)?;
    let c = class_constants(d, k, &params)?;
    let inputs = c.inputs(d, k, a.epsilon, a.delta, a.c, a.c_pel);
    inputs.validate()?;
    Ok(BoundsRow {
        name: inst.name.clone(),
        class: class_name(&inst.policy).into(),
        t: c.t,
        zeta1: c.zeta1,
        zeta2: c.zeta2,
        c_delta: c.c_delta,
        m_star_thm1: theorem1_threshold(&inputs),
        m_star_thm2: theorem2_threshold(&inputs).m_star,
    })
}

fn cmd_bounds(a: &BoundsArgs) -> Result<()> {
    let mut instances = Vec::new();
    if let (Some(m), Some(p)) = (&a.model, &a.policy) {
        let model = read_model(m)?;
        let init = cmc_core::InitialLaw::uniform_pairs(model.d(), model.k());
        instances.push(Preset {
            name: "files".into(),
            model,
            policy: read_json(p)?,
            init,
        });
    }
    let names: Vec<String> = if a.presets.is_empty() && instances.is_empty() {
        CLASS_PRESETS.iter().map(|s| s.to_string()).collect()
    } else {
        a.presets.clone()
    };
    for n in &names {
        instances.push(resolve_source(&ModelSource::Preset(n.clone()))?);
    }
    let rows = instances.iter().map(|i| bounds_row(i, a)).collect::<Result<Vec<_>>>()?;
    let meta = Meta::new("bounds", a, &[]);
    write_table(&a.common, &meta, &rows, &rows)
}

fn parse_xi(text: &str, d: usize, k: usize) -> Result<Vec<Vec<u8>>> {
    let xi: Vec<Vec<u8>> = text
        .split(';')
        .map(|part| part.split(',').map(|b| b.trim().parse::<u8>()).collect())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| ConfigError(format!("bad --xi: {e}")))?;
    if xi.len() != k || xi.iter().any(|x| x.len() != d / 3) {
        bail!(ConfigError(format!("--xi needs {k} groups of {} bits", d / 3)));
    }
    Ok(xi)
}

#[derive(Debug, Serialize)]
struct StationaryRow {
    state: usize,
    probability: f64,
}

fn emit_model(path: &Path, model: &cmc_core::CmcModel) -> Result<()> {
    let mut w = open_out(Some(path))?;
    crate::formats::write_json(&mut w, model)?;
    finish(w)
}

fn cmd_hardness(a: &HardnessArgs) -> Result<()> {
    match a.family {
        Family::Sigma => {
            let sigma = if a.sigma.is_empty() {
                vec![1; a.d / 2]
            } else {
                a.sigma.clone()
            };
            let params = SigmaParams {
                d: a.d,
                p_star: a.p_star,
                epsilon: a.epsilon,
                sigma,
            };
            let model = build_sigma_instance(&params)?;
            if let Some(p) = &a.emit {
                emit_model(p, &model)?;
            }
            let pi = sigma_stationary(&params)?;
            let rows: Vec<StationaryRow> = pi
                .weights()
                .iter()
                .enumerate()
                .map(|(state, &probability)| StationaryRow { state, probability })
                .collect();
            let meta = Meta::new("hardness", a, &[]);
            write_table(&a.common, &meta, &rows, &rows)
        }
        Family::Block => {
            let xi = match &a.xi {
                Some(t) => Some(parse_xi(t, a.d, a.k)?),
                None => None,
            };
            let mut params = BlockParams::all_ones(a.d, a.k, a.iota, a.epsilon);
            if let Some(x) = &xi {
                params.xi = x.clone();
            }
            params.validate()?;
            if let Some(p) = &a.emit {
                let (model, _) = cmc_core::hardness::build_block_instance(&params)?;
                emit_model(p, &model)?;
            }
            let mut cfg = ExperimentConfig::new(
                ExperimentKind::CoverTime,
                ModelSource::Block {
                    d: a.d,
                    k: a.k,
                    iota: a.iota,
                    epsilon: a.epsilon,
                    xi,
                },
            );
            cfg.seed = a.common.seed;
            cfg.replications = a.replications;
            cfg.n = a.n;
            let report = with_threads(a.common.threads, || experiments::run(&cfg))??;
            let Report::CoverTime(r) = report else {
                unreachable!("cover-time runs return cover-time reports")
            };
            let meta = Meta::new("hardness", a, &[a.common.seed]);
            write_table(&a.common, &meta, std::slice::from_ref(&r), &r)
        }
    }
}

/// Reads a target policy: a stationary policy JSON or a bare matrix.
fn read_target(path: &Path) -> Result<Matrix> {
    let value: serde_json::Value = read_json(path)?;
    if let Ok(LoggingPolicy::StationaryRandomized { table }) = serde_json::from_value(value.clone()) {
        return Ok(table);
    }
    serde_json::from_value(value).map_err(|_| {
        ConfigError(format!(
            "{} is neither a stationary policy nor a matrix",
            path.display()
        ))
        .into()
    })
}

#[derive(Debug, Serialize)]
struct OpeRowOut {
    state: usize,
    v: f64,
    v_hat: f64,
    abs_error: f64,
}

#[derive(Debug, Serialize)]
struct OpeOutput {
    v: Vec<f64>,
    v_hat: Vec<f64>,
    error: f64,
    bound: f64,
    residual: f64,
    undefined_rows: Vec<usize>,
    thresholds: Option<ValueThresholds>,
}

fn cmd_ope(a: &OpeArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let (d, k) = (model.d(), model.k());
    let pi = read_target(&a.policy)?;
    let cost = match &a.cost {
        Some(p) => Matrix::from_rows(&read_cost_csv(std::fs::File::open(p)?, d, k)?)?,
        None => Matrix::from_rows(&(0..d).map(|s| vec![(s + 1) as f64 / d as f64; k]).collect::<Vec<_>>())?,
    };
    let (est, undefined_pairs, logging) = match (&a.estimate, &a.logging, a.m) {
        (Some(p), _, _) => {
            let est: cmc_core::estimate::EstimatedModel = read_json(p)?;
            (est.model, est.undefined_rows, None)
        }
        (None, Some(p), Some(m)) => {
            let logging: LoggingPolicy = read_json(p)?;
            let init = cmc_core::InitialLaw::uniform_pairs(d, k);
            let traj = simulate(&model, &logging, &init, m, a.common.seed)?;
            let est = estimate(&count(&traj, d, k));
            (est.model, est.undefined_rows, Some(logging))
        }
        _ => bail!(ConfigError("give --estimate, or --logging with --m".into())),
    };
    let truth = compose_policy(&model, &pi, &cost, a.alpha)?;
    let hat = compose_policy(&est, &pi, &cost, a.alpha)?;
    let undefined: Vec<usize> = (0..d)
        .filter(|&s| undefined_pairs.iter().any(|&[u, l]| u == s && pi[(s, l)] > 0.0))
        .collect();
    for s in &undefined {
        eprintln!("warning: row {s} of the estimate had no data and was filled uniformly");
    }
    let v = solve_value(&truth)?.v;
    let plug = plug_in_value(&hat.m, &hat.g, a.alpha, &undefined)?;
    let v_hat = plug.solution.v.clone();
    let error = v.iter().zip(&v_hat).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let bound = perturbation_bound(&truth.m, &hat.m, &truth.g, a.alpha)?;
    let thresholds = logging
        .as_ref()
        .and_then(|p| derive_class_params(&model, p).ok())
        .and_then(|p| class_constants(d, k, &p).ok())
        .map(|c| {
            let inputs = c.inputs(d, k, a.epsilon, a.delta, 1.0, 1.0);
            value_thresholds(&inputs, c.c_theta, &truth.g, a.alpha)
        });
    let rows: Vec<OpeRowOut> = (0..d)
        .map(|s| OpeRowOut {
            state: s,
            v: v[s],
            v_hat: v_hat[s],
            abs_error: (v[s] - v_hat[s]).abs(),
        })
        .collect();
    let out = OpeOutput {
        v,
        v_hat,
        error,
        bound,
        residual: plug.solution.residual,
        undefined_rows: undefined,
        thresholds,
    };
    let meta = Meta::new("ope", a, &[a.common.seed]);
    let mut w = open_out(a.common.out.as_deref())?;
    match a.common.format {
        Format::Csv => {
            meta.write_comments(&mut w)?;
            writeln!(w, "# error: {}", out.error)?;
            writeln!(w, "# bound: {}", out.bound)?;
            write_csv_rows(&mut w, &rows)?;
        }
        Format::Json => write_json_with_meta(&mut w, &out, &meta)?,
    }
    finish(w)
}

/// Loads a configuration file and applies flag overrides.
pub fn load_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", a.config.display())))?;
    if let Some(v) = a.kind {
        cfg.kind = v;
    }
    if let Some(v) = &a.m {
        cfg.m = v.clone();
    }
    if let Some(v) = a.replications {
        cfg.replications = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = a.delta {
        cfg.delta = v;
    }
    if let Some(v) = a.c {
        cfg.c = v;
    }
    if a.n.is_some() {
        cfg.n = a.n;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    // Relative paths in the file resolve against the file's directory.
    let base = a.config.parent().unwrap_or(Path::new("."));
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let ModelSource::Files { model, policy, init } = &mut cfg.source {
        fix(model);
        fix(policy);
        if let Some(i) = init {
            fix(i);
        }
    }
    if let Some(p) = &mut cfg.target_policy {
        fix(p);
    }
    if let Some(p) = &mut cfg.cost {
        fix(p);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct PacRow {
    m_star: usize,
    failures: usize,
    empirical_failure_rate: f64,
    delta: f64,
    tolerance: f64,
    pass: bool,
    c: f64,
    calibrated: bool,
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let cfg = load_config(a)?;
    let report = with_threads(a.threads, || experiments::run(&cfg))??;
    let meta = Meta::new(
        &format!("experiment {}", serde_json::to_value(cfg.kind)?.as_str().unwrap_or("")),
        &cfg,
        &cfg.seeds(),
    );
    let common = Common {
        seed: cfg.seed,
        out: cfg.out.clone(),
        format: a.format,
        threads: a.threads,
    };
    match &report {
        Report::ErrorCurve(r) => write_table(&common, &meta, &r.rows, &report),
        Report::Pac(p) => {
            let row = PacRow {
                m_star: p.m_star,
                failures: p.failures,
                empirical_failure_rate: p.empirical_failure_rate,
                delta: p.delta,
                tolerance: p.tolerance,
                pass: p.pass,
                c: p.c,
                calibrated: p.calibrated,
            };
            write_table(&common, &meta, &[row], &report)
        }
        Report::Mixing(r) => write_table(&common, &meta, &mixing_rows(r), &report),
        Report::CoverTime(r) => write_table(&common, &meta, std::slice::from_ref(r), &report),
        Report::Ope(r) => write_table(&common, &meta, &r.rows, &report),
        Report::Greedy(r) => write_table(&common, &meta, r, &report),
    }
}
