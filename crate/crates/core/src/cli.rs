//! Experiment runner: configuration, subcommands and machine-readable output.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::baselines::{
    blahut_arimoto, converse_bound, converse_bound_iid, gp_capacity, hayashi_nagaoka_suite, heegard_elgamal_rates,
    BlahutArimoto, ClassicalChannel, GpCapacity,
};
use crate::error::{Error, Result};
use crate::infospec::{cq_iid_trace_curve, holevo_information, linear_grid, write_curves_csv};
use crate::model::{ChannelFile, CqGpChannel, JointLaw, ProductExtension};
use crate::protocol::{
    check_eps, e1_bound, e2_bound, error_budget, simulate, write_traces_csv, Protocol, ProtocolParams, RateOracles,
    SimConfig, SimulationResult,
};
use crate::qop::{tensor_density, DensityOperator};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CQGP_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "cqgp-out";
/// Largest output dimension for the operator form of the converse bound.
pub const MAX_CONVERSE_DIM: usize = 256;

fn default_gamma() -> f64 {
    0.05
}
fn default_eps() -> f64 {
    1e-4
}
fn default_trials() -> usize {
    1000
}
fn default_batch() -> usize {
    1
}

/// One simulation experiment.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: PathBuf,
    pub n: Vec<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default, rename = "rate_R", skip_serializing_if = "Option::is_none")]
    pub rate_message: Option<f64>,
    #[serde(default, rename = "rate_r", skip_serializing_if = "Option::is_none")]
    pub rate_bin: Option<f64>,
    #[serde(default, rename = "rate_RS", skip_serializing_if = "Option::is_none")]
    pub rate_state: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub fixed_codebook: bool,
    #[serde(default)]
    pub validate_povm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("field `{name}`: {msg}"))
}

impl ExperimentConfig {
    pub fn new(channel: PathBuf, n: Vec<usize>) -> Self {
        Self {
            channel,
            n,
            gamma: default_gamma(),
            eps: default_eps(),
            rate_message: None,
            rate_bin: None,
            rate_state: None,
            trials: default_trials(),
            seed: 0,
            batch_size: default_batch(),
            fixed_codebook: false,
            validate_povm: false,
            out: None,
        }
    }

    /// Reads a JSON config; a relative channel path is taken relative to the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Validation(format!("config file {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("config file {}: {e}", path.display())))?;
        if cfg.channel.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.channel = dir.join(&cfg.channel);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() {
            return Err(field("n", "list is empty"));
        }
        if self.n.contains(&0) {
            return Err(field("n", "block lengths must be at least 1"));
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field("n", "list must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(field("trials", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(field("batch_size", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(field("gamma", format!("{} is not positive", self.gamma)));
        }
        check_eps(self.eps).map_err(|e| field("eps", e))?;
        for (v, name) in [
            (self.rate_message, "rate_R"),
            (self.rate_bin, "rate_r"),
            (self.rate_state, "rate_RS"),
        ] {
            if v.is_some_and(|r| !r.is_finite()) {
                return Err(field(name, "is not finite"));
            }
        }
        Ok(())
    }
}

/// Channel, law, and the SHA-256 of the file they came from.
pub struct LoadedChannel {
    pub channel: CqGpChannel,
    pub law: JointLaw,
    pub sha256: String,
}

pub fn load_channel(path: &Path) -> Result<LoadedChannel> {
    let bytes = fs::read(path).map_err(|e| Error::Validation(format!("channel file {}: {e}", path.display())))?;
    let file: ChannelFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Validation(format!("channel file {}: {e}", path.display())))?;
    let (channel, law) = file
        .into_parts()
        .map_err(|e| Error::Validation(format!("channel file {}: {e}", path.display())))?;
    Ok(LoadedChannel {
        channel,
        law,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Summary of one block length.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub params: ProtocolParams,
    pub oracles: RateOracles,
    pub error_budget: f64,
    pub e1_bound: f64,
    pub e2_bound: f64,
    pub result: SimulationResult,
    pub traces_csv: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub channel_sha256: String,
    pub records: Vec<RunRecord>,
}

pub fn out_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Runs the configured simulations and writes `summary.json` and one
/// `traces_n{n}.csv` per block length into the output directory.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let loaded = load_channel(&config.channel)?;
    let dir = out_dir(config.out.as_deref());
    fs::create_dir_all(&dir)?;
    let mut records = Vec::with_capacity(config.n.len());
    for &n in &config.n {
        let ext = ProductExtension::new(n, loaded.law.clone(), loaded.channel.clone())?;
        let oracles = RateOracles::from_extension(&ext)?;
        let defaults = ProtocolParams::from_oracles(&oracles, n, config.gamma, config.eps)?;
        let params = ProtocolParams::with_rates(
            &oracles,
            n,
            config.gamma,
            config.eps,
            config.rate_message.unwrap_or(defaults.rate_message),
            config.rate_bin.unwrap_or(defaults.rate_bin),
            config.rate_state.unwrap_or(defaults.rate_state),
        )?;
        let proto = Protocol::new(ext, params.clone())?;
        let sim = SimConfig {
            trials: config.trials,
            seed: config.seed,
            batch_size: config.batch_size,
            fixed_codebook: config.fixed_codebook,
            validate_povm: config.validate_povm,
            keep_traces: true,
        };
        let result = simulate(&proto, &sim)?;
        let name = format!("traces_n{n}.csv");
        write_traces_csv(&result.traces, fs::File::create(dir.join(&name))?)?;
        eprintln!(
            "n={n}: error {:.4} [{:.4}, {:.4}] over {} trials",
            result.error.estimate, result.error.ci_low, result.error.ci_high, result.trials
        );
        records.push(RunRecord {
            n,
            error_budget: error_budget(n, config.gamma, config.eps)?,
            e1_bound: e1_bound(n, config.gamma, config.eps),
            e2_bound: e2_bound(n, config.gamma, config.eps),
            params,
            oracles,
            result,
            traces_csv: name,
        });
    }
    let summary = RunSummary {
        config: config.clone(),
        seed: config.seed,
        channel_sha256: loaded.sha256,
        records,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Parser)]
#[command(
    name = "cqgp",
    version,
    about = "Classical-quantum Gel'fand-Pinsker coding with rate-limited side information"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo error of the random-coding protocol.
    Simulate(SimulateArgs),
    /// Classical Gel'fand-Pinsker capacity of a commuting channel file.
    Capacity(CapacityArgs),
    /// Rate bounds of the law in a channel file.
    Region(RegionArgs),
    /// Spectral trace curves of the ensemble {p(u), ρ_{B|u}}.
    Spectral(SpectralArgs),
    /// Random test of the Hayashi-Nagaoka operator inequality.
    CheckHn(CheckHnArgs),
    /// Lower bound on the error probability at a given rate.
    Converse(ConverseArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub channel: Option<PathBuf>,
    /// Block lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "rate-R")]
    pub rate_message: Option<f64>,
    #[arg(long = "rate-r")]
    pub rate_bin: Option<f64>,
    #[arg(long = "rate-RS")]
    pub rate_state: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub fixed_codebook: bool,
    #[arg(long)]
    pub validate_povm: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.channel) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(ch)) => ExperimentConfig::new(ch.clone(), Vec::new()),
            (None, None) => return Err(field("channel", "required when no --config is given")),
        };
        if let (Some(_), Some(ch)) = (&self.config, &self.channel) {
            cfg.channel = ch.clone();
        }
        if !self.n.is_empty() {
            cfg.n = self.n.clone();
        }
        cfg.gamma = self.gamma.unwrap_or(cfg.gamma);
        cfg.eps = self.eps.unwrap_or(cfg.eps);
        cfg.trials = self.trials.unwrap_or(cfg.trials);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.batch_size = self.batch_size.unwrap_or(cfg.batch_size);
        cfg.rate_message = self.rate_message.or(cfg.rate_message);
        cfg.rate_bin = self.rate_bin.or(cfg.rate_bin);
        cfg.rate_state = self.rate_state.or(cfg.rate_state);
        cfg.fixed_codebook |= self.fixed_codebook;
        cfg.validate_povm |= self.validate_povm;
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long)]
    pub channel: PathBuf,
    /// Auxiliary alphabet size; defaults to min(|X|, cardinality cap).
    #[arg(long)]
    pub u_size: Option<usize>,
    /// Grid steps per probability simplex.
    #[arg(long, default_value_t = 20)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long)]
    pub channel: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 4, 8])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub grid_hi: f64,
    #[arg(long, default_value_t = 40)]
    pub grid_steps: usize,
    #[arg(long, default_value_t = crate::infospec::DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckHnArgs {
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ConverseArgs {
    #[arg(long)]
    pub channel: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    /// Rate in bits per use; M = 2^{nR}.
    #[arg(long)]
    pub rate: f64,
}

/// JSON for stdout and whether every checked invariant held.
#[derive(Debug)]
pub struct Outcome {
    pub json: Value,
    pub ok: bool,
}

impl Outcome {
    fn ok(json: Value) -> Self {
        Self { json, ok: true }
    }
}

/// Letter ensemble {p(u), ρ_{B|u}} over positive-probability u.
fn letter_ensemble(loaded: &LoadedChannel) -> Result<Vec<(f64, DensityOperator)>> {
    let ext = ProductExtension::new(1, loaded.law.clone(), loaded.channel.clone())?;
    let pu = ext.p_u_letter();
    Ok((0..pu.len())
        .filter(|&u| pu[u] > 0.0)
        .map(|u| (pu[u], ext.cond_b_letter(u).clone()))
        .collect())
}

#[derive(Serialize)]
struct CapacityReport {
    channel_sha256: String,
    u_size: usize,
    resolution: usize,
    gp_capacity: GpCapacity,
    #[serde(skip_serializing_if = "Option::is_none")]
    blahut_arimoto: Option<BlahutArimoto>,
}

fn capacity(args: &CapacityArgs) -> Result<Outcome> {
    let loaded = load_channel(&args.channel)?;
    let ch = ClassicalChannel::from_cq(&loaded.channel, loaded.law.p_s.clone())?;
    let u_size = args.u_size.unwrap_or_else(|| ch.x_size().min(ch.u_size_cap()));
    let gp = gp_capacity(&ch, u_size, args.resolution)?;
    let ba = if ch.s_size() == 1 {
        let rows: Vec<Vec<f64>> = ch.p_y_given_xs.iter().map(|r| r[0].clone()).collect();
        Some(blahut_arimoto(&rows, 1e-9, 1_000_000)?)
    } else {
        None
    };
    let report = CapacityReport {
        channel_sha256: loaded.sha256,
        u_size,
        resolution: args.resolution,
        gp_capacity: gp,
        blahut_arimoto: ba,
    };
    Ok(Outcome::ok(serde_json::to_value(report)?))
}

fn region(args: &RegionArgs) -> Result<Outcome> {
    let loaded = load_channel(&args.channel)?;
    let ext = ProductExtension::new(1, loaded.law.clone(), loaded.channel.clone())?;
    let oracles = RateOracles::from_extension(&ext)?;
    let classical = if loaded.channel.all_diagonal() {
        let ch = ClassicalChannel::from_cq(&loaded.channel, loaded.law.p_s.clone())?;
        let (r, rs) = heegard_elgamal_rates(&ch, &loaded.law)?;
        Some(json!({ "rate_bound": r, "state_rate_bound": rs }))
    } else {
        None
    };
    Ok(Outcome::ok(json!({
        "channel_sha256": loaded.sha256,
        "oracles": oracles,
        "rate_bound": oracles.i_ub - oracles.i_u_ts,
        "state_rate_bound": oracles.i_s_ts,
        "classical": classical,
    })))
}

fn spectral(args: &SpectralArgs) -> Result<Outcome> {
    if args.n.is_empty() || args.n.contains(&0) {
        return Err(field(
            "n",
            "block lengths must be a non-empty list of positive integers",
        ));
    }
    let loaded = load_channel(&args.channel)?;
    let ens = letter_ensemble(&loaded)?;
    let grid = linear_grid(args.grid_lo, args.grid_hi, args.grid_steps);
    let curves = args
        .n
        .iter()
        .map(|&n| cq_iid_trace_curve(&ens, n, &grid, args.gamma))
        .collect::<Result<Vec<_>>>()?;
    let dir = out_dir(args.out.as_deref());
    fs::create_dir_all(&dir)?;
    let path = dir.join("spectral.csv");
    write_curves_csv(&curves, fs::File::create(&path)?)?;
    let summary: Vec<Value> = curves
        .iter()
        .map(|c| json!({ "n": c.n, "crossing": c.crossing(args.delta), "max_increase": c.max_increase() }))
        .collect();
    Ok(Outcome::ok(json!({
        "channel_sha256": loaded.sha256,
        "holevo": holevo_information(&ens)?,
        "delta": args.delta,
        "curves": summary,
        "csv": path,
    })))
}

fn check_hn(args: &CheckHnArgs) -> Result<Outcome> {
    let suite = hayashi_nagaoka_suite(args.count, args.seed)?;
    Ok(Outcome {
        ok: suite.pass == suite.count,
        json: serde_json::to_value(suite)?,
    })
}

fn converse(args: &ConverseArgs) -> Result<Outcome> {
    if args.n == 0 {
        return Err(field("n", "must be at least 1"));
    }
    let loaded = load_channel(&args.channel)?;
    let ens = letter_ensemble(&loaded)?;
    let (bound, method) = if ens.iter().all(|(_, r)| r.is_diagonal()) {
        (
            converse_bound_iid(&ens, args.rate, args.n, args.gamma)?,
            "iid-convolution",
        )
    } else {
        let dim = loaded.channel.dim_b.checked_pow(args.n as u32).unwrap_or(usize::MAX);
        if dim > MAX_CONVERSE_DIM {
            return Err(Error::CapExceeded {
                needed: dim as u128,
                cap: MAX_CONVERSE_DIM as u128,
            });
        }
        let words = crate::model::all_words(ens.len(), args.n);
        let block = words
            .iter()
            .map(|w| {
                let p: f64 = w.iter().map(|&u| ens[u].0).product();
                (p, tensor_density(w.iter().map(|&u| &ens[u].1)).expect("n >= 1"))
            })
            .collect::<Vec<_>>();
        (
            converse_bound(&block, (args.n as f64 * args.rate).exp2(), args.n, args.gamma)?,
            "operator",
        )
    };
    Ok(Outcome::ok(json!({
        "channel_sha256": loaded.sha256,
        "n": args.n,
        "rate": args.rate,
        "gamma": args.gamma,
        "method": method,
        "bound": bound,
    })))
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate(a) => {
            let summary = run(&a.to_config()?)?;
            Ok(Outcome::ok(serde_json::to_value(summary)?))
        }
        Command::Capacity(a) => capacity(a),
        Command::Region(a) => region(a),
        Command::Spectral(a) => spectral(a),
        Command::CheckHn(a) => check_hn(a),
        Command::Converse(a) => converse(a),
    }
}

/// 3 for numerical-invariant violations, 2 for everything else.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}
