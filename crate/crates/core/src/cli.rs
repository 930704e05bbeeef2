//! Command-line front end.
//!
//! Every parameter can come from a flag or from a flat `key = value` config
//! file (`--config`) whose keys are the long flag names without the leading
//! dashes, e.g. `n-inactive = 10000`. Flags win. Each command starts by
//! printing its effective parameters in the same format, so the block can
//! be saved and fed back through `--config` to repeat the run.
//!
//! Exit codes: 0 on success, 2 on usage or validation errors, 1 on runtime
//! failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bounds::{self, GAUSSIAN_C};
use crate::channel::{self, ChannelSpec, NoiseModel};
use crate::error::Error;
use crate::harness::{self, ChannelParams, ExactSlot, DEFAULT_GRID_MAX, DEFAULT_TRIALS, FULL_SCALE_TRIALS};
use crate::rng::mix64;
use crate::scheme::optimal_choice_probability;

/// `(N, k)` pairs run by `--preset paper`.
pub const REFERENCE_PAIRS: [(u64, u64); 3] = [(10_000, 20), (100_000, 20), (10_000, 30)];

#[derive(Debug, Parser)]
#[command(name = "mac-activity", version, about = "Randomized activity detection over multiple-access channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Slot budgets, repetition length and channel-use counts.
    Bounds(BoundsArgs),
    /// Monte Carlo runs of the scheme over the ideal oracle.
    Simulate(SimulateArgs),
    /// Slot error of the repetition code over a noisy channel.
    Channel(ChannelArgs),
    /// The scheme over the repetition code and a noisy channel.
    E2e(E2eArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key = value file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of inactive nodes N.
    #[arg(long)]
    pub n_inactive: Option<u64>,
    /// Number of active nodes k.
    #[arg(long)]
    pub k: Option<u64>,
    /// Target error probability ε.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Surplus fraction C in P(M ≥ C k) ≤ ε.
    #[arg(long)]
    pub big_c: Option<f64>,
    /// Sub-gaussian norm bound K.
    #[arg(long)]
    pub big_k: Option<f64>,
    /// Power constraint P.
    #[arg(long)]
    pub power: Option<f64>,
    /// Absolute constant c of the repetition length.
    #[arg(long)]
    pub c: Option<f64>,
    /// Slot error δ for a standalone repetition length.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateMode {
    UntilExact,
    Trace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Paper,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_inactive: Option<u64>,
    #[arg(long)]
    pub k: Option<u64>,
    /// Choice probability; defaults to 1/(k+1).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<SimulateMode>,
    /// Run the reference (N, k) pairs (10⁴,20), (10⁵,20), (10⁴,30).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Use 120000 trials when --trials is not given.
    #[arg(long)]
    pub full_scale: bool,
    /// Slots recorded in trace mode.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Largest ℓ of the error-curve grid.
    #[arg(long)]
    pub grid_max: Option<u64>,
    #[arg(long)]
    pub grid_step: Option<u64>,
    /// Output CSV file, or directory with --preset.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Shorthand for --noise gaussian:<sigma>.
    #[arg(long, conflicts_with = "noise")]
    pub sigma: Option<f64>,
    /// Noise schedule, e.g. gaussian:1, rademacher:1, uniform:0.5, zero, or
    /// a comma-separated per-step cycle.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub power: Option<f64>,
    /// Declared norm bound K; defaults to the schedule's certified bound.
    #[arg(long)]
    pub big_k: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Repetitions per slot; defaults to the repetition length for δ.
    #[arg(long)]
    pub m: Option<u64>,
    /// Transmitters on the channel.
    #[arg(long)]
    pub senders: Option<usize>,
    /// Simulated slots per configuration.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct E2eArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub n_inactive: Option<u64>,
    #[arg(long)]
    pub k: Option<u64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::DimensionMismatch(_) | Error::PowerConstraint { .. } => {
                CliError::Usage(e.to_string())
            }
            Error::EmptyRecords | Error::Io { .. } | Error::Csv { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses a flat `key = value` file. Blank lines, `#`/`;` comments and
/// `[section]` headers are ignored.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Merges flags over config-file values and records what was used.
struct Params {
    file: BTreeMap<String, String>,
    effective: Vec<(&'static str, String)>,
}

impl Params {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            file,
            effective: Vec::new(),
        })
    }

    fn get<T: FromStr + Display + Clone>(&mut self, key: &'static str, flag: Option<T>) -> CliResult<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(
                    raw.parse::<T>()
                        .map_err(|_| CliError::Usage(format!("invalid value `{raw}` for --{key} in config file")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.record(key, v);
        }
        Ok(value)
    }

    fn require<T: FromStr + Display + Clone>(&mut self, key: &'static str, flag: Option<T>) -> CliResult<T> {
        self.get(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required flag --{key}")))
    }

    fn or<T: FromStr + Display + Clone>(&mut self, key: &'static str, flag: Option<T>, default: T) -> CliResult<T> {
        match self.get(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, &default);
                Ok(default)
            }
        }
    }

    fn seed(&mut self, flag: Option<u64>) -> CliResult<u64> {
        match self.get("seed", flag)? {
            Some(s) => Ok(s),
            None => {
                let nanos = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_nanos() as u64)
                    .unwrap_or(0);
                let seed = mix64(nanos ^ u64::from(std::process::id()));
                self.record("seed", &seed);
                Ok(seed)
            }
        }
    }

    fn record(&mut self, key: &'static str, value: &dyn Display) {
        self.effective.retain(|(k, _)| *k != key);
        self.effective.push((key, value.to_string()));
    }

    fn echo(&self, command: &str, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "[{command}]")?;
        for (k, v) in &self.effective {
            writeln!(out, "{k} = {v}")?;
        }
        writeln!(out)
    }
}

fn probability_flag(name: &'static str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must lie in (0, 1), got {v}")))
    }
}

fn positive_flag<T: PartialOrd + Default + Display>(name: &'static str, v: T) -> CliResult<T> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn noise_model(params: &mut Params, args: &NoiseArgs) -> CliResult<NoiseModel> {
    let sigma = params.get("sigma", args.sigma)?;
    let spec = match sigma {
        Some(s) => format!("gaussian:{s}"),
        None => params.require("noise", args.noise.clone())?,
    };
    let declared = params.get("big-k", args.big_k)?;
    let model = NoiseModel::parse(&spec, declared)?;
    if declared.is_none() {
        params.record("big-k", &model.norm_bound());
    }
    Ok(model)
}

fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut params = Params::load(args.common.config.as_deref())?;
    let n = params.get("n-inactive", args.n_inactive)?;
    let k = params.get("k", args.k)?;
    let eps = params.get("eps", args.eps)?;
    let delta = params.get("delta", args.delta)?;
    let scheme_requested = n.is_some() || k.is_some() || eps.is_some();
    if !scheme_requested && delta.is_none() {
        return Err(CliError::Usage(
            "missing required flag --n-inactive (or --delta for a standalone repetition length)".into(),
        ));
    }
    let big_c = params.or("big-c", args.big_c, 1.0)?;
    let norm = params.or("big-k", args.big_k, 1.0)?;
    let power = params.or("power", args.power, 1.0)?;
    let c = params.or("c", args.c, GAUSSIAN_C)?;
    params.echo("bounds", out)?;

    if scheme_requested {
        let n = positive_flag("n-inactive", params.require("n-inactive", n)?)?;
        let k = positive_flag("k", params.require("k", k)?)?;
        let eps = probability_flag("eps", params.require("eps", eps)?)?;
        let theorem1 = bounds::slots_theorem1(n, k, eps, big_c)?;
        let corollary1 = bounds::slots_corollary1(n, k, eps)?;
        writeln!(out, "p = {}", optimal_choice_probability(k))?;
        writeln!(out, "l_theorem1 = {theorem1}")?;
        writeln!(out, "l_corollary1 = {corollary1}")?;
        writeln!(out, "l = {corollary1}")?;
        let budget = bounds::total_channel_uses(n, k, eps, norm, power, c)?;
        writeln!(out, "delta_per_slot = {}", budget.slot_error)?;
        writeln!(out, "m_per_slot = {}", budget.repetitions)?;
        writeln!(out, "total_channel_uses = {}", budget.total)?;
        writeln!(out, "closed_form_channel_uses = {:.1}", budget.closed_form)?;
    }
    if let Some(delta) = delta {
        let delta = probability_flag("delta", delta)?;
        writeln!(out, "m = {}", bounds::repetition_length(norm, power, delta, c)?)?;
    }
    Ok(())
}

fn format_slot(s: ExactSlot) -> String {
    match s {
        ExactSlot::Reached(l) => l.to_string(),
        ExactSlot::Censored { budget } => format!(">{budget}"),
    }
}

struct SimulatePlan {
    n: u64,
    k: u64,
    p: f64,
    trials: u64,
    seed: u64,
    mode: SimulateMode,
    horizon: u64,
    grid: Vec<u64>,
}

fn run_simulation(plan: &SimulatePlan, path: &Path, out: &mut dyn Write) -> CliResult<()> {
    match plan.mode {
        SimulateMode::UntilExact => {
            let records = harness::run_until_exact_batch(plan.n, plan.k, plan.p, plan.trials, plan.seed)?;
            let curve = harness::build_error_curve(&records, &plan.grid, plan.n, plan.k)?;
            harness::export_error_curve(&curve, path)?;
            let s = harness::summarize_until_exact(&records)?;
            writeln!(
                out,
                "N={} k={} trials={} median_l={} max_l={} censored={} csv={}",
                plan.n,
                plan.k,
                s.trials,
                format_slot(s.median),
                format_slot(s.max),
                s.censored,
                path.display()
            )?;
        }
        SimulateMode::Trace => {
            let trace = harness::expectation_trace(plan.n, plan.k, plan.p, plan.trials, plan.horizon, plan.seed)?;
            harness::export_expectation_trace(&trace, path)?;
            let last = trace.rows.last().expect("horizon >= 1");
            writeln!(
                out,
                "N={} k={} trials={} slot={} mean={} se={} predicted={} csv={}",
                plan.n,
                plan.k,
                plan.trials,
                last.slot,
                last.empirical_mean,
                last.std_error,
                last.lemma1_prediction,
                path.display()
            )?;
        }
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut params = Params::load(args.common.config.as_deref())?;
    let preset = params.get("preset", args.preset.map(|_| "paper".to_string()))?;
    let full_scale = args.full_scale || params.get::<bool>("full-scale", None)?.unwrap_or(false);
    let default_trials = if full_scale { FULL_SCALE_TRIALS } else { DEFAULT_TRIALS };
    let trials = params.or("trials", args.trials, default_trials)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let mode_name = params.or(
        "mode",
        args.mode.map(|m| mode_name(m).to_string()),
        "until-exact".to_string(),
    )?;
    let mode = match mode_name.as_str() {
        "until-exact" => SimulateMode::UntilExact,
        "trace" => SimulateMode::Trace,
        other => return Err(CliError::Usage(format!("invalid value `{other}` for --mode"))),
    };
    let seed = params.seed(args.seed)?;
    let horizon = params.or("horizon", args.horizon, 100)?;
    let grid_max = params.or("grid-max", args.grid_max, DEFAULT_GRID_MAX)?;
    let grid_step = positive_flag("grid-step", params.or("grid-step", args.grid_step, 1)?)?;
    let grid = harness::default_grid(grid_max, grid_step);

    let pairs: Vec<(u64, u64)> = match preset.as_deref() {
        Some("paper") => REFERENCE_PAIRS.to_vec(),
        Some(other) => return Err(CliError::Usage(format!("invalid value `{other}` for --preset"))),
        None => {
            let n = params.require("n-inactive", args.n_inactive)?;
            let k = params.require("k", args.k)?;
            vec![(n, k)]
        }
    };
    let p_override = params.get("p", args.p)?;
    if let Some(p) = p_override {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Usage(format!("--p must lie in [0, 1], got {p}")));
        }
    }
    let out_path = params.get("out", args.out.as_ref().map(|p| p.display().to_string()))?;
    let threads = params.get("threads", args.common.threads)?;
    params.echo("simulate", out)?;

    for (n, k) in pairs {
        let plan = SimulatePlan {
            n,
            k,
            p: p_override.unwrap_or_else(|| optimal_choice_probability(k)),
            trials,
            seed,
            mode,
            horizon,
            grid: grid.clone(),
        };
        let file_name = match mode {
            SimulateMode::UntilExact => format!("curve_N{n}_k{k}.csv"),
            SimulateMode::Trace => format!("trace_N{n}_k{k}.csv"),
        };
        let path = match (&out_path, preset.is_some()) {
            (Some(dir), true) => {
                std::fs::create_dir_all(dir)?;
                Path::new(dir).join(file_name)
            }
            (Some(file), false) => PathBuf::from(file),
            (None, _) => PathBuf::from(file_name),
        };
        let mut buf = Vec::new();
        with_threads(threads, || run_simulation(&plan, &path, &mut buf))??;
        out.write_all(&buf)?;
    }
    Ok(())
}

fn mode_name(m: SimulateMode) -> &'static str {
    match m {
        SimulateMode::UntilExact => "until-exact",
        SimulateMode::Trace => "trace",
    }
}

fn cmd_channel(args: &ChannelArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut params = Params::load(args.common.config.as_deref())?;
    let noise = noise_model(&mut params, &args.noise)?;
    let power = positive_flag("power", params.or("power", args.noise.power, 1.0)?)?;
    let c = positive_flag("c", params.or("c", args.noise.c, GAUSSIAN_C)?)?;
    let senders = positive_flag("senders", params.or("senders", args.senders, 2)?)?;
    let trials = params.or("trials", args.trials, 1_000_000)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let delta = params.get("delta", args.delta)?;
    let m = match params.get("m", args.m)? {
        Some(m) => positive_flag("m", m)?,
        None => {
            let delta = probability_flag("delta", params.require("delta", delta)?)?;
            let m = if noise.norm_bound() == 0.0 {
                1
            } else {
                bounds::repetition_length(noise.norm_bound(), power, delta, c)?.max(1)
            };
            params.record("m", &m);
            m
        }
    };
    let seed = params.seed(args.seed)?;
    let threads = params.get("threads", args.common.threads)?;
    params.echo("channel", out)?;

    let spec = ChannelSpec::new(power, noise.clone(), senders)?;
    let (all_false, one_true) = with_threads(threads, || {
        Ok::<_, Error>((
            channel::simulate_slot_errors(&spec, m, 0, trials, seed)?,
            channel::simulate_slot_errors(&spec, m, 1, trials, mix64(seed))?,
        ))
    })??;
    writeln!(out, "m = {m}")?;
    writeln!(out, "slots = {trials}")?;
    writeln!(out, "false_positive_rate = {}", all_false.error_rate())?;
    writeln!(out, "false_negative_rate = {}", one_true.error_rate())?;
    writeln!(out, "noise_exceedance_rate = {}", all_false.exceedance_rate())?;
    if let Some(sigma) = noise.iid_gaussian_sigma().filter(|s| *s > 0.0) {
        writeln!(out, "gaussian_exceedance_exact = {}", channel::gaussian_slot_error_exact(sigma, power, m))?;
        writeln!(
            out,
            "gaussian_false_positive_exact = {}",
            channel::gaussian_false_positive_exact(sigma, power, m)
        )?;
    }
    if let Some(delta) = delta {
        let worst = all_false.error_rate().max(one_true.error_rate());
        writeln!(out, "within_delta = {}", worst <= delta)?;
    }
    Ok(())
}

fn cmd_e2e(args: &E2eArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut params = Params::load(args.common.config.as_deref())?;
    let n = params.require("n-inactive", args.n_inactive)?;
    let k = params.require("k", args.k)?;
    let eps = probability_flag("eps", params.require("eps", args.eps)?)?;
    let noise = noise_model(&mut params, &args.noise)?;
    let power = positive_flag("power", params.or("power", args.noise.power, 1.0)?)?;
    let c = positive_flag("c", params.or("c", args.noise.c, GAUSSIAN_C)?)?;
    let trials = params.or("trials", args.trials, 2_000)?;
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let seed = params.seed(args.seed)?;
    let out_path = params.or(
        "out",
        args.out.as_ref().map(|p| p.display().to_string()),
        format!("e2e_N{n}_k{k}.csv"),
    )?;
    let threads = params.get("threads", args.common.threads)?;
    params.echo("e2e", out)?;

    let channel = ChannelParams {
        noise,
        power,
        eps,
        c_constant: c,
    };
    let plan = harness::EndToEndPlan::new(n, k, &channel)?;
    writeln!(out, "l = {}", plan.slots)?;
    writeln!(out, "delta = {}", plan.slot_error)?;
    writeln!(out, "m = {}", plan.repetitions)?;
    let summary = with_threads(threads, || harness::run_end_to_end(n, k, &channel, trials, seed))??;
    harness::export_end_to_end(&summary, Path::new(&out_path))?;
    writeln!(out, "trials = {}", summary.trials)?;
    writeln!(out, "failures = {}", summary.failures)?;
    writeln!(out, "failure_rate = {}", summary.failure_rate)?;
    writeln!(out, "std_error = {}", summary.std_error())?;
    writeln!(out, "two_epsilon = {}", summary.two_epsilon)?;
    writeln!(out, "total_channel_uses = {}", summary.total_channel_uses)?;
    writeln!(out, "csv = {out_path}")?;
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Channel(a) => cmd_channel(a, out),
        Command::E2e(a) => cmd_e2e(a, out),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Runtime(msg)) = &e;
            let _ = writeln!(err, "error: {msg}");
            if matches!(e, CliError::Usage(_)) {
                let _ = writeln!(err, "\nFor more information, try '--help'.");
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["mac-activity"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn config_parser() {
        let map = parse_config("# comment\n[simulate]\nk = 20\n\n n-inactive=10000 \n; x\n").unwrap();
        assert_eq!(map.get("k").unwrap(), "20");
        assert_eq!(map.get("n-inactive").unwrap(), "10000");
        assert!(parse_config("garbage").is_err());
    }

    #[test]
    fn bounds_reports_slot_budget() {
        let (code, out, _) = run_capture(&["bounds", "--n-inactive", "10000", "--k", "20", "--eps", "0.01"]);
        assert_eq!(code, 0);
        assert!(out.contains("l = 789\n"), "{out}");
        assert!(out.contains("m_per_slot = 99\n"));
        assert!(out.contains("total_channel_uses = 78111\n"));
    }

    #[test]
    fn bounds_repetition_length() {
        let (code, out, _) = run_capture(&["bounds", "--c", "0.125", "--big-k", "1", "--power", "1", "--delta", "0.01"]);
        assert_eq!(code, 0);
        assert!(out.contains("m = 45\n"), "{out}");
    }

    #[test]
    fn bounds_usage_errors() {
        let (code, _, err) = run_capture(&["bounds"]);
        assert_eq!(code, 2);
        assert!(err.contains("--n-inactive"));
        let (code, _, err) = run_capture(&["bounds", "--n-inactive", "100", "--k", "2"]);
        assert_eq!(code, 2);
        assert!(err.contains("--eps"), "{err}");
        let (code, _, err) = run_capture(&["bounds", "--n-inactive", "100", "--k", "2", "--eps", "1.5"]);
        assert_eq!(code, 2);
        assert!(err.contains("eps"));
        let (code, _, _) = run_capture(&["bounds", "--k", "abc"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn simulate_rejects_zero_trials() {
        let (code, _, err) = run_capture(&["simulate", "--n-inactive", "10", "--k", "1", "--trials", "0", "--seed", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("--trials"));
    }

    #[test]
    fn config_file_values_and_flag_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.ini");
        std::fs::write(&cfg, "n-inactive = 10000\nk = 30\neps = 0.01\n").unwrap();
        let cfg = cfg.to_str().unwrap();
        let (code, out, _) = run_capture(&["bounds", "--config", cfg, "--k", "20"]);
        assert_eq!(code, 0);
        assert!(out.contains("k = 20\n"));
        assert!(out.contains("l = 789\n"), "{out}");
    }

    #[test]
    fn effective_block_replays() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("c.csv");
        let csv_s = csv.to_str().unwrap();
        let (code, out, _) = run_capture(&[
            "simulate", "--n-inactive", "200", "--k", "2", "--trials", "50", "--grid-max", "100", "--out", csv_s,
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("seed = "), "generated seed must be echoed");
        let first = std::fs::read(&csv).unwrap();

        let block: String = out.split("\n\n").next().unwrap().to_string();
        let cfg = dir.path().join("replay.ini");
        std::fs::write(&cfg, block).unwrap();
        std::fs::remove_file(&csv).unwrap();
        let (code, _, _) = run_capture(&["simulate", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(std::fs::read(&csv).unwrap(), first);
    }

    #[test]
    fn channel_reports_rates() {
        let (code, out, _) = run_capture(&[
            "channel", "--sigma", "1", "--power", "1", "--delta", "0.01", "--trials", "20000", "--seed", "3",
        ]);
        assert_eq!(code, 0);
        assert!(out.contains("m = 45\n"), "{out}");
        assert!(out.contains("gaussian_exceedance_exact"));
        let (code, _, _) = run_capture(&["channel", "--sigma", "1", "--noise", "zero", "--delta", "0.1"]);
        assert_eq!(code, 2);
        let (code, _, err) = run_capture(&["channel", "--noise", "gaussian:2", "--big-k", "1", "--delta", "0.1"]);
        assert_eq!(code, 2);
        assert!(err.contains("big-k"), "{err}");
    }

    #[test]
    fn e2e_zero_noise_run() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("e.csv");
        let (code, out, _) = run_capture(&[
            "e2e", "--n-inactive", "100", "--k", "2", "--eps", "0.1", "--noise", "zero", "--trials", "200", "--seed",
            "4", "--out", csv.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("delta = "));
        let summary = harness::read_end_to_end(&csv).unwrap();
        assert_eq!(summary.trials, 200);
        assert_eq!(summary.m, 1);
        let se = (0.1 * 0.9 / 200.0f64).sqrt();
        assert!(summary.failure_rate <= 0.1 + 3.0 * se);
    }

    #[test]
    fn io_failures_exit_with_one() {
        let (code, _, err) = run_capture(&[
            "simulate", "--n-inactive", "10", "--k", "1", "--trials", "5", "--seed", "1", "--out",
            "/nonexistent-dir/out.csv",
        ]);
        assert_eq!(code, 1);
        assert!(err.contains("/nonexistent-dir/out.csv"));
    }
}
