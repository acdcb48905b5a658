//! Command-line front end: argument parsing, configuration layering,
//! dispatch and exit codes.
//!
//! Parameters resolve as built-in defaults, then the JSON file given by
//! `--config`, then command-line flags. The resolved set is written to
//! `resolved_config.json` next to the outputs and can be fed back through
//! `--config` to repeat the run.

mod commands;
pub mod format;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Error;
use crate::profiles::Family;

pub use commands::{
    CharacteristicsParams, EstimateParams, KernelsParams, ProfileParams, SimulateParams, SweepParams, VerifyParams,
};

/// Successful run.
pub const EXIT_OK: i32 = 0;
/// Invalid configuration: unknown key, out-of-range value, unwritable output.
pub const EXIT_CONFIG: i32 = 2;
/// Numerical failure or failed verification.
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_OUTPUT_DIR: &str = "twistshock-out";

#[derive(Debug, Parser)]
#[command(name = "twistshock", version, about = "Shock formation in damped twist waves")]
pub struct Cli {
    /// Directory for output files (created if missing).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// JSON file with parameters; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the wave-speed kernels over an eta range.
    Kernels(KernelsArgs),
    /// Tabulate the kink profile and its Riemann datum.
    Profile(ProfileArgs),
    /// Critical-time estimate for one damping value.
    Estimate(EstimateArgs),
    /// Critical-time estimates over a damping range.
    Sweep(SweepArgs),
    /// Integrate the wave equation and detect breakdown.
    Simulate(SimulateArgs),
    /// Trace characteristics through a simulation and check the bounds.
    Characteristics(CharacteristicsArgs),
    /// Run a fast self-check of the library.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernels(_) => "kernels",
            Command::Profile(_) => "profile",
            Command::Estimate(_) => "estimate",
            Command::Sweep(_) => "sweep",
            Command::Simulate(_) => "simulate",
            Command::Characteristics(_) => "characteristics",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct KinkArgs {
    /// Kink amplitude (radians).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Kink width.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ScanArgs {
    /// Smallest origin searched.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_min: Option<f64>,
    /// Largest origin searched (default: where the datum has decayed).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    /// Number of log-spaced origins.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_steps: Option<usize>,
    /// End of the time window scanned for roots.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_scan_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SimArgs {
    /// Damping parameter.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Half-width of the computational domain.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xmax: Option<f64>,
    /// Number of grid points (odd, so that x = 0 is a node).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    /// Courant number against the global speed bound.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    /// Final time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Interval between stored snapshots; 0 stores only the ends.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snap_every: Option<f64>,
    /// Breakdown threshold on dx * max |d_x r|.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blow_k: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct KernelsArgs {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ProfileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kink: KinkArgs,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kink: KinkArgs,
    /// Damping parameter (must be positive).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub scan: ScanArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kink: KinkArgs,
    /// Smallest damping value
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    /// Largest damping value
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    /// Number of evenly spaced damping values
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_steps: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub scan: ScanArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kink: KinkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    /// Number of grids (halving dx each time) for the breakdown estimate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct CharacteristicsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kink: KinkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    /// `forward` or `backward`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    /// Comma-separated curve origins.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origins: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct VerifyArgs {}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoEstimate(_) | Error::LeftWindow { .. } | Error::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Keys of a config file that are not command parameters.
const RESERVED_KEYS: [&str; 3] = ["command", "output_dir", "threads"];

/// Everything a command needs once flags and config are merged.
pub struct Resolved<P> {
    pub params: P,
    pub output_dir: PathBuf,
}

fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config `{}`: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::config(format!("config `{}` must hold a JSON object", path.display()))),
        Err(e) => Err(CliError::config(format!("config `{}` is not valid JSON: {e}", path.display()))),
    }
}

/// Layers defaults, config entries and flags, and deserializes the result.
pub fn resolve<P, A>(
    command: &str,
    flags: &A,
    config: Option<&Map<String, Value>>,
    output_dir: Option<&Path>,
) -> Result<Resolved<P>, CliError>
where
    P: Serialize + for<'de> Deserialize<'de> + Default,
    A: Serialize,
{
    let mut merged = match serde_json::to_value(P::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("parameter sets serialize to objects"),
    };
    let mut dir = None;
    if let Some(cfg) = config {
        if let Some(c) = cfg.get("command") {
            if c.as_str() != Some(command) {
                return Err(CliError::config(format!(
                    "config key `command` is {c}, but the `{command}` command was invoked"
                )));
            }
        }
        if let Some(d) = cfg.get("output_dir") {
            dir = Some(PathBuf::from(
                d.as_str()
                    .ok_or_else(|| CliError::config("config key `output_dir` must be a string"))?,
            ));
        }
        for (k, v) in cfg {
            if RESERVED_KEYS.contains(&k.as_str()) {
                continue;
            }
            if !merged.contains_key(k) {
                return Err(CliError::config(format!("unknown config key `{k}` for `{command}`")));
            }
            merged.insert(k.clone(), v.clone());
        }
    }
    if let Ok(Value::Object(m)) = serde_json::to_value(flags) {
        merged.extend(m);
    }
    let params = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::config(format!("invalid parameter: {e}")))?;
    Ok(Resolved {
        params,
        output_dir: output_dir
            .map(Path::to_path_buf)
            .or(dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
    })
}

/// The resolved configuration as written next to the outputs.
pub fn resolved_config<P: Serialize>(command: &str, r: &Resolved<P>) -> Value {
    let mut m = Map::new();
    m.insert("command".into(), Value::from(command));
    m.insert("output_dir".into(), Value::from(r.output_dir.to_string_lossy().into_owned()));
    if let Ok(Value::Object(p)) = serde_json::to_value(&r.params) {
        m.extend(p);
    }
    Value::Object(m)
}

fn threads_from(cli: &Cli, config: Option<&Map<String, Value>>) -> Result<Option<usize>, CliError> {
    if cli.threads.is_some() {
        return Ok(cli.threads);
    }
    match config.and_then(|c| c.get("threads")) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| CliError::config("config key `threads` must be a positive integer")),
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = cli.config.as_deref().map(read_config).transpose()?;
    if let Some(n) = threads_from(cli, config.as_ref())? {
        if n == 0 {
            return Err(CliError::config("`threads` must be at least 1"));
        }
        // A pool may already exist when several commands run in one process;
        // the outputs do not depend on the thread count.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let name = cli.command.name();
    let cfg = config.as_ref();
    let dir = cli.output_dir.as_deref();
    match &cli.command {
        Command::Kernels(a) => commands::kernels(resolve(name, a, cfg, dir)?),
        Command::Profile(a) => commands::profile(resolve(name, a, cfg, dir)?),
        Command::Estimate(a) => commands::estimate(resolve(name, a, cfg, dir)?),
        Command::Sweep(a) => commands::sweep(resolve(name, a, cfg, dir)?),
        Command::Simulate(a) => commands::simulate(resolve(name, a, cfg, dir)?),
        Command::Characteristics(a) => commands::characteristics(resolve(name, a, cfg, dir)?),
        Command::Verify(a) => commands::verify(resolve(name, a, cfg, dir)?),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
