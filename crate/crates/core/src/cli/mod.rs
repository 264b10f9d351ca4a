//! `hubscan` command line: `detect`, `scree`, `simulate` and `generate`.

mod commands;
mod input;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::HubError;
use crate::ipchd::{Kappa, Rho, SMode, DEFAULT_RATIO_FACTOR};
use crate::metrics::{HubStrength, Method, SModeSpec, SizeSpec, DEFAULT_GRID_XI};
use crate::pipeline::Scale;

pub use input::{InputFingerprint, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{op}: {source}")]
    Hub { op: &'static str, source: HubError },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub(crate) fn hub(op: &'static str, source: HubError) -> Self {
        CliError::Hub { op, source }
    }

    /// 3 for numerical failures, 2 for everything the user can fix with flags or input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Hub { source, .. } if source.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hubscan",
    version,
    about = "Spectral hub detection in Gaussian graphical models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect hubs in a data set and write the result as JSON.
    Detect(DetectArgs),
    /// Emit descending eigenvalues and eigenvalue ratios as CSV.
    Scree(ScreeArgs),
    /// Run a replicated simulation grid.
    Simulate(SimulateArgs),
    /// Generate a ground-truth model (and optionally sample data from it).
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorChoice {
    Sample,
    Screened,
    Thresholded,
    Masked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum PreprocessOrder {
    /// log-shift, residualize, then keep the top-variance columns
    #[default]
    TransformFirst,
    /// keep the top-variance columns of the raw data, then log-shift and residualize
    SelectFirst,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV: rows are observations, columns are variables.
    #[arg(long)]
    pub input: PathBuf,
    /// The first row is data, not a header.
    #[arg(long)]
    pub no_header: bool,
    /// Apply ln(x + c) per column, c = max(0, 1 - min) unless --log-shift-const is given.
    #[arg(long)]
    pub log_shift: bool,
    /// Shift constant for --log-shift (implies --log-shift).
    #[arg(long, allow_hyphen_values = true)]
    pub log_shift_const: Option<f64>,
    /// Columns (names or 0-based indices) regressed out of every variable and then dropped.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Keep only the k variables with the largest sample variance.
    #[arg(long)]
    pub top_variance: Option<usize>,
    /// Whether top-variance selection runs after (default) or before the transforms.
    #[arg(long, value_enum, default_value_t)]
    pub preprocess_order: PreprocessOrder,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Covariance estimator; defaults to sample when n > p, thresholded otherwise.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorChoice>,
    /// Number of variables kept by the screened estimator (must not exceed n).
    #[arg(long)]
    pub screen_size: Option<usize>,
    /// Threshold multiplier: entries below xi * sqrt(ln p / n) are zeroed.
    #[arg(long, default_value_t = 1.0)]
    pub xi: f64,
    /// Compare the signed entry with the threshold instead of its absolute value.
    #[arg(long)]
    pub signed_threshold: bool,
    /// Symmetric 0/1 CSV mask (no header) for the masked estimator.
    #[arg(long)]
    pub mask_file: Option<PathBuf>,
    /// Work with the correlation or the covariance scale.
    #[arg(long, default_value = "correlation")]
    pub scale: Scale,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Ridge added to the eigenvalues: 'auto' or a value >= 0.
    #[arg(long, default_value = "auto")]
    pub rho: Rho,
    /// Hub threshold: a value in (0, 1], 'auto-2s-over-p' or 'auto-2sd'.
    #[arg(long, default_value = "auto-2s-over-p")]
    pub kappa: Kappa,
    /// Spike count: 'data-driven', 'over-estimated' or a fixed integer.
    #[arg(long, default_value = "data-driven")]
    pub s_mode: SMode,
    /// Dominance factor between the two largest eigenvalue ratios.
    #[arg(long, default_value_t = DEFAULT_RATIO_FACTOR)]
    pub ratio_factor: f64,
    /// Output file (standard output when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScreeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Ridge used in the ratios: 'auto' or a value >= 0.
    #[arg(long, default_value = "auto")]
    pub rho: Rho,
    /// Output CSV (standard output when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the run manifest as JSON to this file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum RecordFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Grid specification as JSON; replaces every grid flag below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dimensions.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub p: Vec<usize>,
    /// Signal block sizes: integers, 'p' or fractions such as '0.25p'.
    #[arg(long, value_delimiter = ',', default_value = "p")]
    pub t: Vec<SizeSpec>,
    /// Sample sizes: integers, 'p' or fractions such as '0.5p'.
    #[arg(long, value_delimiter = ',', default_value = "p")]
    pub n: Vec<SizeSpec>,
    /// Number of planted hubs.
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    /// Smallest eigenvalue of the precision matrix.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    pub delta: Vec<f64>,
    /// Hub strengths: weak, strong.
    #[arg(long, value_delimiter = ',', default_value = "strong")]
    pub strength: Vec<HubStrength>,
    #[arg(long, default_value_t = 0.05)]
    pub p_nonhub: f64,
    #[arg(long, default_value_t = 0.005)]
    pub p_nonsignal: f64,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    /// Methods: ipchd_sample, ipchd_screened, ipchd_thresholded, raw_inverse.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ipchd_sample,ipchd_screened,ipchd_thresholded,raw_inverse"
    )]
    pub methods: Vec<Method>,
    /// Base seed for every replicate.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threshold multiplier of ipchd_thresholded.
    #[arg(long, default_value_t = DEFAULT_GRID_XI)]
    pub xi: f64,
    /// Screen size of ipchd_screened (default min(n, p)).
    #[arg(long)]
    pub screen_size: Option<usize>,
    /// Spike count rule of the IPC-HD methods.
    #[arg(long, value_enum, default_value = "data-driven")]
    pub s_mode: SModeArg,
    /// Records file (standard output when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: RecordFormat,
    /// Per-cell summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Record wall-clock times; without it wall_time_ms is 0 so reruns are byte-identical.
    #[arg(long)]
    pub timing: bool,
    /// Write the run manifest as JSON to this file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "HUBSCAN_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SModeArg {
    DataDriven,
    OverEstimated,
}

impl From<SModeArg> for SModeSpec {
    fn from(s: SModeArg) -> Self {
        match s {
            SModeArg::DataDriven => SModeSpec::DataDriven,
            SModeArg::OverEstimated => SModeSpec::OverEstimated,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub p: usize,
    /// Signal block size (default p).
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub r: usize,
    /// Preset for --p-hub: strong (0.8) or weak (0.4).
    #[arg(long, default_value = "strong")]
    pub strength: HubStrength,
    /// Edge probability between a hub and another signal variable.
    #[arg(long)]
    pub p_hub: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub p_nonhub: f64,
    #[arg(long, default_value_t = 0.005)]
    pub p_nonsignal: f64,
    #[arg(long, default_value_t = 5.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 4.0)]
    pub weight_low: f64,
    #[arg(long, default_value_t = 5.0)]
    pub weight_high: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model JSON (standard output when absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also draw this many observations.
    #[arg(long, requires = "data_output")]
    pub n: Option<usize>,
    /// CSV receiving the sampled observations.
    #[arg(long, requires = "n")]
    pub data_output: Option<PathBuf>,
    /// Sample from the correlation matrix instead of the covariance.
    #[arg(long)]
    pub standardized: bool,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let command: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = match cli.command {
        Command::Detect(a) => commands::detect(&a, &command),
        Command::Scree(a) => commands::scree(&a, &command),
        Command::Simulate(a) => commands::simulate(&a, &command),
        Command::Generate(a) => commands::generate(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
