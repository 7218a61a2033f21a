//! Command-line front end.
//!
//! ```text
//! netshuffle graph info      --topology complete --n 5 [--eps0 1]
//! netshuffle bounds compute  --model fmt --eps0 1 --n 10000 --delta 1e-6
//! netshuffle bounds sweep    --model netshuffle,smpl_wlk --eps0 1 --n 1000:100000:log --p 0.1 --delta 1e-6
//! netshuffle simulate        --protocol rnd_wlk --topology complete --n 3 --randomizer identity --T 0
//! netshuffle verify all      --budget 1e6
//! ```
//!
//! Global flags: `--config FILE` (JSON keyed by flag name; flags win),
//! `--seed`, `--out`, `--precision` (significant digits, 0 = full),
//! `--workers`. `NETSHUFFLE_BUDGET` sets the enumeration cap when
//! `--budget` is absent.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::protocol::Rounds;

pub use output::{parse_int_range, parse_range, round_sig, DEFAULT_PRECISION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "netshuffle",
    version,
    about = "Network-shuffle privacy: simulation, bounds and verification"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// JSON file of flag values; command-line flags take precedence.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Master seed. Drawn from entropy (and printed to stderr) if omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Significant digits for floating-point output; 0 for full precision.
    #[arg(long, global = true)]
    pub precision: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Graph structure and spectral summary.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Closed-form privacy bounds.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Seeded protocol trials as JSON lines.
    Simulate(SimulateArgs),
    /// Numerical verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        args: VerifyArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    Info(GraphInfoArgs),
}

#[derive(Debug, Subcommand)]
pub enum BoundsCommand {
    /// One JSON result per model.
    Compute(BoundsArgs),
    /// CSV over the grid spanned by the range arguments.
    Sweep(BoundsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum TopologyName {
    Complete,
    Cycle,
    Path,
    Star,
    ErdosRenyi,
    RandomRegular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Fmt,
    Netshuffle,
    SmplWlk,
    Partial,
    SubsampleWor,
    LiewMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    RndWlk,
    Infinite,
    SmplWlk,
    Restricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum RandomizerName {
    BinaryRr,
    KaryRr,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lemma1,
    EmpiricalDp,
    Mixing,
    Concentration,
    Ldp,
    Shuffle,
    All,
}

/// A sweep axis as typed: one value, a list, or a range expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Number(f64),
    Text(String),
}

impl FromStr for Axis {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Axis::Text(s.to_owned()))
    }
}

impl Axis {
    fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Axis::Number(x) => Ok(vec![*x]),
            Axis::Text(s) => parse_range(s),
        }
    }

    fn counts(&self) -> Result<Vec<usize>, CliError> {
        match self {
            Axis::Number(x) => parse_int_range(&x.to_string()),
            Axis::Text(s) => parse_int_range(s),
        }
    }
}

/// Graph source: a named topology or an edge-list file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct GraphArgs {
    #[arg(long, value_enum)]
    pub topology: Option<TopologyName>,
    /// Edge-list file (`u v` per line, `#` comments, optional `n <count>`).
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Edge probability for erdos_renyi.
    #[arg(long)]
    pub edge_p: Option<f64>,
    /// Degree for random_regular.
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct GraphInfoArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge probability for erdos_renyi when `--edge-p` is absent.
    #[arg(long)]
    pub p: Option<f64>,
    /// Adds the recommended number of rounds for this ε₀.
    #[arg(long)]
    pub eps0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct BoundsArgs {
    #[arg(long, value_enum, value_delimiter = ',')]
    pub model: Option<Vec<ModelName>>,
    #[arg(long)]
    pub eps0: Option<Axis>,
    #[arg(long)]
    pub n: Option<Axis>,
    #[arg(long)]
    pub delta: Option<Axis>,
    #[arg(long)]
    pub delta0: Option<Axis>,
    /// Sampling probability (smpl_wlk).
    #[arg(long)]
    pub p: Option<Axis>,
    /// Number of reporting clients (partial, subsample_wor).
    #[arg(long)]
    pub l: Option<Axis>,
    /// Input ε for subsample_wor.
    #[arg(long)]
    pub eps: Option<Axis>,
    /// Walk length for liew_metric; omitted means T → ∞.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub rounds: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct RandomizerArgs {
    #[arg(long, value_enum)]
    pub randomizer: Option<RandomizerName>,
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Alphabet size for kary_rr and identity.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolName>,
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub randomizer: RandomizerArgs,
    /// Comma-separated input symbols, one per client.
    #[arg(long, value_delimiter = ',')]
    pub data: Option<Vec<usize>>,
    /// File of input symbols separated by whitespace or commas.
    #[arg(long)]
    pub data_file: Option<PathBuf>,
    /// Walk length: a count or `auto`.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub rounds: Option<Rounds>,
    /// Sampling probability for smpl_wlk.
    #[arg(long)]
    pub p: Option<f64>,
    /// Releasing clients for restricted.
    #[arg(long, value_delimiter = ',')]
    pub clients: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Emit the destination-frequency matrix instead of per-trial lines.
    #[arg(long)]
    pub summary: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge probability for erdos_renyi when `--edge-p` is absent.
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub randomizer: RandomizerArgs,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub rounds: Option<Rounds>,
    /// Target δ for the empirical privacy check.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Protocol for the empirical privacy check.
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolName>,
    /// Sampling probability when the protocol is smpl_wlk.
    #[arg(long)]
    pub sample_p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub clients: Option<Vec<usize>>,
    /// Base dataset of the neighboring pair.
    #[arg(long, value_delimiter = ',')]
    pub data: Option<Vec<usize>>,
    /// Substituted position of the neighboring pair.
    #[arg(long)]
    pub position: Option<usize>,
    /// Value substituted at `--position`.
    #[arg(long)]
    pub replacement: Option<usize>,
    /// Random event unions in the lemma1 check.
    #[arg(long)]
    pub unions: Option<usize>,
    /// Participation probability for the concentration check.
    #[arg(long)]
    pub concentration_p: Option<f64>,
    /// Population size for the concentration check.
    #[arg(long)]
    pub concentration_n: Option<usize>,
    /// Failure probability for the concentration check.
    #[arg(long)]
    pub concentration_delta: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Enumeration cap in atoms.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Skipped checks make the exit code nonzero.
    #[arg(long)]
    pub strict: bool,
}

/// Parses `args` (including the program name), runs the command, and maps
/// the outcome to an exit code: 0 success, 1 failed verification, 2 error.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
