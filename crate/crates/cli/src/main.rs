//! `wgchan`: Weingarten tables, exact moment sums, exponent searches and Monte Carlo
//! cross-checks for products of random quantum channels.

mod commands;
mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::Format;

#[derive(Parser, Debug)]
#[command(name = "wgchan", version, about = "Random quantum channel products: exact and Monte Carlo")]
struct Cli {
    #[arg(long, value_enum, default_value = "csv", global = true)]
    format: Format,
    /// Output file (default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weingarten function Wg(n, σ) for every cycle type of S_p.
    Wg(WgArgs),
    /// Exact E tr Z^p (or E tr (QZQ)^p) by permutation sums.
    ExactMoments(ExactArgs),
    /// Exhaustive exponent minimization over S_2p.
    Minimize(MinimizeArgs),
    /// Ensemble statistics of the product output spectrum.
    Simulate(SimulateArgs),
    /// Exact moments vs Monte Carlo vs asymptotic theory.
    Compare(CompareArgs),
    /// Output entropy against the regime prediction and the naive bound.
    Entropy(EntropyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlavorArg {
    Conjugate,
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Auto,
    Full,
    Sketch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Exponent {
    S1,
    S2,
    Pair,
    Pinched,
}

#[derive(Args, Debug, Serialize)]
pub struct WgArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ExactArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub k: u64,
    /// Input dimension (default n).
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long, default_value_t = 2)]
    pub p_max: usize,
    /// E tr (QZQ)^p with Q = I - E_n (requires m = n).
    #[arg(long)]
    pub pinched: bool,
    /// Lift the p <= 3 cap to p = 4 (slow).
    #[arg(long)]
    pub allow_p4: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct MinimizeArgs {
    #[arg(long)]
    pub p: usize,
    /// Comma-separated exponents `d`; fractions `a/b` are exact, long decimals snap to small fractions.
    #[arg(long, default_value = "0,1/2,1,4/3,3/2,2,3")]
    pub d: String,
    /// Which exponents to minimize (default S1 and S2).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "s1,s2")]
    pub kind: Vec<Exponent>,
    /// Compare S1/S2 results against the built-in tables; exit 3 on mismatch.
    #[arg(long)]
    pub check_tables: bool,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct ChannelArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Input dimension (default n); must divide nk.
    #[arg(long)]
    pub m: Option<usize>,
    /// Sets m = t n k instead of --m.
    #[arg(long, conflicts_with = "m")]
    pub t: Option<f64>,
    #[arg(long, value_enum, default_value = "conjugate")]
    pub flavor: FlavorArg,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: ModeArg,
    /// Bulk rescaling (default k^2).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Eigenvalues excluded from the bulk (default 1 conjugate, 0 independent).
    #[arg(long)]
    pub drop: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 2)]
    pub p_max: usize,
    #[arg(long)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    /// Exit 3 if any |z| exceeds the threshold.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 4.0)]
    pub z_threshold: f64,
    /// Multiplies the Monte Carlo estimates; anything but 1 corrupts them.
    #[arg(long, default_value_t = 1.0)]
    pub rescale: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct EntropyArgs {
    /// Ancilla growth exponent in k = c n^d.
    #[arg(long)]
    pub d: String,
    #[arg(long)]
    pub c: f64,
    /// Bell fraction for d = 0 (m = t n k); default 1/k, i.e. m = n.
    #[arg(long)]
    pub t: Option<f64>,
    /// Comma-separated n values.
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
}

/// Failure classes mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Check(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<wgchan::Error> for CliError {
    fn from(e: wgchan::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Check(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let ctx = commands::Ctx {
        format: cli.format,
        out: cli.out.as_deref(),
    };
    let res = match &cli.command {
        Command::Wg(a) => commands::wg(&ctx, a),
        Command::ExactMoments(a) => commands::exact_moments(&ctx, a),
        Command::Minimize(a) => commands::minimize(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Compare(a) => commands::compare(&ctx, a),
        Command::Entropy(a) => commands::entropy(&ctx, a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
