mod commands;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::Format;

#[derive(Parser, Debug)]
#[command(name = "bernconv", version, about = "Entropy and dimension experiments for Bernoulli convolutions and self-affine measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: RunConfig,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Entropy, kappa and dimension estimates over a range of levels.
    Dim,
    /// Partition entropy H(mu, E_n).
    Entropy,
    /// Average entropy H(mu; r), or H(mu; r | r2) when --r2 is given.
    AvgEntropy,
    /// Random-walk entropy upper bounds (1/n) H over words of length n.
    RwEntropy,
    /// First depth of an exact overlap, per axis and for the full system.
    Overlap,
    /// Minimal gaps between level-n points.
    Separation,
    /// Non-saturation profile across principal directions.
    Nonsat,
    /// Bernoulli-pair decomposition of a measure.
    Decompose,
    /// Entropy gain from convolving with a second measure.
    Increase,
    /// Tube entropy of a binomial self-convolution.
    Tube,
    /// Mahler measure of an integer polynomial.
    Mahler,
    /// Nonzero polynomial with bounded coefficients and small value at xi.
    PolySearch,
    /// Algebraic approximation of the contraction parameters.
    Approx,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QuadArg {
    Exact,
    Qmc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArithArg {
    Exact,
    Float,
}

/// Inclusive integer range written `A..B` or a single `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NRange {
    pub start: i64,
    pub end: i64,
}

impl NRange {
    pub fn iter(self) -> impl Iterator<Item = i64> {
        self.start..=self.end
    }
}

fn parse_range(s: &str) -> Result<NRange, String> {
    let parse = |t: &str| t.trim().parse::<i64>().map_err(|e| format!("invalid integer {t:?}: {e}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if b < a {
        return Err(format!("empty range {s}"));
    }
    Ok(NRange { start: a, end: b })
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// System spec (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Atom list (CSV with header x1,...,xd,w).
    #[arg(long, global = true)]
    pub measure: Option<PathBuf>,
    /// Second atom list (the convolving measure for `increase`).
    #[arg(long, global = true)]
    pub nu: Option<PathBuf>,
    /// Level or inclusive level range, `A..B`.
    #[arg(long, global = true, value_parser = parse_range, allow_hyphen_values = true)]
    pub n: Option<NRange>,
    /// Level of the measure built from --spec when a command needs a measure.
    #[arg(long, global = true)]
    pub level: Option<usize>,
    /// Contraction vector (overrides the spec's).
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub r2: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub t1: Option<f64>,
    #[arg(long, global = true)]
    pub t2: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub m: Option<i64>,
    #[arg(long = "N", global = true)]
    pub big_n: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub quad: Option<QuadArg>,
    #[arg(long, global = true, default_value_t = 4096)]
    pub offsets: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 10_000_000)]
    pub cell_budget: u128,
    /// Word/atom budget for enumerations and search tables.
    #[arg(long, global = true)]
    pub budget: Option<u128>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Defaults to json for single-value reports and csv for tables.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Comma-separated coefficients, constant term first.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub poly: Option<String>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub xi: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Option<Vec<i64>>,
    #[arg(long, global = true, default_value = "meet-in-middle")]
    pub strategy: String,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub k: Option<u32>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub l: Option<i64>,
    #[arg(long, global = true, value_enum)]
    pub arith: Option<ArithArg>,
    /// Candidates examined per axis by `approx`.
    #[arg(long, global = true, default_value_t = 32)]
    pub candidates: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let report = match commands::dispatch(cli.command, &cli.config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let format = cli
        .config
        .format
        .unwrap_or(if report.single { Format::Json } else { Format::Csv });
    let written = match &cli.config.out {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            report.write(format, &mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            report.write(format, &mut lock)
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
