use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use daqc_core::circuit::{Family, TimingMode};
use daqc_core::pipeline::{EvalConfig, LambdaSource};
use daqc_core::schedules::{NormMode, NormOptions, NormTiming};
use tracing_subscriber::EnvFilter;

mod commands;
mod io;
mod report;

/// Adiabatic circuit benchmarks for 0-1 knapsack: Lagrangian-dual versus
/// penalty (QUBO) encodings on an exact statevector simulator.
#[derive(Debug, Parser)]
#[command(name = "daqc", version)]
struct Cli {
    /// Output directory for every file a command writes.
    #[arg(long, global = true, env = "DAQC_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset of knapsack cells plus a manifest.
    Gen(GenArgs),
    /// Solve every instance exactly and certify the dual bound.
    Solve(SolveArgs),
    /// Emit the circuit, schedule and connectivity for one instance.
    Compile(CompileArgs),
    /// Random search for schedule parameters on one cell.
    Tune(TuneArgs),
    /// Evaluate fixed or tuned parameters on a dataset.
    Bench(BenchArgs),
    /// Scaling tables and slopes from two or more bench outputs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// 1: varying n with coefficients in [1, 10]. 2: fixed n, varying C.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub superset: u8,
    /// Item counts, as a range `5..9` (inclusive) or a list `4,6,8`.
    #[arg(long, value_parser = parse_sizes)]
    pub n: Sizes,
    /// Coefficient bounds for superset 2.
    #[arg(long = "C", value_delimiter = ',')]
    pub bounds: Vec<i64>,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 2026)]
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Sizes(pub Vec<usize>);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    let bad = |e: std::num::ParseIntError| format!("bad item count in {s:?}: {e}");
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(bad)?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(bad)?;
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        return Ok(Sizes((lo..=hi).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(bad))
        .collect::<Result<Vec<_>, _>>()
        .map(Sizes)
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    /// Restrict to these cells (repeatable).
    #[arg(long)]
    pub cell: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Ld,
    Qubo,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Ld => Family::Ld,
            FamilyArg::Qubo => Family::Qubo,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormModeArg {
    Pauli2,
    Frobenius,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormTimingArg {
    PerLayer,
    End,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TimingArg {
    Fused,
    Unfused,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LambdaSourceArg {
    Tuned,
    Subgradient,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum, default_value = "pauli2")]
    norm_mode: NormModeArg,
    /// Normalize the phase Hamiltonian per layer or once at the final time.
    #[arg(long, value_enum, default_value = "per-layer")]
    norm_timing: NormTimingArg,
    /// How the single-shot time is charged.
    #[arg(long, value_enum, default_value = "fused")]
    timing_mode: TimingArg,
    /// LD multipliers: scheduled from parameters, or constant from subgradient ascent.
    #[arg(long, value_enum, default_value = "tuned")]
    lambda_source: LambdaSourceArg,
}

impl EvalArgs {
    pub fn config(&self) -> EvalConfig {
        EvalConfig {
            norms: NormOptions {
                mode: match self.norm_mode {
                    NormModeArg::Pauli2 => NormMode::Pauli2,
                    NormModeArg::Frobenius => NormMode::MatrixFrobenius,
                },
                timing: match self.norm_timing {
                    NormTimingArg::PerLayer => NormTiming::PerLayer,
                    NormTimingArg::End => NormTiming::FixedAtEnd,
                },
            },
            timing: match self.timing_mode {
                TimingArg::Fused => TimingMode::Fused,
                TimingArg::Unfused => TimingMode::Unfused,
                TimingArg::ClosedForm => TimingMode::ClosedForm,
            },
            lambda_source: match self.lambda_source {
                LambdaSourceArg::Tuned => LambdaSource::Tuned,
                LambdaSourceArg::Subgradient => LambdaSource::Subgradient,
            },
        }
    }
}

/// Inline schedule parameters.
#[derive(Debug, Args)]
pub struct InlineParams {
    /// Trotter layers.
    #[arg(long)]
    pub p: Option<usize>,
    /// Total evolution time.
    #[arg(long = "T")]
    pub total_time: Option<f64>,
    /// Cubic schedule slope.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    /// LD multiplier schedules `weight:offset:slope`, one per constraint, `;`-separated.
    #[arg(long, default_value = "1:0:0", allow_hyphen_values = true)]
    pub lambda: String,
    /// Multiple of the default QUBO penalty.
    #[arg(long, default_value_t = 1.0)]
    pub penalty_factor: f64,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Instance id.
    #[arg(long)]
    pub id: String,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[command(flatten)]
    pub params: InlineParams,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Cell to tune on.
    #[arg(long)]
    pub cell: String,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = daqc_core::tuner::DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 2026)]
    pub seed: u64,
    /// Layer range `lo..hi`, inclusive.
    #[arg(long, value_parser = parse_sizes)]
    pub layers: Option<Sizes>,
    /// Total time range `lo..hi`.
    #[arg(long = "T-range", value_parser = parse_interval, allow_hyphen_values = true)]
    pub total_time: Option<(f64, f64)>,
    /// Schedule slope range `lo..hi`.
    #[arg(long = "a-range", value_parser = parse_interval, allow_hyphen_values = true)]
    pub slope: Option<(f64, f64)>,
    /// Abandon trials whose first-half median cannot win. Runs trials sequentially.
    #[arg(long)]
    pub early_stop: bool,
    #[command(flatten)]
    pub eval: EvalArgs,
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected lo..hi, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad bound {t:?}: {e}"));
    Ok((p(lo)?, p(hi)?))
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Best-parameter files from `tune`, matched to cells by name. A single
    /// file is applied to every cell. Overrides inline parameters.
    #[arg(long)]
    pub params: Vec<PathBuf>,
    #[command(flatten)]
    pub inline: InlineParams,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics CSV files written by `bench`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Scaling axis.
    #[arg(long, value_enum, default_value = "n")]
    pub by: report::Axis,
}

fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()?;
    }
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Gen(a) => commands::gen(&a, out),
        Command::Solve(a) => commands::solve(&a, out),
        Command::Compile(a) => commands::compile(&a, out),
        Command::Tune(a) => commands::tune(&a, out),
        Command::Bench(a) => commands::bench(&a, out),
        Command::Report(a) => report::report(&a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_accept_ranges_and_lists() {
        assert_eq!(parse_sizes("5..9").unwrap().0, vec![5, 6, 7, 8, 9]);
        assert_eq!(parse_sizes("5..=6").unwrap().0, vec![5, 6]);
        assert_eq!(parse_sizes("4,6, 8").unwrap().0, vec![4, 6, 8]);
        assert!(parse_sizes("9..5").is_err());
        assert!(parse_sizes("x").is_err());
    }

    #[test]
    fn intervals() {
        assert_eq!(parse_interval("-2..4").unwrap(), (-2.0, 4.0));
        assert!(parse_interval("3").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
