use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod input;
mod output;

/// Exact gradients, Clarke subdifferentials, stratifications and
/// conservative-field checks for piecewise-affine functions.
#[derive(Debug, Parser)]
#[command(name = "pathfield", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Master seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report files.
    #[arg(long, global = true, default_value = "pathfield-out")]
    pub out: PathBuf,
    /// Absolute chain-rule tolerance.
    #[arg(long, global = true, default_value = "1e-8")]
    pub tol_abs: f64,
    /// Relative chain-rule tolerance, scaled by |f(x(1)) - f(x(0))|.
    #[arg(long, global = true, default_value = "1e-8")]
    pub tol_rel: f64,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, env = "PATHFIELD_THREADS", default_value_t = 0, hide_env_values = true)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nonsmooth AD gradient at a point.
    Grad(GradArgs),
    /// Vertices of the Clarke subdifferential at a point.
    Clarke(PointArgs),
    /// List every stratum with its geometry and incidences.
    Stratify(StratifyArgs),
    /// Chain-rule, structure-inclusion and regularity checks for a field.
    Verify(VerifyArgs),
    /// Diminishing-step descent driven by a field.
    Descend(DescendArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FnArg {
    /// Function file, or the name of a built-in corpus member (e.g. paperf.fn).
    #[arg(long = "fn", value_name = "PATH")]
    pub function: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Forward,
    Reverse,
}

#[derive(Debug, Args)]
pub struct GradArgs {
    #[command(flatten)]
    pub function: FnArg,
    /// Comma-separated coordinates; rationals like 1/3 are exact.
    #[arg(long, allow_hyphen_values = true)]
    pub at: String,
    /// `default`, `family`, or a JSON policy file.
    #[arg(long, default_value = "default")]
    pub policy: String,
    /// Accumulation order of the chain rule.
    #[arg(long, value_enum, default_value_t = Mode::Forward)]
    pub mode: Mode,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub function: FnArg,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub at: String,
}

#[derive(Debug, Args)]
pub struct StratifyArgs {
    #[command(flatten)]
    pub function: FnArg,
    /// Sampled sequences per incident stratum pair in the normal-limit probe.
    #[arg(long, default_value_t = 20)]
    pub whitney_trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldKind {
    Policy,
    Clarke,
    #[value(name = "clarke+normal")]
    ClarkeNormal,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Chain,
    Structure,
    Regularity,
    All,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Candidate field to check or follow.
    #[arg(long, value_enum, default_value_t = FieldKind::Clarke)]
    pub field: FieldKind,
    /// Truncation radius for clarke+normal; omitted means no truncation.
    #[arg(long)]
    pub r: Option<String>,
    /// Policies for the policy field: `default`, `family`, or a JSON file.
    #[arg(long, default_value = "family")]
    pub policy: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub function: FnArg,
    #[command(flatten)]
    pub field: FieldArgs,
    /// Which checks to run.
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// Random curves in the chain-rule suite; one dwell curve per lower stratum is added.
    #[arg(long, default_value_t = 1000)]
    pub curves: usize,
    /// Field selections per curve.
    #[arg(long, default_value_t = 4)]
    pub selections: usize,
    /// Random grid points in the structure suite, on top of one point per stratum.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Half-width of the box [-b, b]^n for the regularity suite.
    #[arg(long = "box", default_value = "2")]
    pub box_radius: String,
    /// Quadrature error target per kink-free interval.
    #[arg(long, default_value = "1e-10")]
    pub tol_quad: f64,
}

#[derive(Debug, Args)]
pub struct DescendArgs {
    #[command(flatten)]
    pub function: FnArg,
    #[command(flatten)]
    pub field: FieldArgs,
    /// Start point, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub from: String,
    /// Iteration cap.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Initial step; step k is alpha0 / (k + 1).
    #[arg(long, default_value = "0.5")]
    pub alpha0: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.threads > 0 {
        // Only fails if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global();
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
