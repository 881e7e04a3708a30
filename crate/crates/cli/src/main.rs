use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod results;

/// Infinite-size QAOA energies for the Sherrington–Kirkpatrick model.
///
/// Angle files are JSON documents `{"p": 2, "gamma": [..], "beta": [..]}`.
/// Exit status is 0 on success, 1 on bad usage or input, 2 when the
/// numerics fail (truncation collapse, loss of positive definiteness,
/// non-convergence).
#[derive(Debug, Parser)]
#[command(name = "skqaoa", version)]
struct Cli {
    /// Worker threads (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    /// Append a provenance row to this CSV file.
    #[arg(long, global = true)]
    results: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// ν from the brute-force G-matrix iteration.
    Exact(ExactArgs),
    /// ν from the spin-boson tensor-train simulation.
    Energy(EnergyArgs),
    /// Maximise ν over the angles at a fixed depth.
    Optimize(OptimizeArgs),
    /// Fit the energy-deficit scaling law.
    Fit(FitArgs),
    /// Statevector QAOA on random finite instances.
    Finite(FiniteArgs),
    /// Fock-space truncation thresholds and the dimension they require.
    TruncationBound(BoundArgs),
    /// Compare the tensor-train energy with the exact one.
    Crosscheck(CrosscheckArgs),
}

#[derive(Debug, Args)]
struct ExactArgs {
    /// Angle file.
    #[arg(long)]
    angles: PathBuf,
    /// Largest accepted depth.
    #[arg(long, default_value_t = skqaoa::exact::DEFAULT_P_CAP)]
    p_cap: usize,
    /// Write every iterate as CSV rows `m,j,k,re,im`.
    #[arg(long)]
    dump_g: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct MpsArgs {
    /// Per-mode Fock dimension d.
    #[arg(long, default_value_t = 8)]
    fock_dim: usize,
    /// Singular values below this fraction of the largest are dropped.
    #[arg(long, default_value_t = 1e-8)]
    svd_cutoff: f64,
    /// Bond dimension cap, or `none`.
    #[arg(long, default_value = "none", value_parser = parse_max_bond)]
    max_bond: MaxBond,
    /// Treat the cutoff as an absolute singular-value threshold.
    #[arg(long)]
    absolute_cutoff: bool,
    /// Smallest fraction of the squared norm one compression may keep
    /// before the state counts as destroyed.
    #[arg(long, default_value_t = 0.99)]
    collapse_floor: f64,
}

#[derive(Debug, Clone, Copy)]
struct MaxBond(Option<usize>);

fn parse_max_bond(s: &str) -> Result<MaxBond, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(MaxBond(None));
    }
    s.parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .map(|v| MaxBond(Some(v)))
        .ok_or_else(|| format!("expected a positive integer or `none`, got `{s}`"))
}

#[derive(Debug, Args)]
struct EnergyArgs {
    /// Angle file.
    #[arg(long)]
    angles: PathBuf,
    #[command(flatten)]
    mps: MpsArgs,
    /// Per-layer diagnostics CSV.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    /// Depth.
    #[arg(long)]
    p: usize,
    /// `random`, an angle file, or `fourier:<file>` to extrapolate a
    /// lower-depth file.
    #[arg(long, default_value = "random")]
    init: String,
    /// `nelder-mead` or `composite-model`.
    #[arg(long, default_value = "nelder-mead")]
    method: String,
    /// Evaluation budget (default 20p).
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `mps` or `exact`.
    #[arg(long, default_value = "mps")]
    evaluator: String,
    #[command(flatten)]
    mps: MpsArgs,
    /// Where to write the best angles.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV of `p,nu` rows; the built-in table of best known energies when
    /// omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// `3p`: m/p^η + b, `4p`: m/(p^η + c) + b.
    #[arg(long, default_value = "3p")]
    model: String,
    #[arg(long, default_value_t = 1)]
    p_min: usize,
    #[arg(long, default_value_t = usize::MAX)]
    p_max: usize,
    /// Bootstrap resamples (0 skips the intervals).
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ground-state energy density used in ε = 1 − ν/P*.
    #[arg(long, default_value_t = skqaoa::fit::PARISI)]
    parisi: f64,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV `p,p_pow_neg_eta,eps` for plotting against the rescaled axis.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FiniteArgs {
    /// Comma-separated instance sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// Comma-separated depths.
    #[arg(long, value_delimiter = ',', required = true)]
    p_list: Vec<usize>,
    /// Directory holding `p<p>.json` for every depth.
    #[arg(long)]
    angles_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Angle file (only γ is used).
    #[arg(long)]
    angles: PathBuf,
    /// CSV of the p'×p matrix L (entries like `0.3` or `0.3-0.1i`), or
    /// `worst-case` for |L| = 1 everywhere.
    #[arg(long = "L", default_value = "worst-case")]
    l: String,
    /// Target truncation error.
    #[arg(long, default_value_t = 1e-6)]
    target: f64,
}

#[derive(Debug, Args)]
struct CrosscheckArgs {
    /// Angle file; random angles are drawn when omitted.
    #[arg(long, conflicts_with = "random_p")]
    angles: Option<PathBuf>,
    /// Depth of the random angles.
    #[arg(long)]
    random_p: Option<usize>,
    /// Random angles are uniform in [-1, 1].
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = skqaoa::exact::DEFAULT_P_CAP)]
    p_cap: usize,
    #[command(flatten)]
    mps: MpsArgs,
    /// Comma-separated Fock dimensions for a diagnostics grid.
    #[arg(long, value_delimiter = ',')]
    sweep_d: Vec<usize>,
    /// Comma-separated cutoffs for a diagnostics grid.
    #[arg(long, value_delimiter = ',')]
    sweep_delta: Vec<f64>,
    /// Grid CSV `d,delta,nu_mps,nu_exact,abs_err,rel_err`.
    #[arg(long)]
    grid: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
