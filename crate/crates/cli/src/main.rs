//! `cutlab`: spectra, WKB tables, phase portraits, cut-off profiles and Monte Carlo checks for
//! the diffusion `dX = -V'(X) dt + √(2ε) dB` with `V(x) = |x|^{γ+1}/(γ+1)`.
//!
//! Exit status: 0 on success, 1 for invalid configuration, 2 for numerical or I/O failure.

mod cache;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use cache::EigenCache;
use commands::Context;
use config::{put, Layer, ParamSpec, Resolved};
use output::Writer;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] cutlab::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cutlab", version, about = "Cut-off analysis for monomial-potential Langevin diffusions")]
struct Cli {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for the emitted files [default: .]
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Eigensystem cache directory; also read from CUTLAB_CACHE_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues, parities and eigenfunctions of -L_ε.
    Spectrum(SpectrumArgs),
    /// Exact WKB coefficient polynomials A_{n,i}(γ).
    WkbTable(WkbArgs),
    /// Angle trajectories (t, θ, log r) of the eigenfunction equation.
    PhasePortrait(PhaseArgs),
    /// Distance along t_ε + r·w_ε for every ε of the grid.
    CutoffProfile(ProfileArgs),
    /// Mixing times τ(η) next to t_ε and w_ε.
    MixingTime(MixingArgs),
    /// Cut-off regime verdict as JSON.
    Regime(RegimeArgs),
    /// Monte Carlo distance against the spectral distance.
    McValidate(McArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SpectrumArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    n_modes: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
}

#[derive(Debug, Args)]
struct WkbArgs {
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct PhaseArgs {
    #[arg(long)]
    gamma: Option<f64>,
    /// Mode whose eigenvalue forces the equation.
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated initial angles at the turning point.
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Rows kept per trajectory.
    #[arg(long)]
    rows: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct ProblemArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated, strictly decreasing, in (0, 1] [default: 1 to 1e-4, 4 per decade]
    #[arg(long)]
    epsilons: Option<String>,
    /// auto, scaling or unit.
    #[arg(long)]
    delta_rule: Option<String>,
}

impl ProblemArgs {
    fn layer(&self, l: &mut Layer) {
        put(l, "gamma", &self.gamma);
        put(l, "x0", &self.x0);
        put(l, "n", &self.n);
        put(l, "epsilons", &self.epsilons);
        put(l, "delta_rule", &self.delta_rule);
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct RArgs {
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    r_points: Option<usize>,
}

impl RArgs {
    fn layer(&self, l: &mut Layer) {
        put(l, "r_min", &self.r_min);
        put(l, "r_max", &self.r_max);
        put(l, "r_points", &self.r_points);
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct ProfileArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    r: RArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct MixingArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated thresholds η.
    #[arg(long)]
    etas: Option<String>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct RegimeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    etas: Option<String>,
    #[command(flatten)]
    r: RArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct McArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated observation times.
    #[arg(long)]
    times: Option<String>,
}

type Runner = fn(&Resolved, &mut Context) -> Result<(), CliError>;

const ALL_SPECS: [ParamSpec; 7] = [
    commands::SPECTRUM,
    commands::WKB_TABLE,
    commands::PHASE_PORTRAIT,
    commands::CUTOFF_PROFILE,
    commands::MIXING_TIME,
    commands::REGIME,
    commands::MC_VALIDATE,
];

impl Command {
    fn plan(&self) -> (&'static str, ParamSpec, Runner, Layer) {
        let mut l = Layer::new();
        match self {
            Command::Spectrum(a) => {
                put(&mut l, "gamma", &a.gamma);
                put(&mut l, "n_modes", &a.n_modes);
                put(&mut l, "epsilon", &a.epsilon);
                put(&mut l, "half_width", &a.half_width);
                put(&mut l, "n_points", &a.n_points);
                ("spectrum", commands::SPECTRUM, commands::spectrum, l)
            }
            Command::WkbTable(a) => {
                put(&mut l, "n_max", &a.n_max);
                ("wkb-table", commands::WKB_TABLE, commands::wkb_table, l)
            }
            Command::PhasePortrait(a) => {
                put(&mut l, "gamma", &a.gamma);
                put(&mut l, "k", &a.k);
                put(&mut l, "theta0", &a.theta0);
                put(&mut l, "horizon", &a.horizon);
                put(&mut l, "step", &a.step);
                put(&mut l, "rows", &a.rows);
                ("phase-portrait", commands::PHASE_PORTRAIT, commands::phase_portrait, l)
            }
            Command::CutoffProfile(a) => {
                a.problem.layer(&mut l);
                a.r.layer(&mut l);
                ("cutoff-profile", commands::CUTOFF_PROFILE, commands::cutoff_profile, l)
            }
            Command::MixingTime(a) => {
                a.problem.layer(&mut l);
                put(&mut l, "etas", &a.etas);
                ("mixing-time", commands::MIXING_TIME, commands::mixing_time, l)
            }
            Command::Regime(a) => {
                a.problem.layer(&mut l);
                put(&mut l, "etas", &a.etas);
                a.r.layer(&mut l);
                ("regime", commands::REGIME, commands::regime, l)
            }
            Command::McValidate(a) => {
                put(&mut l, "gamma", &a.gamma);
                put(&mut l, "epsilon", &a.epsilon);
                put(&mut l, "x0", &a.x0);
                put(&mut l, "n", &a.n);
                put(&mut l, "n_paths", &a.n_paths);
                put(&mut l, "step", &a.step);
                put(&mut l, "seed", &a.seed);
                put(&mut l, "times", &a.times);
                ("mc-validate", commands::MC_VALIDATE, commands::mc_validate, l)
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, spec, runner, mut flags) = cli.command.plan();
    put(&mut flags, "output_dir", &cli.output_dir.as_ref().map(|p| p.display()));
    put(&mut flags, "cache_dir", &cli.cache_dir.as_ref().map(|p| p.display()));
    put(&mut flags, "threads", &cli.threads);
    let file = match &cli.config {
        Some(path) => config::read_config_file(path)?,
        None => Layer::new(),
    };
    let known: Vec<&str> = ALL_SPECS.iter().flat_map(|s| s.iter().map(|(k, _)| *k)).collect();
    let env_cache = std::env::var(config::CACHE_ENV).ok().filter(|s| !s.is_empty());
    let cfg = Resolved::merge(name, spec, &file, &flags, env_cache, &known)?;

    let threads: usize = cfg.get("threads")?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    }
    let mut ctx = Context {
        cache: EigenCache::new(cfg.cache_dir()),
        out: Writer::new(&cfg.output_dir())?,
    };
    runner(&cfg, &mut ctx)?;
    for path in ctx.out.written() {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
