//! Command line front end: every analysis writes a CSV with a `#` header
//! recording the settings that produced it.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tailmix::{CopulaFamily, Dof, SamplingMode};

mod commands;
mod input;

#[derive(Parser)]
#[command(
    name = "tailmix",
    version,
    about = "Tail dependence of correlation mixtures of elliptical copulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// λ(u) of a mixture over a logarithmic grid of u.
    TailCurve(TailCurveArgs),
    /// Sliding-window η estimates from a computed tail curve.
    EtaSweep(EtaSweepArgs),
    /// Bias of static t-copula fits under SCAR correlation.
    BiasStudy(BiasStudyArgs),
    /// Static t-copula fit of a two-column data file.
    Fit(FitArgs),
    /// Sample pairs from a mixture copula.
    Simulate(SimulateArgs),
    /// λ(u) and λ of a mixture at given levels.
    Lambda(LambdaArgs),
}

#[derive(Args)]
struct Common {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; never changes the output.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TailCurveArgs {
    /// `gauss` or `t:<nu>`.
    #[arg(long)]
    family: CopulaFamily,
    /// Mixing law, e.g. `point:0.5`, `uniform:0,1`, `scar:0.97,0.2,mean=0.5`, `empirical:<path>`.
    #[arg(long)]
    mix: String,
    /// `<u_max>:<u_min>:<points per decade>`.
    #[arg(long, default_value = "1e-1:1e-10:50")]
    grid: GridSpec,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EtaSweepArgs {
    #[arg(long)]
    family: CopulaFamily,
    #[arg(long)]
    mix: String,
    /// Curve grid, `<u_max>:<u_min>:<points per decade>`.
    #[arg(long, default_value = "1e-3:1e-13:100")]
    grid: GridSpec,
    /// Windows `[10^(-k-3), 10^(-k)]` for `k` in `<start>:<end>:<step>`.
    #[arg(long, default_value = "3:10:0.01")]
    windows: WindowSpec,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BiasStudyArgs {
    /// True degrees of freedom, comma separated (`inf` for Gaussian).
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,inf")]
    nu: Vec<Dof>,
    /// SCAR volatilities, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2")]
    sigma: Vec<f64>,
    #[arg(long, default_value_t = 0.97)]
    beta: f64,
    /// Stationary mean correlation.
    #[arg(long, default_value_t = 0.5)]
    rho_bar: f64,
    /// Observations per simulated data set.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Replicates per cell.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Level at which λ(u) is compared.
    #[arg(long, default_value_t = 0.01)]
    u: f64,
    /// `path` (one SCAR path per data set) or `iid`.
    #[arg(long, default_value = "path")]
    mode: SamplingMode,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// One row per cell with true values and diagnostics.
    #[arg(long)]
    long: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FitArgs {
    /// Two-column CSV: raw returns, or `u,v` pseudo-observations when the
    /// header is `u,v`.
    input: PathBuf,
    /// Observations per year (`daily` = 250, `monthly` = 12).
    #[arg(long, default_value = "daily")]
    frequency: Frequency,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    family: CopulaFamily,
    #[arg(long)]
    mix: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "iid")]
    mode: SamplingMode,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct LambdaArgs {
    #[arg(long)]
    family: CopulaFamily,
    #[arg(long)]
    mix: String,
    /// Levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    u: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug)]
struct GridSpec {
    u_max: f64,
    u_min: f64,
    per_decade: usize,
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("grid must be <u_max>:<u_min>:<points per decade>, got '{s}'");
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(Self {
            u_max: parts[0].parse().map_err(|_| bad())?,
            u_min: parts[1].parse().map_err(|_| bad())?,
            per_decade: parts[2].parse().map_err(|_| bad())?,
        })
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:e}:{:e}:{}", self.u_max, self.u_min, self.per_decade)
    }
}

#[derive(Clone, Copy, Debug)]
struct WindowSpec {
    start: f64,
    end: f64,
    step: f64,
}

impl std::str::FromStr for WindowSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("windows must be <start>:<end>:<step>, got '{s}'");
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(Self {
            start: parts[0].parse().map_err(|_| bad())?,
            end: parts[1].parse().map_err(|_| bad())?,
            step: parts[2].parse().map_err(|_| bad())?,
        })
    }
}

impl std::fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.step)
    }
}

#[derive(Clone, Copy, Debug)]
struct Frequency(f64);

impl std::str::FromStr for Frequency {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "daily" => Ok(Self(tailmix::fit::DAILY)),
            "monthly" => Ok(Self(tailmix::fit::MONTHLY)),
            _ => s
                .parse()
                .map(Self)
                .map_err(|_| format!("frequency must be 'daily', 'monthly' or a number, got '{s}'")),
        }
    }
}

fn run_with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T>
where
    T: Send,
{
    match threads {
        None => Ok(f()),
        Some(0) => anyhow::bail!("--threads must be at least 1"),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building thread pool")?;
            Ok(pool.install(f))
        }
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::TailCurve(a) => {
            let threads = a.common.threads;
            run_with_threads(threads, || commands::tail_curve(&a))?
        }
        Command::EtaSweep(a) => {
            let threads = a.common.threads;
            run_with_threads(threads, || commands::eta_sweep(&a))?
        }
        Command::BiasStudy(a) => {
            let threads = a.common.threads;
            run_with_threads(threads, || commands::bias_study(&a))?
        }
        Command::Fit(a) => {
            let threads = a.common.threads;
            run_with_threads(threads, || commands::fit(&a))?
        }
        Command::Simulate(a) => {
            let threads = a.common.threads;
            run_with_threads(threads, || commands::simulate(&a))?
        }
        Command::Lambda(a) => {
            let threads = a.common.threads;
            run_with_threads(threads, || commands::lambda(&a))?
        }
    }
}
