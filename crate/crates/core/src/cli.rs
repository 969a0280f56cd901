//! The `lqe` command-line front end.
//!
//! Exit codes: 0 when the test fails to reject (and for every other
//! successful command), 3 when it rejects, 1 on usage or configuration
//! errors, 2 on data errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dataset::CSampleDataset;
use crate::error::{LqeError, Result};
use crate::lqe::{
    asclt_diagnostic_seeded, lqe_test, permuted_quantiles, LqeOptions, LqeQuantile,
    PermutationMode, TestReport,
};
use crate::rank_statistics::TraceStatistic;
use crate::sim_harness::SimulationConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_REJECT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lqe",
    version,
    about = "Logarithmic quantile estimation for the c-sample Kruskal-Wallis test"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test equality of the sample distributions in a CSV file (one column per sample).
    Test {
        /// CSV file with a header row and one row per observation vector
        input: PathBuf,
        /// Significance level
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dependence: Dependence,
    },
    /// Print permutation-averaged logarithmic quantiles of the scaled statistic.
    Quantile {
        input: PathBuf,
        /// Quantile level; repeat for several levels
        #[arg(long = "alpha", default_values_t = [0.99, 0.95, 0.9])]
        alphas: Vec<f64>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dependence: Dependence,
    },
    /// Run a simulation study described by a TOML config file.
    Simulate {
        config: PathBuf,
        /// Write the JSON report here as well
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace replications, sample sizes and permutations with the published settings
        #[arg(long)]
        paper_scale: bool,
        /// Override the number of replications
        #[arg(long)]
        replications: Option<usize>,
        /// Override the sample sizes
        #[arg(long = "n", value_delimiter = ',')]
        n_values: Option<Vec<usize>>,
        /// Override the levels
        #[arg(long = "alpha", value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Override the number of permutations
        #[arg(long)]
        permutations: Option<usize>,
        /// Override the number of leading prefix statistics dropped
        #[arg(long)]
        burn_in: Option<usize>,
        /// Override the master seed
        #[arg(long, env = "LQE_SEED")]
        seed: Option<u64>,
        /// Worker threads (1 runs single-threaded)
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        dependence: Dependence,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Kolmogorov distance of the log-averaged normalized partial sums from N(0, 1).
    Diagnose {
        /// Number of standard normal draws
        #[arg(long = "n", default_value_t = 10_000)]
        count: usize,
        #[arg(long, env = "LQE_SEED")]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Random permutations averaged per quantile
    #[arg(long, default_value_t = 20)]
    permutations: usize,
    /// Leading prefix statistics dropped before averaging
    #[arg(long, default_value_t = 5)]
    burn_in: usize,
    /// Master seed; falls back to LQE_SEED, then to a random seed that is reported
    #[arg(long, env = "LQE_SEED")]
    seed: Option<u64>,
    /// Worker threads for the permutations
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct Dependence {
    /// Samples may be dependent: permute whole rows (default for data files)
    #[arg(long)]
    dependent: bool,
    /// Samples are independent: permute each column separately
    #[arg(long)]
    independent: bool,
}

impl Dependence {
    fn mode(&self) -> Option<PermutationMode> {
        if self.independent {
            Some(PermutationMode::PerSample)
        } else if self.dependent {
            Some(PermutationMode::JointRows)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "lqe: {e}");
            match e {
                LqeError::Data { .. } => EXIT_DATA,
                _ => EXIT_USAGE,
            }
        }
    }
}

pub fn main() -> i32 {
    run(
        std::env::args_os(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    )
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Test {
            input,
            alpha,
            common,
            dependence,
        } => {
            let data = read_data(&input, common.burn_in)?;
            let opts = options(&common, &dependence, err)?;
            let report = with_threads(common.threads, || lqe_test(&data, alpha, &opts))??;
            match common.format {
                Format::Json => writeln!(out, "{}", to_json(&report)?)?,
                Format::Table => write!(out, "{}", render_test(&report))?,
            }
            Ok(if report.reject { EXIT_REJECT } else { EXIT_OK })
        }
        Command::Quantile {
            input,
            alphas,
            common,
            dependence,
        } => {
            let data = read_data(&input, common.burn_in)?;
            let opts = options(&common, &dependence, err)?;
            let qs = with_threads(common.threads, || {
                permuted_quantiles(&data, &TraceStatistic::ScaledKruskalWallis, &alphas, &opts)
            })??;
            match common.format {
                Format::Json => writeln!(
                    out,
                    "{}",
                    to_json(&QuantileListing {
                        seed: opts.seed,
                        quantiles: &qs
                    })?
                )?,
                Format::Table => {
                    writeln!(out, "seed {}", opts.seed)?;
                    writeln!(
                        out,
                        "{:>8}  {:>12}  {:>12}  {:>12}",
                        "level", "averaged", "min", "max"
                    )?;
                    for q in &qs {
                        let (lo, hi) = min_max(&q.per_permutation);
                        writeln!(
                            out,
                            "{:>8}  {:>12.6}  {:>12.6}  {:>12.6}",
                            q.alpha, q.averaged, lo, hi
                        )?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Simulate {
            config,
            out: out_path,
            paper_scale,
            replications,
            n_values,
            alphas,
            permutations,
            burn_in,
            seed,
            threads,
            dependence,
            format,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| LqeError::Config(format!("{}: {e}", config.display())))?;
            let mut cfg = SimulationConfig::from_toml_str(&text)?;
            if paper_scale {
                cfg = cfg.paper_scale();
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            if let Some(ns) = n_values {
                cfg.n_values = ns;
            }
            if let Some(a) = alphas {
                cfg.alphas = a;
            }
            if let Some(p) = permutations {
                cfg.permutations = p;
            }
            if let Some(b) = burn_in {
                cfg.burn_in = b;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if threads.is_some() {
                cfg.threads = threads;
            }
            if let Some(m) = dependence.mode() {
                cfg.permutation_mode = Some(m);
            }
            let report = crate::sim_harness::run_study(&cfg)?;
            let json = report.to_json()?;
            if let Some(path) = out_path {
                std::fs::write(&path, format!("{json}\n"))?;
            }
            match format {
                Format::Json => writeln!(out, "{json}")?,
                Format::Table => write!(out, "{}", report.to_table())?,
            }
            writeln!(err, "wall time {:.2} s", report.wall_time_secs)?;
            Ok(EXIT_OK)
        }
        Command::Diagnose {
            count,
            seed,
            format,
        } => {
            let seed = resolve_seed(seed, err)?;
            let distance = asclt_diagnostic_seeded(count, seed)?;
            match format {
                Format::Json => writeln!(
                    out,
                    "{}",
                    serde_json::json!({ "n": count, "seed": seed, "kolmogorov_distance": distance })
                )?,
                Format::Table => writeln!(
                    out,
                    "n = {count}  seed = {seed}  kolmogorov distance = {distance:.6}"
                )?,
            }
            Ok(EXIT_OK)
        }
    }
}

#[derive(Serialize)]
struct QuantileListing<'a> {
    seed: u64,
    quantiles: &'a [LqeQuantile],
}

fn read_data(path: &Path, burn_in: usize) -> Result<CSampleDataset> {
    let file = File::open(path).map_err(|e| LqeError::Data {
        line: None,
        message: format!("{}: {e}", path.display()),
    })?;
    let (_, data) = CSampleDataset::from_csv_reader(file)?;
    if data.n() < burn_in + 2 {
        return Err(LqeError::Data {
            // header plus the data rows
            line: Some(data.n() + 1),
            message: format!(
                "{} rows; burn-in {burn_in} needs at least {}",
                data.n(),
                burn_in + 2
            ),
        });
    }
    Ok(data)
}

fn resolve_seed(seed: Option<u64>, err: &mut dyn Write) -> Result<u64> {
    Ok(match seed {
        Some(s) => s,
        None => {
            let s = rand::random::<u64>();
            writeln!(err, "using random seed {s}")?;
            s
        }
    })
}

fn options(common: &Common, dependence: &Dependence, err: &mut dyn Write) -> Result<LqeOptions> {
    Ok(LqeOptions {
        permutations: common.permutations,
        burn_in: common.burn_in,
        seed: resolve_seed(common.seed, err)?,
        mode: dependence.mode().unwrap_or_default(),
    })
}

fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == Some(0) {
        return Err(LqeError::Config("threads must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| LqeError::Config(e.to_string()))?;
    Ok(pool.install(f))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| LqeError::Io(e.to_string()))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn render_test(r: &TestReport) -> String {
    let decision = if r.reject {
        "reject H0"
    } else {
        "fail to reject H0"
    };
    let mode = match r.mode {
        PermutationMode::JointRows => "joint rows",
        PermutationMode::PerSample => "per sample",
    };
    format!(
        "scaled Kruskal-Wallis  {:.6}\n\
         critical value t({})  {:.6}\n\
         decision               {decision}\n\
         interval               [{:.6}, {:.6}]\n\
         alpha {}  permutations {}  burn-in {}  seed {}  permutation {mode}\n",
        r.statistic_value,
        1.0 - r.alpha,
        r.quantile.averaged,
        r.interval.lower,
        r.interval.upper,
        r.alpha,
        r.permutations,
        r.burn_in,
        r.seed,
    )
}
