//! Monte Carlo studies: averaged LQE quantiles, empirical significance level
//! and empirical power of the LQE Kruskal-Wallis test.
//!
//! Replicate `r` draws its data from streams derived from `(seed, r)` and its
//! permutations from `(seed, n, r)`. Cells that differ only in distribution,
//! shifts or sample size therefore share random numbers (common random
//! numbers), which sharpens comparisons between rows of a table. Replicates
//! run on a rayon pool and are reduced in index order, so reports do not
//! depend on the thread count.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{LqeError, Result};
use crate::lqe::{permuted_quantiles, LqeOptions, PermutationMode};
use crate::rank_statistics::TraceStatistic;
use crate::rng::{derive_seed, TAG_DATA, TAG_PERMUTATION};
use crate::synthetic::{gen_c_sample, Coupling, DependenceSpec, Family};

/// Number of samples in every simulated design.
pub const SAMPLES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Quantiles,
    Significance,
    Power,
}

/// One simulated population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDistribution {
    #[serde(default)]
    pub label: Option<String>,
    pub family: Family,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default)]
    pub shifts: Option<Vec<f64>>,
}

impl NamedDistribution {
    pub fn new(label: &str, family: Family, coupling: Coupling) -> Self {
        NamedDistribution {
            label: Some(label.to_owned()),
            family,
            coupling,
            shifts: None,
        }
    }

    pub fn spec(&self) -> DependenceSpec {
        DependenceSpec {
            family: self.family,
            coupling: self.coupling,
            shifts: self.shifts.clone().unwrap_or_else(|| vec![0.0; SAMPLES]),
        }
    }

    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.spec().label())
    }
}

fn default_permutations() -> usize {
    20
}

fn default_burn_in() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub study: Study,
    pub distributions: Vec<NamedDistribution>,
    pub n_values: Vec<usize>,
    /// Quantile levels for the quantile study, test levels otherwise.
    pub alphas: Vec<f64>,
    pub replications: usize,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; `None` uses every core, `Some(1)` runs single-threaded.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    /// Shift vectors of the power study.
    #[serde(default)]
    pub shift_rows: Vec<Vec<f64>>,
    /// Defaults to per-sample permutation for independent designs and joint
    /// row permutation otherwise.
    #[serde(default)]
    pub permutation_mode: Option<PermutationMode>,
}

impl SimulationConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| LqeError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LqeError::Config(m));
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.permutations == 0 {
            return bad("permutations must be >= 1".into());
        }
        if self.distributions.is_empty() || self.n_values.is_empty() || self.alphas.is_empty() {
            return bad("distributions, n_values and alphas must be non-empty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} outside (0, 1)"));
        }
        if let Some(n) = self.n_values.iter().find(|n| **n <= self.burn_in) {
            return bad(format!("n = {n} must exceed burn_in = {}", self.burn_in));
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        for d in &self.distributions {
            d.spec()
                .validate()
                .map_err(|e| LqeError::Config(format!("{}: {e}", d.name())))?;
        }
        match self.study {
            Study::Quantiles | Study::Significance => {
                if self.shift_rows.iter().flatten().any(|s| *s != 0.0) {
                    return bad("shift_rows are only allowed in the power study".into());
                }
                if self.study == Study::Significance
                    && self.distributions.iter().any(|d| {
                        d.shifts
                            .as_ref()
                            .is_some_and(|s| s.iter().any(|x| *x != 0.0))
                    })
                {
                    return bad("significance study needs zero shifts".into());
                }
            }
            Study::Power => {
                if !self.shift_rows.iter().flatten().any(|s| *s != 0.0) {
                    return bad("power study needs at least one nonzero shift row".into());
                }
                for row in &self.shift_rows {
                    for d in &self.distributions {
                        let spec = DependenceSpec {
                            shifts: row.clone(),
                            ..d.spec()
                        };
                        spec.validate()
                            .map_err(|e| LqeError::Config(format!("{}: {e}", d.name())))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Switches to the published study settings: 500 replications of n = 1000 with
    /// 100 permutations for quantiles; 200 replications, 20 permutations and
    /// n in {30, 50, 80, 100, 150, 200} for level and power.
    pub fn paper_scale(mut self) -> Self {
        match self.study {
            Study::Quantiles => {
                self.replications = 500;
                self.permutations = 100;
                self.n_values = vec![1000];
            }
            Study::Significance | Study::Power => {
                self.replications = 200;
                self.permutations = 20;
                self.n_values = vec![30, 50, 80, 100, 150, 200];
            }
        }
        self
    }

    fn mode_for(&self, spec: &DependenceSpec) -> PermutationMode {
        self.permutation_mode
            .unwrap_or_else(|| PermutationMode::for_independence(spec.is_independent()))
    }
}

/// One table entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dist: String,
    pub shifts: Vec<f64>,
    pub n: usize,
    pub alpha: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Asymptotic quantile of the scaled statistic under independence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceQuantile {
    pub alpha: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub study: Study,
    pub replications: usize,
    pub config: SimulationConfig,
    pub cells: Vec<Cell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<ReferenceQuantile>,
    /// Not serialized, so JSON reports stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// `(c^2 / 12)` times the `alpha`-quantile of chi-squared with `c - 1` degrees of freedom.
pub fn asymptotic_quantile(alpha: f64, c: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || c < 2 {
        return Err(LqeError::domain("need alpha in (0, 1) and c >= 2"));
    }
    let chi = ChiSquared::new((c - 1) as f64).map_err(|e| LqeError::domain(e.to_string()))?;
    let c = c as f64;
    Ok(c * c / 12.0 * chi.inverse_cdf(alpha))
}

struct CellJob {
    dist: String,
    spec: DependenceSpec,
    n: usize,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

fn proportion_and_stderr(hits: &[bool]) -> (f64, f64) {
    let r = hits.len() as f64;
    let p = hits.iter().filter(|h| **h).count() as f64 / r;
    (p, (p * (1.0 - p) / r).sqrt())
}

/// Final statistic and the averaged quantiles at `levels` for replicate `r`.
fn replicate(
    cfg: &SimulationConfig,
    job: &CellJob,
    r: usize,
    levels: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let data_seed = derive_seed(cfg.seed, &[TAG_DATA, r as u64]);
    let perm_seed = derive_seed(cfg.seed, &[TAG_PERMUTATION, job.n as u64, r as u64]);
    let data = gen_c_sample(&job.spec, job.n, data_seed)?;
    let opts = LqeOptions {
        permutations: cfg.permutations,
        burn_in: cfg.burn_in,
        seed: perm_seed,
        mode: cfg.mode_for(&job.spec),
    };
    let stat = TraceStatistic::ScaledKruskalWallis;
    let qs = permuted_quantiles(&data, &stat, levels, &opts)?;
    let final_value = stat.evaluate_batch(&data)?;
    Ok((final_value, qs.into_iter().map(|q| q.averaged).collect()))
}

fn jobs(cfg: &SimulationConfig) -> Vec<CellJob> {
    let mut out = Vec::new();
    for d in &cfg.distributions {
        let rows = match cfg.study {
            Study::Power => cfg.shift_rows.clone(),
            _ => vec![d.spec().shifts],
        };
        for shifts in rows {
            for &n in &cfg.n_values {
                out.push(CellJob {
                    dist: d.name(),
                    spec: DependenceSpec {
                        shifts: shifts.clone(),
                        ..d.spec()
                    },
                    n,
                });
            }
        }
    }
    out
}

fn run_cells(cfg: &SimulationConfig) -> Result<Vec<Cell>> {
    let levels: Vec<f64> = match cfg.study {
        Study::Quantiles => cfg.alphas.clone(),
        Study::Significance | Study::Power => cfg.alphas.iter().map(|a| 1.0 - a).collect(),
    };
    let mut cells = Vec::new();
    for job in jobs(cfg) {
        let results: Vec<(f64, Vec<f64>)> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| replicate(cfg, &job, r, &levels))
            .collect::<Result<_>>()?;
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            let (value, stderr) = match cfg.study {
                Study::Quantiles => {
                    let qs: Vec<f64> = results.iter().map(|(_, q)| q[ai]).collect();
                    mean_and_stderr(&qs)
                }
                _ => {
                    let hits: Vec<bool> = results.iter().map(|(s, q)| *s > q[ai]).collect();
                    proportion_and_stderr(&hits)
                }
            };
            cells.push(Cell {
                dist: job.dist.clone(),
                shifts: job.spec.shifts.clone(),
                n: job.n,
                alpha,
                value,
                stderr,
            });
        }
    }
    Ok(cells)
}

fn run_checked(cfg: &SimulationConfig, study: Study) -> Result<SimulationReport> {
    if cfg.study != study {
        return Err(LqeError::Config(format!(
            "config declares study {:?}, expected {study:?}",
            cfg.study
        )));
    }
    cfg.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| LqeError::Config(e.to_string()))?;
    let cells = pool.install(|| run_cells(cfg))?;
    let reference = match study {
        Study::Quantiles => cfg
            .alphas
            .iter()
            .map(|&alpha| {
                Ok(ReferenceQuantile {
                    alpha,
                    value: asymptotic_quantile(alpha, SAMPLES)?,
                })
            })
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    Ok(SimulationReport {
        study,
        replications: cfg.replications,
        config: cfg.clone(),
        cells,
        reference,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Replicate-averaged LQE quantiles of the scaled Kruskal-Wallis statistic,
/// with the asymptotic reference quantiles alongside.
pub fn run_quantile_study(cfg: &SimulationConfig) -> Result<SimulationReport> {
    run_checked(cfg, Study::Quantiles)
}

/// Fraction of null replicates in which the LQE test rejects.
pub fn run_significance_study(cfg: &SimulationConfig) -> Result<SimulationReport> {
    run_checked(cfg, Study::Significance)
}

/// Fraction of replicates rejecting, per shift vector.
pub fn run_power_study(cfg: &SimulationConfig) -> Result<SimulationReport> {
    run_checked(cfg, Study::Power)
}

pub fn run_study(cfg: &SimulationConfig) -> Result<SimulationReport> {
    run_checked(cfg, cfg.study)
}

fn fmt_shifts(s: &[f64]) -> String {
    s.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl SimulationReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| LqeError::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| LqeError::Data {
            line: None,
            message: e.to_string(),
        })
    }

    pub fn cell(&self, dist: &str, shifts: &[f64], n: usize, alpha: f64) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.dist == dist && c.shifts == shifts && c.n == n && c.alpha == alpha)
    }

    /// Cells of one table row (fixed distribution, shifts and level), in `n_values` order.
    pub fn row(&self, dist: &str, shifts: &[f64], alpha: f64) -> Vec<&Cell> {
        self.config
            .n_values
            .iter()
            .filter_map(|&n| self.cell(dist, shifts, n, alpha))
            .collect()
    }

    /// Aligned text tables laid out like the printed ones: levels as columns
    /// for quantiles, sample sizes as columns for level and power.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let ns = &self.config.n_values;
        let pct = |a: f64| format!("{}%", (a * 1000.0).round() / 10.0);
        match self.study {
            Study::Quantiles => {
                let _ = writeln!(out, "Averaged empirical logarithmic quantiles");
                for &n in ns {
                    let _ = write!(out, "\nn = {n}\n{:<32}", "distribution / level");
                    for &a in &self.config.alphas {
                        let _ = write!(out, "{:>12}", pct(1.0 - a));
                    }
                    out.push('\n');
                    for d in &self.config.distributions {
                        let name = d.name();
                        let _ = write!(out, "{name:<32}");
                        for &a in &self.config.alphas {
                            let shifts = d.spec().shifts;
                            match self.cell(&name, &shifts, n, a) {
                                Some(c) => {
                                    let _ = write!(out, "{:>12.5}", c.value);
                                }
                                None => {
                                    let _ = write!(out, "{:>12}", "-");
                                }
                            }
                        }
                        out.push('\n');
                    }
                    let _ = write!(out, "{:<32}", "asymptotic (c^2/12) chi2(c-1)");
                    for r in &self.reference {
                        let _ = write!(out, "{:>12.6}", r.value);
                    }
                    out.push('\n');
                }
            }
            Study::Significance | Study::Power => {
                let title = if self.study == Study::Power {
                    "Power"
                } else {
                    "Level of significance"
                };
                for d in &self.config.distributions {
                    let name = d.name();
                    let rows = match self.study {
                        Study::Power => self.config.shift_rows.clone(),
                        _ => vec![d.spec().shifts],
                    };
                    for &a in &self.config.alphas {
                        let _ = writeln!(out, "\n{title}: {name}, alpha = {}", pct(a));
                        let _ = write!(out, "{:<20}", "shifts");
                        for n in ns {
                            let _ = write!(out, "{:>9}", format!("n={n}"));
                        }
                        out.push('\n');
                        for shifts in &rows {
                            let _ = write!(out, "{:<20}", fmt_shifts(shifts));
                            for c in self.row(&name, shifts, a) {
                                let _ = write!(out, "{:>9.3}", c.value);
                            }
                            out.push('\n');
                        }
                    }
                }
            }
        }
        let _ = writeln!(
            out,
            "\n{} replications, {} permutations, burn-in {}, seed {}",
            self.replications, self.config.permutations, self.config.burn_in, self.config.seed
        );
        out
    }
}
