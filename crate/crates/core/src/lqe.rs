//! Logarithmic quantile estimation.
//!
//! A prefix trace `T_1..T_n` is turned into the log-averaged empirical
//! distribution `G(t) = (1/C) sum_{k>B} (1/k) I(T_k <= t)`, where the first
//! `B` terms are dropped (burn-in) and `C` normalizes the weights. Quantiles
//! follow
//!
//! ```text
//! t_alpha = max { t : (1/C) sum_{k>B} (1/k) I(T_k < t) <= alpha }
//! ```
//!
//! with the maximum taken over the observed trace values. Over all reals the
//! set is unbounded above once `alpha` exceeds the strict CDF of the largest
//! value, so the support is the only finite reading; the result is always an
//! observed statistic value.
//!
//! Because the trace depends on row order, quantiles are averaged over random
//! permutations of the rows (or of each sample independently).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::CSampleDataset;
use crate::error::{LqeError, Result};
use crate::rank_engine::RankAccumulator;
use crate::rank_statistics::{trace_from_indices, PrefixTrace, TraceStatistic};
use crate::rng::{stream, TAG_DIAGNOSTIC, TAG_PERMUTATION};

/// Weighted step distribution built from a prefix trace with log weights `1/k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEmpiricalDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
    // cumulative[j] = sum of weights[..j]; len = support.len() + 1
    cumulative: Vec<f64>,
    burn_in: usize,
}

impl LogEmpiricalDistribution {
    /// Weights `1/k` for `k = burn_in + 1 ..= n`, merged over exactly equal values.
    pub fn build(trace: &PrefixTrace, burn_in: usize) -> Result<Self> {
        let n = trace.len();
        if burn_in >= n {
            return Err(LqeError::domain(format!(
                "burn-in {burn_in} leaves no terms of a trace of length {n}"
            )));
        }
        let mut points: Vec<(f64, f64)> = trace.values()[burn_in..]
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, 1.0 / (burn_in + i + 1) as f64))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut support: Vec<f64> = Vec::with_capacity(points.len());
        let mut weights: Vec<f64> = Vec::with_capacity(points.len());
        for (v, w) in points {
            match support.last() {
                Some(last) if last.total_cmp(&v).is_eq() => *weights.last_mut().unwrap() += w,
                _ => {
                    support.push(v);
                    weights.push(w);
                }
            }
        }
        let mut cumulative = Vec::with_capacity(weights.len() + 1);
        let mut acc = 0.0;
        cumulative.push(acc);
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(LogEmpiricalDistribution {
            support,
            weights,
            cumulative,
            burn_in,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    /// `C`, the total weight `sum_{k>B} 1/k`.
    pub fn normalizer(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// `G(t)`; with `strict` the indicator is `T_k < t` instead of `T_k <= t`.
    pub fn cdf(&self, t: f64, strict: bool) -> f64 {
        let below = if strict {
            self.support.partition_point(|v| *v < t)
        } else {
            self.support.partition_point(|v| *v <= t)
        };
        self.cumulative[below] / self.normalizer()
    }

    /// Empirical logarithmic `alpha`-quantile (see the module docs).
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        // strict CDF at support point j is cumulative[j] / C: nondecreasing, 0 at j = 0
        let c = self.normalizer();
        let count = self.cumulative[..self.support.len()].partition_point(|&w| w / c <= alpha);
        Ok(self.support[count - 1])
    }
}

/// Alias for [`LogEmpiricalDistribution::build`].
pub fn build_distribution(trace: &PrefixTrace, burn_in: usize) -> Result<LogEmpiricalDistribution> {
    LogEmpiricalDistribution::build(trace, burn_in)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(LqeError::domain(format!(
            "level {alpha} must lie in (0, 1)"
        )))
    }
}

/// How observations are reordered between prefix sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMode {
    /// Permute whole rows; keeps the dependence inside each vector.
    #[default]
    JointRows,
    /// Permute each sample independently; for independent samples only.
    PerSample,
}

impl PermutationMode {
    /// `PerSample` for declared-independent samples, `JointRows` otherwise.
    pub fn for_independence(independent: bool) -> Self {
        if independent {
            PermutationMode::PerSample
        } else {
            PermutationMode::JointRows
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqeOptions {
    pub permutations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub mode: PermutationMode,
}

impl Default for LqeOptions {
    fn default() -> Self {
        LqeOptions {
            permutations: 20,
            burn_in: 5,
            seed: 0,
            mode: PermutationMode::JointRows,
        }
    }
}

/// Permutation-averaged logarithmic quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqeQuantile {
    pub alpha: f64,
    pub per_permutation: Vec<f64>,
    pub averaged: f64,
}

impl LqeQuantile {
    fn from_values(alpha: f64, per_permutation: Vec<f64>) -> Self {
        let first = per_permutation[0];
        let p = per_permutation.len() as f64;
        let (min, max) = per_permutation
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        // shifted mean: exact when all permutations agree
        let mean = first + per_permutation.iter().map(|v| v - first).sum::<f64>() / p;
        LqeQuantile {
            alpha,
            per_permutation,
            averaged: mean.clamp(min, max),
        }
    }
}

fn permuted_rows(
    base: &[usize],
    n: usize,
    c: usize,
    index: usize,
    opts: &LqeOptions,
) -> Vec<usize> {
    match opts.mode {
        PermutationMode::JointRows => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream(opts.seed, &[TAG_PERMUTATION, index as u64]));
            order
                .iter()
                .flat_map(|&i| base[i * c..(i + 1) * c].iter().copied())
                .collect()
        }
        PermutationMode::PerSample => {
            let mut rows = vec![0; n * c];
            for j in 0..c {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut stream(
                    opts.seed,
                    &[TAG_PERMUTATION, index as u64, j as u64],
                ));
                for (i, &src) in order.iter().enumerate() {
                    rows[i * c + j] = base[src * c + j];
                }
            }
            rows
        }
    }
}

fn validate_options(data: &CSampleDataset, opts: &LqeOptions) -> Result<()> {
    if opts.permutations == 0 {
        return Err(LqeError::domain("need at least one permutation"));
    }
    if opts.burn_in >= data.n() {
        return Err(LqeError::domain(format!(
            "burn-in {} needs more than {} rows",
            opts.burn_in,
            data.n()
        )));
    }
    Ok(())
}

/// Permutation-averaged quantiles at several levels from one set of sweeps.
///
/// Permutation `i` uses a stream derived from `(seed, i)`, and results are
/// combined in permutation order, so the output does not depend on the
/// number of worker threads.
pub fn permuted_quantiles(
    data: &CSampleDataset,
    statistic: &TraceStatistic,
    alphas: &[f64],
    opts: &LqeOptions,
) -> Result<Vec<LqeQuantile>> {
    validate_options(data, opts)?;
    alphas.iter().try_for_each(|&a| check_alpha(a))?;
    let template = RankAccumulator::for_dataset(data);
    let base = template.domain().compress(data)?;
    let (n, c) = (data.n(), data.c());

    let per_perm: Vec<Vec<f64>> = (0..opts.permutations)
        .into_par_iter()
        .map(|i| {
            let rows = permuted_rows(&base, n, c, i, opts);
            let mut acc = template.clone();
            let trace = trace_from_indices(&mut acc, &rows, statistic)?;
            let dist = LogEmpiricalDistribution::build(&trace, opts.burn_in)?;
            alphas.iter().map(|&a| dist.quantile(a)).collect()
        })
        .collect::<Result<_>>()?;

    Ok(alphas
        .iter()
        .enumerate()
        .map(|(ai, &alpha)| {
            LqeQuantile::from_values(alpha, per_perm.iter().map(|q| q[ai]).collect())
        })
        .collect())
}

pub fn permuted_quantile(
    data: &CSampleDataset,
    statistic: &TraceStatistic,
    alpha: f64,
    opts: &LqeOptions,
) -> Result<LqeQuantile> {
    Ok(permuted_quantiles(data, statistic, &[alpha], opts)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomInterval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// Statistic on the full sample.
    pub statistic_value: f64,
    /// Averaged `(1 - alpha)`-quantile, the critical value.
    pub quantile: LqeQuantile,
    /// Averaged `alpha`-quantile, used for the interval.
    pub lower_quantile: LqeQuantile,
    pub reject: bool,
    /// `[Q - t_{1-alpha}, Q - t_alpha]`
    pub interval: RandomInterval,
    pub alpha: f64,
    pub permutations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub mode: PermutationMode,
}

/// Rejects when the full-sample statistic exceeds the permutation-averaged
/// `(1 - alpha)` logarithmic quantile.
pub fn lqe_test_with(
    data: &CSampleDataset,
    statistic: &TraceStatistic,
    alpha: f64,
    opts: &LqeOptions,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let mut qs = permuted_quantiles(data, statistic, &[1.0 - alpha, alpha], opts)?;
    let lower_quantile = qs.pop().unwrap();
    let quantile = qs.pop().unwrap();
    let statistic_value = statistic.evaluate_batch(data)?;
    Ok(TestReport {
        statistic_value,
        reject: statistic_value > quantile.averaged,
        interval: RandomInterval {
            lower: statistic_value - quantile.averaged,
            upper: statistic_value - lower_quantile.averaged,
        },
        quantile,
        lower_quantile,
        alpha,
        permutations: opts.permutations,
        burn_in: opts.burn_in,
        seed: opts.seed,
        mode: opts.mode,
    })
}

/// The c-sample test on the scaled Kruskal-Wallis statistic.
pub fn lqe_test(data: &CSampleDataset, alpha: f64, opts: &LqeOptions) -> Result<TestReport> {
    lqe_test_with(data, &TraceStatistic::ScaledKruskalWallis, alpha, opts)
}

/// Kolmogorov distance between the log-averaged distribution of `S_k / sqrt(k)`
/// (no burn-in) and the standard normal CDF, checked on both sides of every
/// support point.
pub fn asclt_diagnostic(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(LqeError::domain("diagnostic needs at least one draw"));
    }
    let mut sum = 0.0;
    let normalized: Vec<f64> = sample
        .iter()
        .enumerate()
        .map(|(i, x)| {
            sum += x;
            sum / ((i + 1) as f64).sqrt()
        })
        .collect();
    let dist = LogEmpiricalDistribution::build(&PrefixTrace::new(normalized)?, 0)?;
    let phi = Normal::standard();
    let c = dist.normalizer();
    Ok(dist
        .support()
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let f = phi.cdf(v);
            let below = dist.cumulative[j] / c;
            let at = dist.cumulative[j + 1] / c;
            (below - f).abs().max((at - f).abs())
        })
        .fold(0.0, f64::max))
}

/// [`asclt_diagnostic`] on `count` standard normal draws from `seed`.
pub fn asclt_diagnostic_seeded(count: usize, seed: u64) -> Result<f64> {
    let mut rng = stream(seed, &[TAG_DIAGNOSTIC]);
    let draws: Vec<f64> = (0..count)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    asclt_diagnostic(&draws)
}
