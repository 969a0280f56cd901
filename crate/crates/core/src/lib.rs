//! Logarithmic quantile estimation (LQE) for simple linear rank statistics.
//!
//! The crate computes rank statistics on every prefix of a c-sample dataset,
//! turns the resulting trace into a log-averaged empirical distribution, and
//! uses its permutation-averaged quantiles as critical values. The main
//! application is the Kruskal-Wallis test for possibly dependent samples.
//!
//! Module map:
//! - [`rank_engine`]: midranks and incremental per-sample rank sums
//! - [`rank_statistics`]: linear rank statistics, Kruskal-Wallis, prefix traces
//! - [`lqe`]: log-averaged distribution, quantiles, the test, ASCLT diagnostic
//! - [`synthetic`]: seeded normal / exponential generators with dependence
//! - [`sim_harness`]: Monte Carlo studies of quantiles, level and power
//! - [`cli`]: the `lqe` command-line front end

pub mod cli;
pub mod dataset;
pub mod error;
mod fenwick;
pub mod lqe;
pub mod rank_engine;
pub mod rank_statistics;
pub mod rng;
pub mod sim_harness;
pub mod synthetic;

pub use dataset::CSampleDataset;
pub use error::{LqeError, Result};
pub use lqe::{
    asclt_diagnostic, asclt_diagnostic_seeded, build_distribution, lqe_test, lqe_test_with,
    permuted_quantile, permuted_quantiles, LogEmpiricalDistribution, LqeOptions, LqeQuantile,
    PermutationMode, RandomInterval, TestReport,
};
pub use rank_engine::{batch_ranks, RankAccumulator, ValueDomain};
pub use rank_statistics::{
    kruskal_wallis, kruskal_wallis_via_t, linear_rank_statistic, prefix_trace, q_statistic,
    scaled_kw, t_statistic_vector, wilcoxon_sample_statistic, PrefixTrace, RegressionConstants,
    Scaling, ScoreFunction, StatisticSpec, TraceStatistic,
};
pub use sim_harness::{SimulationConfig, SimulationReport, Study};
pub use synthetic::{
    gen_bivariate_normal, gen_c_sample, gen_marshall_olkin, Coupling, DependenceSpec, Family,
};
