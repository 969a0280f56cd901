//! Simple linear rank statistics, the per-sample centered vector and the
//! Kruskal-Wallis statistic, evaluated on prefixes of a c-sample dataset.

use std::fmt;
use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::CSampleDataset;
use crate::error::{LqeError, Result};
use crate::rank_engine::{batch_ranks, RankAccumulator, ValueDomain};

#[derive(Clone)]
enum ScoreKind {
    Wilcoxon,
    VanDerWaerden,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// Score function `J` on `(0, 1)`, applied to normalized ranks `R / (N + 1)`.
///
/// The almost sure limit theory covers twice differentiable scores with a
/// bounded second derivative. Wilcoxon (`J(t) = t`) satisfies it; van der
/// Waerden scores are unbounded near 0 and 1 and are offered without that
/// guarantee.
#[derive(Clone)]
pub struct ScoreFunction {
    name: String,
    kind: ScoreKind,
}

impl ScoreFunction {
    pub fn wilcoxon() -> Self {
        ScoreFunction {
            name: "wilcoxon".into(),
            kind: ScoreKind::Wilcoxon,
        }
    }

    /// Normal scores `J(t) = Phi^{-1}(t)`.
    pub fn van_der_waerden() -> Self {
        ScoreFunction {
            name: "van_der_waerden".into(),
            kind: ScoreKind::VanDerWaerden,
        }
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScoreFunction {
            name: name.into(),
            kind: ScoreKind::Custom(Arc::new(f)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_wilcoxon(&self) -> bool {
        matches!(self.kind, ScoreKind::Wilcoxon)
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        match &self.kind {
            ScoreKind::Wilcoxon => t,
            ScoreKind::VanDerWaerden => Normal::standard().inverse_cdf(t),
            ScoreKind::Custom(f) => f(t),
        }
    }
}

impl fmt::Debug for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreFunction")
            .field("name", &self.name)
            .finish()
    }
}

/// Regression constants `lambda_ij`, `rows x c`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionConstants {
    lambda: Vec<f64>,
    rows: usize,
    c: usize,
}

impl RegressionConstants {
    /// Requires `max |lambda_ij| = 1`; an all-zero matrix is accepted as the
    /// degenerate pattern whose statistic is identically zero.
    pub fn new(lambda: Vec<f64>, rows: usize, c: usize) -> Result<Self> {
        if lambda.len() != rows * c {
            return Err(LqeError::domain(
                "regression constants do not match rows x c",
            ));
        }
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(LqeError::domain("regression constants must be finite"));
        }
        let max = lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if max != 0.0 && max != 1.0 {
            return Err(LqeError::domain(format!(
                "regression constants must have max |lambda| = 1, got {max}"
            )));
        }
        Ok(RegressionConstants { lambda, rows, c })
    }

    /// `lambda_ij = 1` iff `j == sample`.
    pub fn sample_indicator(rows: usize, c: usize, sample: usize) -> Result<Self> {
        if sample >= c {
            return Err(LqeError::domain(format!(
                "sample {sample} out of range for c = {c}"
            )));
        }
        let lambda = (0..rows * c)
            .map(|i| if i % c == sample { 1.0 } else { 0.0 })
            .collect();
        Ok(RegressionConstants { lambda, rows, c })
    }

    pub fn zeros(rows: usize, c: usize) -> Self {
        RegressionConstants {
            lambda: vec![0.0; rows * c],
            rows,
            c,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lambda[i * self.c + j]
    }
}

/// Normalizing sequence `a_k` of the Q statistic.
#[derive(Clone)]
pub enum Scaling {
    /// `a_k = sqrt(k)`
    Sqrt,
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl Scaling {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Scaling::Sqrt => (k as f64).sqrt(),
            Scaling::Custom(f) => f(k),
        }
    }
}

impl fmt::Debug for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scaling::Sqrt => f.write_str("Sqrt"),
            Scaling::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Score, null centering constant and normalizing sequence for `Q_k(J)`.
#[derive(Debug, Clone)]
pub struct StatisticSpec {
    pub score: ScoreFunction,
    pub centering: f64,
    pub scaling: Scaling,
}

impl StatisticSpec {
    /// Wilcoxon scores, centering `1/(2c)` and `a_k = sqrt(k)`: the null
    /// setting of the c-sample problem.
    pub fn wilcoxon_c_sample(c: usize) -> Self {
        StatisticSpec {
            score: ScoreFunction::wilcoxon(),
            centering: 1.0 / (2.0 * c as f64),
            scaling: Scaling::Sqrt,
        }
    }
}

/// Statistic values `T_1, ..., T_n` on growing prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTrace {
    values: Vec<f64>,
}

impl PrefixTrace {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LqeError::domain("prefix trace must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LqeError::domain("prefix trace values must be finite"));
        }
        Ok(PrefixTrace { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }
}

/// `L_k = (1/N) sum_ij lambda_ij J(R_ij / (N + 1))` over a prefix of `k` rows.
///
/// `ranks` are the row-major (mid)ranks of the `k x c` prefix; the first `k`
/// rows of `lambda` are used.
pub fn linear_rank_statistic(
    ranks: &[f64],
    lambda: &RegressionConstants,
    score: &ScoreFunction,
) -> Result<f64> {
    let c = lambda.c();
    if ranks.is_empty() || !ranks.len().is_multiple_of(c) {
        return Err(LqeError::domain(
            "ranks must form complete rows of the lambda width",
        ));
    }
    let k = ranks.len() / c;
    if k > lambda.rows() {
        return Err(LqeError::domain(
            "more rank rows than regression constant rows",
        ));
    }
    let n_obs = ranks.len() as f64;
    let sum: f64 = ranks
        .iter()
        .enumerate()
        .map(|(idx, &r)| {
            let l = lambda.get(idx / c, idx % c);
            if l == 0.0 {
                0.0
            } else {
                l * score.evaluate(r / (n_obs + 1.0))
            }
        })
        .sum();
    Ok(sum / n_obs)
}

/// Wilcoxon statistic for the sample-indicator pattern: `R_l / (N (N + 1))`.
pub fn wilcoxon_sample_statistic(rank_sums: &[f64], sample: usize, k: usize) -> Result<f64> {
    if sample >= rank_sums.len() {
        return Err(LqeError::domain(format!(
            "sample {sample} out of range for c = {}",
            rank_sums.len()
        )));
    }
    let n_obs = (k * rank_sums.len()) as f64;
    Ok(rank_sums[sample] / (n_obs * (n_obs + 1.0)))
}

/// `T_k^(l) = R_l / (N (N + 1)) - 1/(2c)` for every sample `l`.
pub fn t_statistic_vector(rank_sums: &[f64], k: usize) -> Vec<f64> {
    let c = rank_sums.len() as f64;
    let n_obs = k as f64 * c;
    let denom = n_obs * (n_obs + 1.0);
    // (2c R_l - N(N+1)) is exact for half-integer rank sums
    rank_sums
        .iter()
        .map(|&r| (2.0 * c * r - denom) / (2.0 * c * denom))
        .collect()
}

/// Kruskal-Wallis statistic `12/(N(N+1)) (1/k) sum R_l^2 - 3(N+1)`.
pub fn kruskal_wallis(rank_sums: &[f64], k: usize) -> f64 {
    let kf = k as f64;
    let n_obs = kf * rank_sums.len() as f64;
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    // same formula over a common denominator; the numerator stays exact for
    // half-integer rank sums while it fits in 53 bits
    (12.0 * sum_sq - 3.0 * kf * n_obs * (n_obs + 1.0) * (n_obs + 1.0))
        / (n_obs * (n_obs + 1.0) * kf)
}

/// Kruskal-Wallis as the quadratic form `12 N (N+1) / k * sum (T_k^(l))^2`.
pub fn kruskal_wallis_via_t(t_vector: &[f64], k: usize) -> f64 {
    let n_obs = (k * t_vector.len()) as f64;
    let sum_sq: f64 = t_vector.iter().map(|t| t * t).sum();
    12.0 * n_obs * (n_obs + 1.0) / k as f64 * sum_sq
}

/// `k c^3 / (12 (k c + 1)) * kw`; tends to `(c^2/12) chi^2_{c-1}` under independence.
pub fn scaled_kw(kw: f64, k: usize, c: usize) -> f64 {
    let kc = (k * c) as f64;
    let c = c as f64;
    kc * c * c / (12.0 * (kc + 1.0)) * kw
}

/// `Q_k = (N(k) / a_k) (L_k - centering)` with `N(k) = k c`.
pub fn q_statistic(l_k: f64, spec: &StatisticSpec, k: usize, c: usize) -> Result<f64> {
    let a = spec.scaling.at(k);
    if !a.is_finite() || a <= 0.0 {
        return Err(LqeError::domain(format!(
            "scaling a_{k} = {a} must be positive"
        )));
    }
    Ok((k * c) as f64 / a * (l_k - spec.centering))
}

/// Statistic tracked along the prefix sweep.
#[derive(Debug, Clone)]
pub enum TraceStatistic {
    /// [`scaled_kw`] of the Kruskal-Wallis statistic.
    ScaledKruskalWallis,
    /// [`q_statistic`] of the sample-indicator linear rank statistic of `sample`.
    Q { sample: usize, spec: StatisticSpec },
}

impl TraceStatistic {
    fn validate(&self, c: usize) -> Result<()> {
        match self {
            TraceStatistic::ScaledKruskalWallis => Ok(()),
            TraceStatistic::Q { sample, .. } if *sample >= c => Err(LqeError::domain(format!(
                "sample {sample} out of range for c = {c}"
            ))),
            TraceStatistic::Q { .. } => Ok(()),
        }
    }

    /// Value on the current prefix held by `acc`. `prefix` holds the
    /// row-major compressed indices of the rows pushed so far.
    fn evaluate(&self, acc: &RankAccumulator, prefix: &[usize]) -> Result<f64> {
        let k = acc.len();
        let c = acc.c();
        let sums = acc.rank_sums()?;
        match self {
            TraceStatistic::ScaledKruskalWallis => Ok(scaled_kw(kruskal_wallis(&sums, k), k, c)),
            TraceStatistic::Q { sample, spec } => {
                let l_k = if spec.score.is_wilcoxon() {
                    wilcoxon_sample_statistic(&sums, *sample, k)?
                } else {
                    let n_obs = (k * c) as f64;
                    let mut total = 0.0;
                    for row in prefix.chunks_exact(c) {
                        let r = acc.midrank_of_index(row[*sample])?;
                        total += spec.score.evaluate(r / (n_obs + 1.0));
                    }
                    total / n_obs
                };
                q_statistic(l_k, spec, k, c)
            }
        }
    }

    /// From-scratch evaluation on the whole dataset via batch ranking.
    pub fn evaluate_batch(&self, data: &CSampleDataset) -> Result<f64> {
        self.validate(data.c())?;
        let (k, c) = (data.n(), data.c());
        let ranks = batch_ranks(data.values())?;
        match self {
            TraceStatistic::ScaledKruskalWallis => {
                let mut sums = vec![0.0; c];
                ranks.iter().enumerate().for_each(|(i, r)| sums[i % c] += r);
                Ok(scaled_kw(kruskal_wallis(&sums, k), k, c))
            }
            TraceStatistic::Q { sample, spec } => {
                let lambda = RegressionConstants::sample_indicator(k, c, *sample)?;
                let l_k = linear_rank_statistic(&ranks, &lambda, &spec.score)?;
                q_statistic(l_k, spec, k, c)
            }
        }
    }
}

/// Replays the rows given as compressed indices through `acc` (reset first)
/// and records the statistic after every row.
pub(crate) fn trace_from_indices(
    acc: &mut RankAccumulator,
    rows: &[usize],
    statistic: &TraceStatistic,
) -> Result<PrefixTrace> {
    let c = acc.c();
    statistic.validate(c)?;
    acc.reset();
    let mut values = Vec::with_capacity(rows.len() / c);
    for (k, row) in rows.chunks_exact(c).enumerate() {
        acc.push_indices(row);
        values.push(statistic.evaluate(acc, &rows[..(k + 1) * c])?);
    }
    PrefixTrace::new(values)
}

/// Statistic on every prefix `X_1..X_k`, `k = 1..n`, from one accumulator replay.
pub fn prefix_trace(data: &CSampleDataset, statistic: &TraceStatistic) -> Result<PrefixTrace> {
    let domain = Arc::new(ValueDomain::from_dataset(data));
    let rows = domain.compress(data)?;
    let mut acc = RankAccumulator::new(domain, data.c())?;
    trace_from_indices(&mut acc, &rows, statistic)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= EPS * b.abs().max(1.0)
    }

    #[test]
    fn linear_rank_statistic_examples() {
        // ranks (1,2,3), k = 1, c = 3
        let ranks = [1.0, 2.0, 3.0];
        let w = ScoreFunction::wilcoxon();
        let l2 = RegressionConstants::sample_indicator(1, 3, 1).unwrap();
        let l1 = RegressionConstants::sample_indicator(1, 3, 0).unwrap();
        assert!(close(
            linear_rank_statistic(&ranks, &l2, &w).unwrap(),
            1.0 / 6.0
        ));
        assert!(close(
            linear_rank_statistic(&ranks, &l1, &w).unwrap(),
            1.0 / 12.0
        ));
        let zero = RegressionConstants::zeros(1, 3);
        assert_eq!(
            linear_rank_statistic(&ranks, &zero, &ScoreFunction::van_der_waerden()).unwrap(),
            0.0
        );

        assert!(close(
            wilcoxon_sample_statistic(&ranks, 1, 1).unwrap(),
            1.0 / 6.0
        ));
        assert!(close(
            wilcoxon_sample_statistic(&ranks, 0, 1).unwrap(),
            1.0 / 12.0
        ));
        assert!(matches!(
            wilcoxon_sample_statistic(&ranks, 3, 1),
            Err(LqeError::Domain(_))
        ));
        assert!(RegressionConstants::sample_indicator(1, 3, 3).is_err());
    }

    #[test]
    fn regression_constants_normalization() {
        assert!(RegressionConstants::new(vec![0.5, -1.0], 1, 2).is_ok());
        assert!(RegressionConstants::new(vec![0.5, 0.2], 1, 2).is_err());
        assert!(RegressionConstants::new(vec![0.0, 0.0], 1, 2).is_ok());
        assert!(RegressionConstants::new(vec![1.0], 1, 2).is_err());
    }

    #[test]
    fn t_vector_examples() {
        let t = t_statistic_vector(&[1.0, 2.0, 3.0], 1);
        for (g, e) in t.iter().zip([-1.0 / 12.0, 0.0, 1.0 / 12.0]) {
            assert!(close(*g, e), "{g} vs {e}");
        }
        assert_eq!(t_statistic_vector(&[5.0, 5.0], 2), vec![0.0, 0.0]);
        let t = t_statistic_vector(&[4.0, 10.0, 7.0], 2);
        for (g, e) in t.iter().zip([-1.0 / 14.0, 1.0 / 14.0, 0.0]) {
            assert!(close(*g, e), "{g} vs {e}");
        }
        assert!(t.iter().sum::<f64>().abs() <= 1e-14);
    }

    #[test]
    fn kruskal_wallis_examples() {
        assert!(close(kruskal_wallis(&[1.0, 2.0, 3.0], 1), 2.0));
        assert_eq!(kruskal_wallis(&[2.0, 2.0, 2.0], 1), 0.0);
        assert!(close(kruskal_wallis(&[3.0, 7.0], 2), 2.4));

        assert!(close(
            kruskal_wallis_via_t(&[-1.0 / 12.0, 0.0, 1.0 / 12.0], 1),
            2.0
        ));
        assert_eq!(kruskal_wallis_via_t(&[0.0, 0.0, 0.0], 4), 0.0);
    }

    #[test]
    fn scaled_kw_examples() {
        assert!(close(scaled_kw(2.0, 1, 3), 1.125));
        assert_eq!(scaled_kw(0.0, 17, 3), 0.0);
        let v = scaled_kw(4.60517, 1000, 3);
        assert!((v - 27000.0 / 36012.0 * 4.60517).abs() < 1e-12);
        assert!((v - 3.4527).abs() < 1e-4);
    }

    #[test]
    fn q_statistic_examples() {
        let spec = StatisticSpec::wilcoxon_c_sample(3);
        assert_eq!(q_statistic(spec.centering, &spec, 10, 3).unwrap(), 0.0);
        assert_eq!(q_statistic(1.0 / 6.0, &spec, 1, 3).unwrap(), 0.0);
        assert!(close(q_statistic(0.2, &spec, 100, 3).unwrap(), 1.0));
        let bad = StatisticSpec {
            scaling: Scaling::Custom(Arc::new(|_| 0.0)),
            ..spec
        };
        assert!(q_statistic(0.2, &bad, 1, 3).is_err());
    }

    fn sample_data() -> CSampleDataset {
        CSampleDataset::from_rows(&[
            vec![0.3, 1.2, -0.4],
            vec![2.0, 0.1, 0.5],
            vec![0.3, 0.9, 1.7],
            vec![-1.0, 0.2, 0.0],
            vec![0.8, 1.1, 0.6],
        ])
        .unwrap()
    }

    #[test]
    fn trace_single_row() {
        let d = CSampleDataset::from_rows(&[vec![0.3, 0.7, 0.1]]).unwrap();
        let tr = prefix_trace(&d, &TraceStatistic::ScaledKruskalWallis).unwrap();
        // ranks (2,3,1): kw = 2, scaled by 27/48
        assert_eq!(tr.len(), 1);
        assert!(close(tr.last(), 1.125));
    }

    #[test]
    fn trace_elements_match_batch_prefixes() {
        let d = sample_data();
        let stats = [
            TraceStatistic::ScaledKruskalWallis,
            TraceStatistic::Q {
                sample: 1,
                spec: StatisticSpec::wilcoxon_c_sample(3),
            },
            TraceStatistic::Q {
                sample: 2,
                spec: StatisticSpec {
                    score: ScoreFunction::van_der_waerden(),
                    centering: 0.0,
                    scaling: Scaling::Sqrt,
                },
            },
        ];
        for stat in &stats {
            let tr = prefix_trace(&d, stat).unwrap();
            for k in 1..=d.n() {
                let batch = stat.evaluate_batch(&d.prefix(k).unwrap()).unwrap();
                assert!(close(tr.values()[k - 1], batch), "{stat:?} k={k}");
            }
        }
    }

    #[test]
    fn trace_rejects_bad_sample() {
        let stat = TraceStatistic::Q {
            sample: 3,
            spec: StatisticSpec::wilcoxon_c_sample(3),
        };
        assert!(prefix_trace(&sample_data(), &stat).is_err());
    }

    #[test]
    fn reversed_rows_share_final_element() {
        let d = sample_data();
        let rev: Vec<Vec<f64>> = (0..d.n()).rev().map(|i| d.row(i).to_vec()).collect();
        let r = CSampleDataset::from_rows(&rev).unwrap();
        let a = prefix_trace(&d, &TraceStatistic::ScaledKruskalWallis).unwrap();
        let b = prefix_trace(&r, &TraceStatistic::ScaledKruskalWallis).unwrap();
        assert_eq!(a.last(), b.last());
        assert_ne!(a, b);
    }

    #[test]
    fn prefix_trace_type_checks() {
        assert!(PrefixTrace::new(vec![]).is_err());
        assert!(PrefixTrace::new(vec![1.0, f64::INFINITY]).is_err());
    }
}
