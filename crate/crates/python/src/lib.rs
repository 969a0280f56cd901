//! Python bindings for `lqe-core`.
//!
//! Datasets can be passed as `CSampleDataset` objects or as lists of rows.
//! Errors from the core crate surface as `lqe.LqeError`, a `ValueError`.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lqe_core::{
    self as core, DependenceSpec, LqeOptions, PermutationMode, RankAccumulator, SimulationConfig,
    TraceStatistic,
};

create_exception!(lqe, LqeError, PyValueError);

fn to_py(e: core::LqeError) -> PyErr {
    LqeError::new_err(e.to_string())
}

#[pyclass(name = "CSampleDataset", frozen, from_py_object)]
#[derive(Clone)]
struct PyDataset(core::CSampleDataset);

#[pymethods]
impl PyDataset {
    /// Build from a list of rows; row `i` holds the `i`-th observation of every sample.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        core::CSampleDataset::from_rows(&rows)
            .map(PyDataset)
            .map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn c(&self) -> usize {
        self.0.c()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows().map(<[f64]>::to_vec).collect()
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.0.c() {
            return Err(LqeError::new_err(format!("column {j} out of range")));
        }
        Ok(self.0.column(j))
    }

    fn prefix(&self, k: usize) -> PyResult<Self> {
        self.0.prefix(k).map(PyDataset).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    fn __repr__(&self) -> String {
        format!("CSampleDataset(n={}, c={})", self.0.n(), self.0.c())
    }
}

#[derive(FromPyObject)]
enum DataArg {
    Dataset(PyDataset),
    Rows(Vec<Vec<f64>>),
}

impl DataArg {
    fn into_inner(self) -> PyResult<core::CSampleDataset> {
        match self {
            DataArg::Dataset(d) => Ok(d.0),
            DataArg::Rows(rows) => core::CSampleDataset::from_rows(&rows).map_err(to_py),
        }
    }
}

#[pyclass(name = "LogEmpiricalDistribution", frozen)]
struct PyDistribution(core::LogEmpiricalDistribution);

#[pymethods]
impl PyDistribution {
    /// Log-averaged distribution of `trace`, dropping the first `burn_in` values.
    #[new]
    #[pyo3(signature = (trace, burn_in = 0))]
    fn new(trace: Vec<f64>, burn_in: usize) -> PyResult<Self> {
        let trace = core::PrefixTrace::new(trace).map_err(to_py)?;
        core::build_distribution(&trace, burn_in)
            .map(PyDistribution)
            .map_err(to_py)
    }

    #[getter]
    fn support(&self) -> Vec<f64> {
        self.0.support().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[getter]
    fn normalizer(&self) -> f64 {
        self.0.normalizer()
    }

    #[getter]
    fn burn_in(&self) -> usize {
        self.0.burn_in()
    }

    #[pyo3(signature = (t, strict = false))]
    fn cdf(&self, t: f64, strict: bool) -> f64 {
        self.0.cdf(t, strict)
    }

    fn quantile(&self, alpha: f64) -> PyResult<f64> {
        self.0.quantile(alpha).map_err(to_py)
    }
}

#[pyclass(name = "LqeQuantile", frozen, get_all)]
struct PyQuantile {
    alpha: f64,
    averaged: f64,
    per_permutation: Vec<f64>,
}

impl From<core::LqeQuantile> for PyQuantile {
    fn from(q: core::LqeQuantile) -> Self {
        PyQuantile {
            alpha: q.alpha,
            averaged: q.averaged,
            per_permutation: q.per_permutation,
        }
    }
}

#[pymethods]
impl PyQuantile {
    fn __repr__(&self) -> String {
        format!(
            "LqeQuantile(alpha={}, averaged={})",
            self.alpha, self.averaged
        )
    }
}

#[pyclass(name = "TestReport", frozen, get_all)]
struct PyTestReport {
    statistic_value: f64,
    critical_value: f64,
    lower_quantile: f64,
    reject: bool,
    interval: (f64, f64),
    alpha: f64,
    permutations: usize,
    burn_in: usize,
    seed: u64,
    mode: String,
}

#[pymethods]
impl PyTestReport {
    fn __repr__(&self) -> String {
        format!(
            "TestReport(statistic_value={}, critical_value={}, reject={})",
            self.statistic_value,
            self.critical_value,
            if self.reject { "True" } else { "False" }
        )
    }
}

fn options(permutations: usize, burn_in: usize, seed: u64, independent: bool) -> LqeOptions {
    LqeOptions {
        permutations,
        burn_in,
        seed,
        mode: PermutationMode::for_independence(independent),
    }
}

/// Midranks of a flat sample.
#[pyfunction]
fn batch_ranks(values: Vec<f64>) -> PyResult<Vec<f64>> {
    core::batch_ranks(&values).map_err(to_py)
}

/// Per-sample rank sums of the whole dataset.
#[pyfunction]
fn rank_sums(data: DataArg) -> PyResult<Vec<f64>> {
    let data = data.into_inner()?;
    let mut acc = RankAccumulator::for_dataset(&data);
    for row in data.rows() {
        acc.push_vector(row).map_err(to_py)?;
    }
    acc.rank_sums().map_err(to_py)
}

#[pyfunction]
fn kruskal_wallis(rank_sums: Vec<f64>, k: usize) -> f64 {
    core::kruskal_wallis(&rank_sums, k)
}

#[pyfunction]
fn kruskal_wallis_via_t(t_vector: Vec<f64>, k: usize) -> f64 {
    core::kruskal_wallis_via_t(&t_vector, k)
}

#[pyfunction]
fn t_statistic_vector(rank_sums: Vec<f64>, k: usize) -> Vec<f64> {
    core::t_statistic_vector(&rank_sums, k)
}

#[pyfunction]
fn scaled_kw(kw: f64, k: usize, c: usize) -> f64 {
    core::scaled_kw(kw, k, c)
}

/// Scaled Kruskal-Wallis statistic on every prefix of the dataset.
#[pyfunction]
fn prefix_trace(py: Python<'_>, data: DataArg) -> PyResult<Vec<f64>> {
    let data = data.into_inner()?;
    py.detach(|| core::prefix_trace(&data, &TraceStatistic::ScaledKruskalWallis))
        .map(|t| t.values().to_vec())
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (data, alphas, permutations = 20, burn_in = 5, seed = 0, independent = false))]
fn permuted_quantiles(
    py: Python<'_>,
    data: DataArg,
    alphas: Vec<f64>,
    permutations: usize,
    burn_in: usize,
    seed: u64,
    independent: bool,
) -> PyResult<Vec<PyQuantile>> {
    let data = data.into_inner()?;
    let opts = options(permutations, burn_in, seed, independent);
    let qs = py
        .detach(|| {
            core::permuted_quantiles(&data, &TraceStatistic::ScaledKruskalWallis, &alphas, &opts)
        })
        .map_err(to_py)?;
    Ok(qs.into_iter().map(PyQuantile::from).collect())
}

#[pyfunction]
#[pyo3(signature = (data, alpha, permutations = 20, burn_in = 5, seed = 0, independent = false))]
fn permuted_quantile(
    py: Python<'_>,
    data: DataArg,
    alpha: f64,
    permutations: usize,
    burn_in: usize,
    seed: u64,
    independent: bool,
) -> PyResult<PyQuantile> {
    let mut qs = permuted_quantiles(
        py,
        data,
        vec![alpha],
        permutations,
        burn_in,
        seed,
        independent,
    )?;
    Ok(qs.remove(0))
}

/// LQE Kruskal-Wallis test; rejects when the statistic exceeds the averaged `1 - alpha` quantile.
#[pyfunction]
#[pyo3(signature = (data, alpha = 0.1, permutations = 20, burn_in = 5, seed = 0, independent = false))]
fn lqe_test(
    py: Python<'_>,
    data: DataArg,
    alpha: f64,
    permutations: usize,
    burn_in: usize,
    seed: u64,
    independent: bool,
) -> PyResult<PyTestReport> {
    let data = data.into_inner()?;
    let opts = options(permutations, burn_in, seed, independent);
    let r = py
        .detach(|| core::lqe_test(&data, alpha, &opts))
        .map_err(to_py)?;
    Ok(PyTestReport {
        statistic_value: r.statistic_value,
        critical_value: r.quantile.averaged,
        lower_quantile: r.lower_quantile.averaged,
        reject: r.reject,
        interval: (r.interval.lower, r.interval.upper),
        alpha: r.alpha,
        permutations: r.permutations,
        burn_in: r.burn_in,
        seed: r.seed,
        mode: match r.mode {
            PermutationMode::JointRows => "joint_rows".into(),
            PermutationMode::PerSample => "per_sample".into(),
        },
    })
}

/// Three-column synthetic dataset. `spec` is a dict shaped like the config
/// entries, e.g. `{"family": {"kind": "normal", "mean": 0, "sd": 1},
/// "coupling": {"kind": "normal_rho", "rho": 0.5}, "shifts": [0, 1, 0]}`.
#[pyfunction]
fn gen_c_sample(
    py: Python<'_>,
    spec: Bound<'_, PyAny>,
    n: usize,
    seed: u64,
) -> PyResult<PyDataset> {
    let text: String = py
        .import("json")?
        .call_method1("dumps", (spec,))?
        .extract()?;
    let spec: DependenceSpec =
        serde_json::from_str(&text).map_err(|e| LqeError::new_err(e.to_string()))?;
    core::gen_c_sample(&spec, n, seed)
        .map(PyDataset)
        .map_err(to_py)
}

#[pyfunction]
fn gen_bivariate_normal(rho: f64, n: usize, seed: u64) -> PyResult<Vec<(f64, f64)>> {
    let pairs = core::gen_bivariate_normal(rho, n, seed).map_err(to_py)?;
    Ok(pairs.into_iter().map(|[a, b]| (a, b)).collect())
}

#[pyfunction]
fn gen_marshall_olkin(l1: f64, l2: f64, l3: f64, n: usize, seed: u64) -> PyResult<Vec<(f64, f64)>> {
    let pairs = core::gen_marshall_olkin(l1, l2, l3, n, seed).map_err(to_py)?;
    Ok(pairs.into_iter().map(|[a, b]| (a, b)).collect())
}

/// Kolmogorov distance of the log-averaged normalized partial sums of `sample` from N(0, 1).
#[pyfunction]
fn asclt_diagnostic(sample: Vec<f64>) -> PyResult<f64> {
    core::asclt_diagnostic(&sample).map_err(to_py)
}

#[pyfunction]
fn asclt_diagnostic_seeded(py: Python<'_>, n: usize, seed: u64) -> PyResult<f64> {
    py.detach(|| core::asclt_diagnostic_seeded(n, seed))
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (alpha, c = 3))]
fn asymptotic_quantile(alpha: f64, c: usize) -> PyResult<f64> {
    core::sim_harness::asymptotic_quantile(alpha, c).map_err(to_py)
}

/// Runs the study described by a TOML config and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (config, threads = None))]
fn run_study(py: Python<'_>, config: &str, threads: Option<usize>) -> PyResult<String> {
    let mut cfg = SimulationConfig::from_toml_str(config).map_err(to_py)?;
    if threads.is_some() {
        cfg.threads = threads;
    }
    py.detach(|| core::sim_harness::run_study(&cfg)?.to_json())
        .map_err(to_py)
}

#[pymodule]
fn lqe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LqeError", m.py().get_type::<LqeError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyQuantile>()?;
    m.add_class::<PyTestReport>()?;
    m.add_function(wrap_pyfunction!(batch_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(rank_sums, m)?)?;
    m.add_function(wrap_pyfunction!(kruskal_wallis, m)?)?;
    m.add_function(wrap_pyfunction!(kruskal_wallis_via_t, m)?)?;
    m.add_function(wrap_pyfunction!(t_statistic_vector, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_kw, m)?)?;
    m.add_function(wrap_pyfunction!(prefix_trace, m)?)?;
    m.add_function(wrap_pyfunction!(permuted_quantiles, m)?)?;
    m.add_function(wrap_pyfunction!(permuted_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(lqe_test, m)?)?;
    m.add_function(wrap_pyfunction!(gen_c_sample, m)?)?;
    m.add_function(wrap_pyfunction!(gen_bivariate_normal, m)?)?;
    m.add_function(wrap_pyfunction!(gen_marshall_olkin, m)?)?;
    m.add_function(wrap_pyfunction!(asclt_diagnostic, m)?)?;
    m.add_function(wrap_pyfunction!(asclt_diagnostic_seeded, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
