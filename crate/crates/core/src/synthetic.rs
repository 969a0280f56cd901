//! Seeded generators for independent and dependent three-sample data.
//!
//! Two coordinates come from a dependent pair generator (bivariate normal via
//! Cholesky, or Marshall-Olkin bivariate exponential); the third is an
//! independent draw of the same family.
//!
//! All marginals are drawn by inversion from per-column uniform streams.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::CSampleDataset;
use crate::error::{LqeError, Result};
use crate::rng::{stream, StreamRng, TAG_DATA};

const SHOCK: u64 = 3;

/// Marginal family of every column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Rate parameterization: mean `1 / rate`.
    Exponential {
        rate: f64,
    },
}

/// Dependence between the first two columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    Independent,
    NormalRho {
        rho: f64,
    },
    MarshallOlkin {
        l1: f64,
        l2: f64,
        l3: f64,
    },
}

/// Family, coupling and per-column mean shifts of a three-sample design.
///
/// Column `j` has mean `base_mean + shifts[j]`, where `base_mean` is `mean`
/// for the normal family and `1 / rate` for the exponential one. Exponential
/// columns are Exp(1 / target mean); dependent exponential columns are
/// rescaled after generation, which keeps the copula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSpec {
    pub family: Family,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default = "zero_shifts")]
    pub shifts: Vec<f64>,
}

fn zero_shifts() -> Vec<f64> {
    vec![0.0; 3]
}

impl DependenceSpec {
    pub fn independent(family: Family) -> Self {
        DependenceSpec {
            family,
            coupling: Coupling::Independent,
            shifts: zero_shifts(),
        }
    }

    pub fn with_shifts(mut self, shifts: Vec<f64>) -> Self {
        self.shifts = shifts;
        self
    }

    pub fn is_independent(&self) -> bool {
        self.coupling == Coupling::Independent
    }

    /// Target mean of every column.
    pub fn column_means(&self) -> Vec<f64> {
        let base = match self.family {
            Family::Normal { mean, .. } => mean,
            Family::Exponential { rate } => 1.0 / rate,
        };
        self.shifts.iter().map(|s| base + s).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shifts.len() != 3 {
            return Err(LqeError::domain(format!(
                "expected 3 shifts, got {}",
                self.shifts.len()
            )));
        }
        if self.shifts.iter().any(|s| !s.is_finite()) {
            return Err(LqeError::domain("shifts must be finite"));
        }
        match self.family {
            Family::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd > 0.0 && sd.is_finite()) {
                    return Err(LqeError::domain(
                        "normal family needs finite mean and sd > 0",
                    ));
                }
            }
            Family::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(LqeError::domain("exponential rate must be positive"));
                }
                if self.column_means().iter().any(|m| m.is_nan() || *m <= 0.0) {
                    return Err(LqeError::domain(
                        "exponential column means must be positive",
                    ));
                }
            }
        }
        match (self.coupling, self.family) {
            (Coupling::Independent, _) => Ok(()),
            (Coupling::NormalRho { rho }, Family::Normal { .. }) => check_rho(rho),
            (Coupling::MarshallOlkin { l1, l2, l3 }, Family::Exponential { .. }) => {
                check_rates(l1, l2, l3)
            }
            (Coupling::NormalRho { .. }, _) => Err(LqeError::domain(
                "normal_rho coupling needs the normal family",
            )),
            (Coupling::MarshallOlkin { .. }, _) => Err(LqeError::domain(
                "marshall_olkin coupling needs the exponential family",
            )),
        }
    }

    /// Short label such as `normal(0,1) rho=0.5`.
    pub fn label(&self) -> String {
        let fam = match self.family {
            Family::Normal { mean, sd } => format!("normal({mean},{sd})"),
            Family::Exponential { rate } => format!("exp({rate})"),
        };
        match self.coupling {
            Coupling::Independent => format!("{fam} independent"),
            Coupling::NormalRho { rho } => format!("{fam} rho={rho}"),
            Coupling::MarshallOlkin { l1, l2, l3 } => format!("{fam} mo({l1},{l2},{l3})"),
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() <= 1.0 {
        Ok(())
    } else {
        Err(LqeError::domain(format!(
            "correlation {rho} outside [-1, 1]"
        )))
    }
}

fn check_rates(l1: f64, l2: f64, l3: f64) -> Result<()> {
    if [l1, l2, l3].iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(LqeError::domain(
            "Marshall-Olkin rates must be finite and >= 0",
        ));
    }
    if l1 + l3 <= 0.0 || l2 + l3 <= 0.0 {
        return Err(LqeError::domain(
            "Marshall-Olkin needs l1 + l3 > 0 and l2 + l3 > 0",
        ));
    }
    Ok(())
}

/// Lower Cholesky factor of `[[1, rho], [rho, 1]]`.
fn cholesky_2x2(rho: f64) -> [[f64; 2]; 2] {
    [[1.0, 0.0], [rho, (1.0 - rho * rho).max(0.0).sqrt()]]
}

// uniform on the open interval (0, 1)
fn open_uniform(rng: &mut StreamRng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn std_normal(rng: &mut StreamRng) -> f64 {
    Normal::standard().inverse_cdf(open_uniform(rng))
}

fn std_exp(rng: &mut StreamRng) -> f64 {
    -(1.0 - open_uniform(rng)).ln()
}

/// Independent streams for the three columns plus the common shock.
///
/// Marginals are drawn by inversion from these streams, so designs that
/// differ only in their marginal family or shifts share random numbers.
struct Streams {
    columns: [StreamRng; 3],
    shock: StreamRng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Streams {
            columns: [0u64, 1, 2].map(|j| stream(seed, &[TAG_DATA, j])),
            shock: stream(seed, &[TAG_DATA, SHOCK]),
        }
    }
}

fn bivariate_normal_from(rho: f64, n: usize, streams: &mut Streams) -> Vec<[f64; 2]> {
    let l = cholesky_2x2(rho);
    (0..n)
        .map(|_| {
            let x0 = std_normal(&mut streams.columns[0]);
            let x1 = std_normal(&mut streams.columns[1]);
            [l[0][0] * x0, l[1][0] * x0 + l[1][1] * x1]
        })
        .collect()
}

/// `n` standard normal pairs with correlation `rho`: `y = L x` with `L L' = Sigma`.
pub fn gen_bivariate_normal(rho: f64, n: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    check_rho(rho)?;
    if n == 0 {
        return Err(LqeError::domain("need at least one pair"));
    }
    Ok(bivariate_normal_from(rho, n, &mut Streams::new(seed)))
}

fn shock(e: f64, rate: f64) -> f64 {
    if rate > 0.0 {
        e / rate
    } else {
        f64::INFINITY
    }
}

fn marshall_olkin_from(
    l1: f64,
    l2: f64,
    l3: f64,
    n: usize,
    streams: &mut Streams,
) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            // -ln(1 - U), -ln(1 - S), -ln(1 - V)
            let u = std_exp(&mut streams.columns[0]);
            let s = std_exp(&mut streams.columns[1]);
            let v = std_exp(&mut streams.shock);
            let common = shock(v, l3);
            [shock(u, l1).min(common), shock(s, l2).min(common)]
        })
        .collect()
}

/// Marshall-Olkin pairs: `X1 = min(-ln(1-U) / l1, -ln(1-V) / l3)`,
/// `X2 = min(-ln(1-S) / l2, -ln(1-V) / l3)`. A zero rate drops its branch.
pub fn gen_marshall_olkin(l1: f64, l2: f64, l3: f64, n: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    check_rates(l1, l2, l3)?;
    if n == 0 {
        return Err(LqeError::domain("need at least one pair"));
    }
    Ok(marshall_olkin_from(l1, l2, l3, n, &mut Streams::new(seed)))
}

/// Three-column dataset for `spec`.
///
/// Each column has its own stream derived from `seed`, so the first `m` rows
/// for `n >= m` do not depend on `n`.
pub fn gen_c_sample(spec: &DependenceSpec, n: usize, seed: u64) -> Result<CSampleDataset> {
    spec.validate()?;
    if n == 0 {
        return Err(LqeError::domain("need at least one row"));
    }
    let means = spec.column_means();
    let mut streams = Streams::new(seed);
    let mut columns: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();

    match spec.family {
        Family::Normal { sd, .. } => {
            let rho = match spec.coupling {
                Coupling::NormalRho { rho } => rho,
                _ => 0.0,
            };
            for [a, b] in bivariate_normal_from(rho, n, &mut streams) {
                columns[0].push(means[0] + sd * a);
                columns[1].push(means[1] + sd * b);
            }
            for _ in 0..n {
                columns[2].push(means[2] + sd * std_normal(&mut streams.columns[2]));
            }
        }
        Family::Exponential { .. } => {
            let (l1, l2, l3) = match spec.coupling {
                Coupling::MarshallOlkin { l1, l2, l3 } => (l1, l2, l3),
                // no common shock: independent unit exponentials
                _ => (1.0, 1.0, 0.0),
            };
            // marginals are Exp(l1 + l3), Exp(l2 + l3); rescale to the targets
            let scale = [means[0] * (l1 + l3), means[1] * (l2 + l3)];
            for [a, b] in marshall_olkin_from(l1, l2, l3, n, &mut streams) {
                columns[0].push(a * scale[0]);
                columns[1].push(b * scale[1]);
            }
            for _ in 0..n {
                columns[2].push(means[2] * std_exp(&mut streams.columns[2]));
            }
        }
    }
    CSampleDataset::from_columns(&columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    fn corr(pairs: &[[f64; 2]]) -> f64 {
        let a: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p[1]).collect();
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn normal_pair_edge_cases() {
        let p = gen_bivariate_normal(1.0, 100, 1).unwrap();
        assert!(p.iter().all(|[a, b]| a == b));
        let p = gen_bivariate_normal(0.0, 2000, 1).unwrap();
        assert!(corr(&p).abs() < 0.1);
        let p = gen_bivariate_normal(-1.0, 10, 1).unwrap();
        assert!(p.iter().all(|[a, b]| *a == -*b));
        assert!(gen_bivariate_normal(1.01, 10, 1).is_err());
        assert!(gen_bivariate_normal(0.5, 0, 1).is_err());
    }

    #[test]
    fn normal_pair_correlation() {
        let p = gen_bivariate_normal(0.5, 100_000, 2).unwrap();
        assert!((corr(&p) - 0.5).abs() < 0.02);
    }

    #[test]
    fn marshall_olkin_edge_cases() {
        let p = gen_marshall_olkin(0.0, 0.0, 2.0, 100, 3).unwrap();
        assert!(p.iter().all(|[a, b]| a == b));
        let p = gen_marshall_olkin(1.0, 2.0, 0.0, 20_000, 3).unwrap();
        assert!(corr(&p).abs() < 0.05);
        let a: Vec<f64> = p.iter().map(|x| x[0]).collect();
        let b: Vec<f64> = p.iter().map(|x| x[1]).collect();
        assert!((mean(&a) - 1.0).abs() < 0.05);
        assert!((mean(&b) - 0.5).abs() < 0.03);
        assert!(gen_marshall_olkin(0.0, 1.0, 0.0, 10, 1).is_err());
        assert!(gen_marshall_olkin(-1.0, 1.0, 1.0, 10, 1).is_err());
    }

    #[test]
    fn marshall_olkin_moments() {
        let p = gen_marshall_olkin(1.0, 1.0, 1.0, 100_000, 4).unwrap();
        let a: Vec<f64> = p.iter().map(|x| x[0]).collect();
        let b: Vec<f64> = p.iter().map(|x| x[1]).collect();
        assert!((mean(&a) - 0.5).abs() < 0.01);
        assert!((mean(&b) - 0.5).abs() < 0.01);
        assert!((corr(&p) - 1.0 / 3.0).abs() < 0.03);
    }

    #[test]
    fn c_sample_shapes_and_shifts() {
        let spec = DependenceSpec::independent(Family::Normal { mean: 2.0, sd: 1.0 });
        let d = gen_c_sample(&spec, 50_000, 5).unwrap();
        assert_eq!((d.n(), d.c()), (50_000, 3));
        for j in 0..3 {
            assert!((mean(&d.column(j)) - 2.0).abs() < 0.03);
        }

        let spec = DependenceSpec {
            family: Family::Normal { mean: 0.0, sd: 1.0 },
            coupling: Coupling::NormalRho { rho: 0.5 },
            shifts: vec![0.0, 1.0, 0.0],
        };
        let d = gen_c_sample(&spec, 50_000, 6).unwrap();
        let m: Vec<f64> = (0..3).map(|j| mean(&d.column(j))).collect();
        assert!(m[0].abs() < 0.03 && (m[1] - 1.0).abs() < 0.03 && m[2].abs() < 0.03);
    }

    #[test]
    fn exponential_column_means() {
        let spec = DependenceSpec {
            family: Family::Exponential { rate: 1.0 },
            coupling: Coupling::MarshallOlkin {
                l1: 1.0,
                l2: 1.0,
                l3: 1.0,
            },
            shifts: vec![0.0, 0.0, 1.0],
        };
        assert_eq!(spec.column_means(), vec![1.0, 1.0, 2.0]);
        let d = gen_c_sample(&spec, 100_000, 7).unwrap();
        for (j, target) in [1.0, 1.0, 2.0].iter().enumerate() {
            let m = mean(&d.column(j));
            assert!((m - target).abs() / target < 0.03, "column {j}: {m}");
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = DependenceSpec::independent(Family::Exponential { rate: 4.0 });
        assert!(spec.validate().is_ok());
        spec.shifts = vec![0.0, -0.25, 0.0];
        assert!(spec.validate().is_err());
        spec.shifts = vec![0.0; 2];
        assert!(spec.validate().is_err());
        let spec = DependenceSpec {
            family: Family::Exponential { rate: 1.0 },
            coupling: Coupling::NormalRho { rho: 0.5 },
            shifts: vec![0.0; 3],
        };
        assert!(spec.validate().is_err());
        let spec = DependenceSpec {
            family: Family::Normal { mean: 0.0, sd: 1.0 },
            coupling: Coupling::MarshallOlkin {
                l1: 1.0,
                l2: 1.0,
                l3: 1.0,
            },
            shifts: vec![0.0; 3],
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn independent_families_share_ranks() {
        let normal = DependenceSpec::independent(Family::Normal { mean: 2.0, sd: 1.0 });
        let exp = DependenceSpec::independent(Family::Exponential { rate: 3.0 });
        let a = gen_c_sample(&normal, 200, 12).unwrap();
        let b = gen_c_sample(&exp, 200, 12).unwrap();
        let ra = crate::rank_engine::batch_ranks(a.values()).unwrap();
        let rb = crate::rank_engine::batch_ranks(b.values()).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn rows_do_not_depend_on_n() {
        let spec = DependenceSpec {
            family: Family::Normal { mean: 0.0, sd: 1.0 },
            coupling: Coupling::NormalRho { rho: 0.3 },
            shifts: vec![0.0; 3],
        };
        let long = gen_c_sample(&spec, 50, 4).unwrap();
        let short = gen_c_sample(&spec, 20, 4).unwrap();
        assert_eq!(long.prefix(20).unwrap(), short);
    }

    #[test]
    fn deterministic() {
        let spec = DependenceSpec {
            family: Family::Exponential { rate: 4.0 },
            coupling: Coupling::MarshallOlkin {
                l1: 1.0,
                l2: 1.0,
                l3: 1.0,
            },
            shifts: vec![0.0; 3],
        };
        assert_eq!(
            gen_c_sample(&spec, 100, 9).unwrap(),
            gen_c_sample(&spec, 100, 9).unwrap()
        );
        assert_ne!(
            gen_c_sample(&spec, 100, 9).unwrap(),
            gen_c_sample(&spec, 100, 10).unwrap()
        );
    }
}
