//! Linear structural causal model fitting.
//!
//! Every endogenous node is regressed on its graph parents with an intercept.
//! Exogenous nodes are summarised by their sample mean and variance. The
//! model-implied moments follow from path algebra: with nodes in topological
//! order, `B` the strictly lower-triangular slope matrix, `Psi` the diagonal
//! of noise variances and `nu` the intercepts,
//!
//! ```text
//! cov  = (I - B)^-1 Psi (I - B)^-T
//! mean = (I - B)^-1 nu
//! ```

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{moment_summary_of, Dataset, MomentSummary};
use crate::dist::{chi2_sf, normal_quantile, t_two_sided};
use crate::error::{Error, Result};
use crate::graph::CausalGraph;

/// Relative eigenvalue floor of the scaled parent cross-product matrix below
/// which a design is treated as rank deficient.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Minimum residual count for the normality test.
pub const NORMALITY_MIN_N: usize = 100;

/// Equal-probability bins of the residual normality test.
pub const NORMALITY_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub estimate: f64,
    pub std_error: f64,
    pub p_value: f64,
}

impl Coefficient {
    fn new(estimate: f64, std_error: f64, df: f64) -> Self {
        let p_value = if std_error > 0.0 {
            t_two_sided(estimate / std_error, df)
        } else if estimate == 0.0 {
            1.0
        } else {
            0.0
        };
        Self {
            estimate,
            std_error,
            p_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationFit {
    pub child: String,
    pub intercept: Coefficient,
    /// Keyed by parent name; exactly the graph parents of `child`.
    pub coefficients: BTreeMap<String, Coefficient>,
    /// RSS / (n - k - 1).
    pub residual_variance: f64,
    pub rss: f64,
    pub df: usize,
    pub n: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExogenousMoments {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmFit {
    pub graph_version: u64,
    pub n: usize,
    /// Topological order used for the induced moments.
    pub order: Vec<String>,
    pub equations: BTreeMap<String, EquationFit>,
    pub exogenous: BTreeMap<String, ExogenousMoments>,
    pub induced: MomentSummary,
}

/// Coefficients of a linear SCM in topological order; the common currency of
/// fitting, bootstrapping and simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    pub order: Vec<String>,
    /// For node j, `(parent index, slope)` pairs; parent index < j.
    pub parents: Vec<Vec<(usize, f64)>>,
    /// Intercept for endogenous nodes, sample mean for exogenous ones.
    pub intercepts: Vec<f64>,
    /// Noise variance (RSS / (n - 1)) for endogenous nodes, sample variance
    /// for exogenous ones.
    pub variances: Vec<f64>,
}

impl LinearScm {
    fn structure_matrix(&self) -> DMatrix<f64> {
        let p = self.order.len();
        let mut a = DMatrix::identity(p, p);
        for (j, parents) in self.parents.iter().enumerate() {
            for &(k, b) in parents {
                a[(j, k)] -= b;
            }
        }
        a
    }

    /// Model-implied (mean, covariance).
    pub fn induced(&self) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.order.len();
        let i_minus_b = self.structure_matrix();
        let total = i_minus_b
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .expect("unit lower-triangular matrix is invertible");
        let psi = DMatrix::from_diagonal(&DVector::from_vec(self.variances.clone()));
        let cov = &total * psi * total.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        let mean = &total * DVector::from_vec(self.intercepts.clone());
        (mean, cov)
    }

    /// Fits the SCM from first and second sample moments alone. OLS with an
    /// intercept depends on the data only through these, so this agrees with
    /// [`fit_scm`] up to rounding.
    pub fn from_moments(
        graph: &CausalGraph,
        order: &[String],
        mean: &[f64],
        cov: &DMatrix<f64>,
    ) -> Result<Self> {
        let index: BTreeMap<&str, usize> = order
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let p = order.len();
        let mut parents = Vec::with_capacity(p);
        let mut intercepts = Vec::with_capacity(p);
        let mut variances = Vec::with_capacity(p);
        for (j, child) in order.iter().enumerate() {
            let pa: Vec<usize> = graph.parents(child).iter().map(|n| index[n]).collect();
            if pa.is_empty() {
                parents.push(Vec::new());
                intercepts.push(mean[j]);
                variances.push(cov[(j, j)]);
                continue;
            }
            let k = pa.len();
            let spp = DMatrix::from_fn(k, k, |a, b| cov[(pa[a], pa[b])]);
            let spc = DVector::from_fn(k, |a, _| cov[(pa[a], j)]);
            check_rank(&spp, child, &pa.iter().map(|&i| order[i].clone()).collect::<Vec<_>>())?;
            let chol = spp.cholesky().ok_or_else(|| Error::SingularDesign {
                child: child.clone(),
                parents: pa.iter().map(|&i| order[i].clone()).collect(),
            })?;
            let beta = chol.solve(&spc);
            let explained = beta.dot(&spc);
            let intercept = mean[j] - pa.iter().zip(beta.iter()).map(|(&i, b)| b * mean[i]).sum::<f64>();
            parents.push(pa.into_iter().zip(beta.iter().copied()).collect());
            intercepts.push(intercept);
            variances.push((cov[(j, j)] - explained).max(0.0));
        }
        Ok(Self {
            order: order.to_vec(),
            parents,
            intercepts,
            variances,
        })
    }
}

/// Rejects designs whose scaled cross-product matrix is numerically rank
/// deficient, naming the parents that load on the degenerate direction.
fn check_rank(xtx: &DMatrix<f64>, child: &str, parent_names: &[String]) -> Result<()> {
    let k = xtx.nrows();
    let singular = |parents: Vec<String>| Error::SingularDesign {
        child: child.to_string(),
        parents,
    };
    let diag: Vec<f64> = (0..k).map(|i| xtx[(i, i)]).collect();
    let max_diag = diag.iter().cloned().fold(0.0, f64::max);
    let zero_var: Vec<String> = diag
        .iter()
        .enumerate()
        .filter(|(_, &d)| !(d > max_diag * 1e-14) || d <= 0.0)
        .map(|(i, _)| parent_names[i].clone())
        .collect();
    if !zero_var.is_empty() {
        return Err(singular(zero_var));
    }
    if k == 1 {
        return Ok(());
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| xtx[(i, j)] / (diag[i] * diag[j]).sqrt());
    let eig = scaled.symmetric_eigen();
    let (imin, &min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("k >= 1");
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    if min <= max * SINGULAR_TOLERANCE {
        let v = eig.eigenvectors.column(imin);
        let involved = (0..k)
            .filter(|&i| v[i].abs() > 0.1)
            .map(|i| parent_names[i].clone())
            .collect();
        return Err(singular(involved));
    }
    Ok(())
}

fn fit_equation(child: &str, parents: &[&str], data: &Dataset) -> Result<EquationFit> {
    let n = data.n();
    let k = parents.len();
    let y = data.column(child)?;
    let xs = parents
        .iter()
        .map(|p| data.column(p))
        .collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let x_mean: Vec<f64> = xs.iter().map(|c| c.iter().sum::<f64>() / nf).collect();

    let mut xtx = DMatrix::zeros(k, k);
    let mut xty = DVector::zeros(k);
    for i in 0..n {
        let yc = y[i] - y_mean;
        for a in 0..k {
            let xa = xs[a][i] - x_mean[a];
            xty[a] += xa * yc;
            for b in a..k {
                xtx[(a, b)] += xa * (xs[b][i] - x_mean[b]);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let names: Vec<String> = parents.iter().map(|s| s.to_string()).collect();
    check_rank(&xtx, child, &names)?;
    let inv = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularDesign {
            child: child.to_string(),
            parents: names.clone(),
        })?
        .inverse();
    let beta = &inv * &xty;
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - intercept - (0..k).map(|a| beta[a] * xs[a][i]).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let df = n - k - 1;
    let s2 = rss / df as f64;

    let xm = DVector::from_vec(x_mean);
    let intercept_var = s2 * (1.0 / nf + (xm.transpose() * &inv * &xm)[(0, 0)]);
    let coefficients = names
        .into_iter()
        .enumerate()
        .map(|(a, name)| {
            let se = (s2 * inv[(a, a)]).max(0.0).sqrt();
            (name, Coefficient::new(beta[a], se, df as f64))
        })
        .collect();
    Ok(EquationFit {
        child: child.to_string(),
        intercept: Coefficient::new(intercept, intercept_var.max(0.0).sqrt(), df as f64),
        coefficients,
        residual_variance: s2,
        rss,
        df,
        n,
        residuals,
    })
}

/// Fits one OLS equation per endogenous node.
pub fn fit_scm(graph: &CausalGraph, data: &Dataset) -> Result<ScmFit> {
    for name in graph.node_names() {
        data.column(name)?;
    }
    let order = graph.topological_order();
    let max_parents = order.iter().map(|n| graph.parents(n).len()).max().unwrap_or(0);
    if data.n() <= max_parents + 2 {
        return Err(Error::InsufficientRows {
            needed: max_parents + 3,
            got: data.n(),
        });
    }

    let endogenous: Vec<&String> = order.iter().filter(|n| !graph.parents(n).is_empty()).collect();
    let fits = endogenous
        .par_iter()
        .map(|child| fit_equation(child, &graph.parents(child), data))
        .collect::<Result<Vec<_>>>()?;
    let equations: BTreeMap<String, EquationFit> =
        fits.into_iter().map(|f| (f.child.clone(), f)).collect();

    let nf = data.n() as f64;
    let mut exogenous = BTreeMap::new();
    for name in order.iter().filter(|n| graph.parents(n).is_empty()) {
        let col = data.column(name)?;
        let mean = col.iter().sum::<f64>() / nf;
        let variance = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
        exogenous.insert(name.clone(), ExogenousMoments { mean, variance });
    }

    let mut fit = ScmFit {
        graph_version: graph.version(),
        n: data.n(),
        order,
        equations,
        exogenous,
        induced: MomentSummary::from_cov(Vec::new(), Vec::new(), &DMatrix::zeros(0, 0)),
    };
    fit.induced = induced_moments(&fit, graph)?;
    Ok(fit)
}

impl ScmFit {
    pub fn linear_scm(&self) -> LinearScm {
        let index: BTreeMap<&str, usize> = self
            .order
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let denom = self.n as f64 - 1.0;
        let mut scm = LinearScm {
            order: self.order.clone(),
            parents: Vec::new(),
            intercepts: Vec::new(),
            variances: Vec::new(),
        };
        for name in &self.order {
            if let Some(eq) = self.equations.get(name) {
                scm.parents.push(
                    eq.coefficients
                        .iter()
                        .map(|(p, c)| (index[p.as_str()], c.estimate))
                        .collect(),
                );
                scm.intercepts.push(eq.intercept.estimate);
                scm.variances.push(eq.rss / denom);
            } else {
                let m = self.exogenous[name];
                scm.parents.push(Vec::new());
                scm.intercepts.push(m.mean);
                scm.variances.push(m.variance);
            }
        }
        scm
    }

    /// Number of free covariance-structure parameters: slopes plus one
    /// variance per node.
    pub fn free_parameters(&self) -> usize {
        let slopes: usize = self.equations.values().map(|e| e.coefficients.len()).sum();
        slopes + self.order.len()
    }
}

/// Model-implied moments in topological order.
pub fn induced_moments(fit: &ScmFit, graph: &CausalGraph) -> Result<MomentSummary> {
    if fit.graph_version != graph.version() {
        return Err(Error::VersionMismatch {
            fit: fit.graph_version,
            graph: graph.version(),
        });
    }
    let scm = fit.linear_scm();
    let (mean, cov) = scm.induced();
    Ok(MomentSummary::from_cov(scm.order, mean.iter().copied().collect(), &cov))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: i64,
    pub p_value: f64,
}

/// Likelihood-ratio test of the model-implied covariance against the sample
/// covariance, `(n-1) (ln|Sigma| + tr(S Sigma^-1) - ln|S| - p)`.
pub fn model_fit_statistic(fit: &ScmFit, data: &Dataset) -> Result<ChiSquareTest> {
    let p = fit.order.len();
    let df = (p * (p + 1) / 2) as i64 - fit.free_parameters() as i64;
    if df <= 0 {
        return Ok(ChiSquareTest {
            statistic: 0.0,
            df,
            p_value: 1.0,
        });
    }
    let sample = moment_summary_of(data, &fit.order)?.cov_matrix();
    let sigma = fit.induced.cov_matrix_for(&fit.order).ok_or(Error::SingularInducedCov)?;
    let chol_s = sample.clone().cholesky().ok_or(Error::SingularSampleCov)?;
    let chol_sigma = sigma.cholesky().ok_or(Error::SingularInducedCov)?;
    let ln_det = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = (chol_sigma.solve(&sample)).trace();
    let f = ln_det(&chol_sigma.l()) + trace - ln_det(&chol_s.l()) - p as f64;
    let statistic = ((fit.n as f64 - 1.0) * f).max(0.0);
    Ok(ChiSquareTest {
        statistic,
        df,
        p_value: chi2_sf(statistic, df as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NormalityOutcome {
    Tested(ChiSquareTest),
    SkippedSmallN { n: usize },
}

/// Pearson chi-square goodness of fit of the residuals against
/// N(0, residual_variance) over equal-probability bins, df = bins - 3.
pub fn residual_normality_test(eq: &EquationFit) -> NormalityOutcome {
    normality_chi_square(&eq.residuals, eq.residual_variance)
}

pub fn normality_chi_square(residuals: &[f64], variance: f64) -> NormalityOutcome {
    let n = residuals.len();
    if n < NORMALITY_MIN_N {
        return NormalityOutcome::SkippedSmallN { n };
    }
    let sd = variance.sqrt();
    let cuts: Vec<f64> = (1..NORMALITY_BINS)
        .map(|k| sd * normal_quantile(k as f64 / NORMALITY_BINS as f64))
        .collect();
    let mut counts = vec![0usize; NORMALITY_BINS];
    for r in residuals {
        counts[cuts.partition_point(|c| c <= r)] += 1;
    }
    let expected = n as f64 / NORMALITY_BINS as f64;
    let statistic: f64 = counts
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let df = NORMALITY_BINS as i64 - 3;
    NormalityOutcome::Tested(ChiSquareTest {
        statistic,
        df,
        p_value: chi2_sf(statistic, df as f64),
    })
}
