//! The hypothesis family of one co-design iteration.
//!
//! For a fitted SCM the family holds:
//! * one coefficient test per intercept and slope,
//! * one residual normality test per endogenous node,
//! * one covariance equivalence test per node pair (upper triangle and
//!   diagonal, topological order),
//! * the model-fit test,
//! * the intersection hypothesis, whose p-value is filled in by
//!   [`crate::multiplicity::fdcr_adjust`].
//!
//! Covariance equivalence is a TOST on `d = induced cov - sample cov` with
//! threshold `delta_rho * sd(x) * sd(y)`, so a small p-value supports the
//! SCM reproducing the observed covariance.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{substream_rng, RowSample};
use crate::data::{moment_summary_of, Dataset};
use crate::dist::{normal_cdf, normal_sf};
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, DEFAULT_COST};
use crate::multiplicity::{IntersectionMethod, Method, DEFAULT_C0, DEFAULT_Q};
use crate::scm::{model_fit_statistic, residual_normality_test, LinearScm, NormalityOutcome, ScmFit};

pub const INTERSECTION_ID: &str = "intersection";
pub const MODEL_FIT_ID: &str = "model-fit";
pub const INTERCEPT: &str = "(intercept)";

pub const DEFAULT_DELTA_RHO: f64 = 0.05;
pub const DEFAULT_BOOTSTRAP_REPS: usize = 200;

pub fn coefficient_id(child: &str, parent: &str) -> String {
    format!("coef:{child}<-{parent}")
}

pub fn intercept_id(child: &str) -> String {
    coefficient_id(child, INTERCEPT)
}

pub fn normality_id(child: &str) -> String {
    format!("resid-norm:{child}")
}

pub fn cov_eq_id(x: &str, y: &str) -> String {
    format!("cov-eq:{x},{y}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HypothesisKind {
    Coefficient,
    ResidualNormality,
    CovEquivalence,
    ModelFit,
    Intersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub id: String,
    pub kind: HypothesisKind,
    pub raw_p: Option<f64>,
    pub cost: f64,
    pub adjusted_p: Option<f64>,
    pub rejected: Option<bool>,
    /// Coefficient estimate, covariance discrepancy or test statistic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// Equivalence threshold in covariance units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl HypothesisRecord {
    fn new(id: String, kind: HypothesisKind, raw_p: Option<f64>, cost: f64) -> Self {
        Self {
            id,
            kind,
            raw_p,
            cost,
            adjusted_p: None,
            rejected: None,
            estimate: None,
            std_error: None,
            threshold: None,
        }
    }

    /// Non-significant records are the ones to highlight for discussion.
    pub fn is_highlighted(&self, q: f64) -> bool {
        self.adjusted_p.is_some_and(|a| a > q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSpec {
    pub delta_rho: f64,
    pub bootstrap_reps: usize,
}

impl Default for EquivalenceSpec {
    fn default() -> Self {
        Self {
            delta_rho: DEFAULT_DELTA_RHO,
            bootstrap_reps: DEFAULT_BOOTSTRAP_REPS,
        }
    }
}

impl EquivalenceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_rho > 0.0 && self.delta_rho < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_rho must lie in (0, 1), got {}",
                self.delta_rho
            )));
        }
        if self.bootstrap_reps < 2 {
            return Err(Error::InvalidParameter("bootstrap_reps must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentInfo {
    pub method: Method,
    pub intersection_method: IntersectionMethod,
    pub c0: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFamily {
    pub iteration: usize,
    pub q_level: f64,
    pub equivalence: EquivalenceSpec,
    pub seed: u64,
    pub records: Vec<HypothesisRecord>,
    /// Hypotheses that could not be tested, with the reason.
    #[serde(default)]
    pub skipped: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjustment: Option<AdjustmentInfo>,
}

impl HypothesisFamily {
    pub fn record(&self, id: &str) -> Option<&HypothesisRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn count(&self, kind: HypothesisKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }
}

/// TOST p-value for `|d| < delta` given the standard error of `d`:
/// `max(P(Z <= (d - delta)/se), P(Z >= (d + delta)/se))`.
pub fn tost_pvalue(d: f64, delta: f64, se: f64) -> f64 {
    if se > 0.0 {
        let upper = normal_cdf((d - delta) / se);
        let lower = normal_sf((d + delta) / se);
        upper.max(lower)
    } else if d.abs() < delta {
        0.0
    } else {
        1.0
    }
}

/// Observed and induced covariances with bootstrap standard errors of their
/// difference, all in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBootstrap {
    pub order: Vec<String>,
    pub sample: DMatrix<f64>,
    pub induced: DMatrix<f64>,
    pub se: DMatrix<f64>,
    pub reps_used: usize,
}

impl CovarianceBootstrap {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.order.iter().position(|n| n == name)
    }

    pub fn discrepancy(&self, i: usize, j: usize) -> f64 {
        self.induced[(i, j)] - self.sample[(i, j)]
    }
}

/// Resamples rows jointly, refits the SCM on each resample and records the
/// induced-minus-sample covariance. Replicate `r` draws from the substream
/// `cov-eq:rep:{r}` of `seed`.
pub fn covariance_bootstrap(
    graph: &CausalGraph,
    fit: &ScmFit,
    data: &Dataset,
    reps: usize,
    seed: u64,
) -> Result<CovarianceBootstrap> {
    if fit.graph_version != graph.version() {
        return Err(Error::VersionMismatch {
            fit: fit.graph_version,
            graph: graph.version(),
        });
    }
    let order = fit.order.clone();
    let p = order.len();
    let sample = moment_summary_of(data, &order)?.cov_matrix();
    let induced = fit.induced.cov_matrix_for(&order).ok_or(Error::SingularInducedCov)?;
    let rows = RowSample::new(data, &order)?;
    let draws: Vec<DMatrix<f64>> = (0..reps)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = substream_rng(seed, &format!("cov-eq:rep:{r}"));
            let (mean, cov) = rows.resample_moments(&mut rng);
            let scm = LinearScm::from_moments(graph, &order, &mean, &cov).ok()?;
            let (_, ind) = scm.induced();
            Some(ind - cov)
        })
        .collect();
    if draws.len() < 2 {
        return Err(Error::InvalidParameter(
            "fewer than two bootstrap resamples could be refitted".into(),
        ));
    }
    if draws.len() < reps {
        log::warn!("{} of {reps} bootstrap resamples were singular and skipped", reps - draws.len());
    }
    let k = draws.len() as f64;
    let mean = draws.iter().fold(DMatrix::zeros(p, p), |acc, d| acc + d) / k;
    let var = draws
        .iter()
        .fold(DMatrix::zeros(p, p), |acc, d| acc + (d - &mean).map(|v| v * v))
        / (k - 1.0);
    Ok(CovarianceBootstrap {
        order,
        sample,
        induced,
        se: var.map(f64::sqrt),
        reps_used: draws.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceOutcome {
    /// Induced minus sample covariance.
    pub estimate: f64,
    pub threshold: f64,
    pub std_error: f64,
    pub raw_p: f64,
}

fn pair_outcome(boot: &CovarianceBootstrap, i: usize, j: usize, delta_rho: f64) -> Option<EquivalenceOutcome> {
    let threshold = delta_rho * (boot.sample[(i, i)] * boot.sample[(j, j)]).sqrt();
    if !(threshold > 0.0) {
        return None;
    }
    let estimate = boot.discrepancy(i, j);
    let std_error = boot.se[(i, j)];
    Some(EquivalenceOutcome {
        estimate,
        threshold,
        std_error,
        raw_p: tost_pvalue(estimate, threshold, std_error),
    })
}

/// Equivalence test of one covariance entry. Uses the same bootstrap draws
/// as [`build_family`] for the same seed.
pub fn equivalence_test(
    pair: (&str, &str),
    graph: &CausalGraph,
    fit: &ScmFit,
    data: &Dataset,
    spec: &EquivalenceSpec,
    seed: u64,
) -> Result<EquivalenceOutcome> {
    spec.validate()?;
    for name in [pair.0, pair.1] {
        if !graph.contains_node(name) {
            return Err(Error::UnknownNode(name.to_string()));
        }
    }
    let boot = covariance_bootstrap(graph, fit, data, spec.bootstrap_reps, seed)?;
    let i = boot.index_of(pair.0).expect("graph node");
    let j = boot.index_of(pair.1).expect("graph node");
    pair_outcome(&boot, i, j, spec.delta_rho).ok_or_else(|| Error::DegenerateColumn(
        if boot.sample[(i, i)] > 0.0 { pair.1 } else { pair.0 }.to_string(),
    ))
}

pub fn build_family(
    graph: &CausalGraph,
    fit: &ScmFit,
    data: &Dataset,
    spec: &EquivalenceSpec,
    q: f64,
    seed: u64,
    iteration: usize,
) -> Result<HypothesisFamily> {
    spec.validate()?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {q}")));
    }
    if fit.graph_version != graph.version() {
        return Err(Error::VersionMismatch {
            fit: fit.graph_version,
            graph: graph.version(),
        });
    }
    let mut records = Vec::new();
    let mut skipped = Vec::new();

    for child in &fit.order {
        let Some(eq) = fit.equations.get(child) else { continue };
        let mut rec = HypothesisRecord::new(
            intercept_id(child),
            HypothesisKind::Coefficient,
            Some(eq.intercept.p_value),
            DEFAULT_COST,
        );
        rec.estimate = Some(eq.intercept.estimate);
        rec.std_error = Some(eq.intercept.std_error);
        records.push(rec);
        for (parent, coef) in &eq.coefficients {
            let belief = graph.belief(parent, child).ok_or_else(|| Error::UnknownEdge {
                parent: parent.clone(),
                child: child.clone(),
            })?;
            let mut rec = HypothesisRecord::new(
                coefficient_id(child, parent),
                HypothesisKind::Coefficient,
                Some(coef.p_value),
                crate::graph::belief_to_cost(belief as i64)?,
            );
            rec.estimate = Some(coef.estimate);
            rec.std_error = Some(coef.std_error);
            records.push(rec);
        }
    }

    for child in &fit.order {
        let Some(eq) = fit.equations.get(child) else { continue };
        match residual_normality_test(eq) {
            NormalityOutcome::Tested(t) => {
                let mut rec = HypothesisRecord::new(
                    normality_id(child),
                    HypothesisKind::ResidualNormality,
                    Some(t.p_value),
                    DEFAULT_COST,
                );
                rec.estimate = Some(t.statistic);
                records.push(rec);
            }
            NormalityOutcome::SkippedSmallN { n } => {
                skipped.push(format!("{}: only {n} residuals", normality_id(child)));
            }
        }
    }

    let boot = covariance_bootstrap(graph, fit, data, spec.bootstrap_reps, seed)?;
    let p = boot.order.len();
    for i in 0..p {
        for j in i..p {
            let id = cov_eq_id(&boot.order[i], &boot.order[j]);
            match pair_outcome(&boot, i, j, spec.delta_rho) {
                Some(o) => {
                    let mut rec =
                        HypothesisRecord::new(id, HypothesisKind::CovEquivalence, Some(o.raw_p), DEFAULT_COST);
                    rec.estimate = Some(o.estimate);
                    rec.std_error = Some(o.std_error);
                    rec.threshold = Some(o.threshold);
                    records.push(rec);
                }
                None => {
                    log::warn!("{id}: zero-variance node, equivalence test excluded");
                    skipped.push(format!("{id}: zero-variance node"));
                }
            }
        }
    }

    let mf = model_fit_statistic(fit, data)?;
    let mut rec = HypothesisRecord::new(MODEL_FIT_ID.into(), HypothesisKind::ModelFit, Some(mf.p_value), DEFAULT_COST);
    rec.estimate = Some(mf.statistic);
    records.push(rec);

    records.push(HypothesisRecord::new(
        INTERSECTION_ID.into(),
        HypothesisKind::Intersection,
        None,
        DEFAULT_C0,
    ));

    Ok(HypothesisFamily {
        iteration,
        q_level: if q > 0.0 { q } else { DEFAULT_Q },
        equivalence: *spec,
        seed,
        records,
        skipped,
        notes: vec![
            "resid-norm records test H0: residuals are Gaussian; a small p-value flags non-normality.".into(),
            "model-fit tests H0: the implied covariance matches the data; a small p-value flags misfit.".into(),
            "W-BH/FDCR control assumes independent or PRDS test statistics on the true nulls; this is not verified.".into(),
        ],
        adjustment: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tost_centered_case() {
        let p1 = tost_pvalue(0.0, 1.0, 1.0);
        let p2 = tost_pvalue(0.0, 2.0, 1.0);
        let p3 = tost_pvalue(0.0, 4.0, 1.0);
        assert!(p1 < 0.5 && p2 < p1 && p3 < p2);
        assert_eq!(tost_pvalue(0.0, 1.0, 0.0), 0.0);
        assert_eq!(tost_pvalue(2.0, 1.0, 0.0), 1.0);
        // far outside the margin
        assert!(tost_pvalue(10.0, 1.0, 1.0) > 0.999);
        assert!(tost_pvalue(-10.0, 1.0, 1.0) > 0.999);
    }

    #[test]
    fn spec_validation() {
        assert!(EquivalenceSpec { delta_rho: 0.0, bootstrap_reps: 10 }.validate().is_err());
        assert!(EquivalenceSpec { delta_rho: 1.0, bootstrap_reps: 10 }.validate().is_err());
        assert!(EquivalenceSpec { delta_rho: 0.1, bootstrap_reps: 1 }.validate().is_err());
        assert!(EquivalenceSpec::default().validate().is_ok());
    }

    #[test]
    fn ids() {
        assert_eq!(coefficient_id("Perceived_Noise", "Wind_Speed"), "coef:Perceived_Noise<-Wind_Speed");
        assert_eq!(cov_eq_id("Wind_Speed", "Perceived_Noise"), "cov-eq:Wind_Speed,Perceived_Noise");
        assert_eq!(normality_id("Energy_Yield"), "resid-norm:Energy_Yield");
        assert_eq!(intercept_id("M"), "coef:M<-(intercept)");
    }
}
