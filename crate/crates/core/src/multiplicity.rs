//! Multiplicity adjustment: BH, BY, weighted BH, weighted Simes and Fisher
//! intersection tests, FDCR adjustment over m+1 p-values, and Monte Carlo
//! estimation of the family error measures.
//!
//! All sorts break ties in p by record id, so results never depend on input
//! order.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::substream_rng;
use crate::dist::{chi2_sf, normal_sf};
use crate::error::{Error, Result};
use crate::family::{HypothesisFamily, HypothesisKind};

pub const DEFAULT_Q: f64 = 0.05;

/// Cost of the intersection hypothesis when none is provided.
pub const DEFAULT_C0: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueEntry {
    pub id: String,
    pub raw_p: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueVector {
    entries: Vec<PValueEntry>,
}

impl PValueVector {
    pub fn new(entries: Vec<PValueEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("p-value vector is empty".into()));
        }
        let mut ids = BTreeSet::new();
        for e in &entries {
            if !(0.0..=1.0).contains(&e.raw_p) {
                return Err(Error::InvalidParameter(format!(
                    "p-value of `{}` is {}, outside [0, 1]",
                    e.id, e.raw_p
                )));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "weight of `{}` must be finite and positive, got {}",
                    e.id, e.weight
                )));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate id `{}`", e.id)));
            }
        }
        Ok(Self { entries })
    }

    pub fn unweighted<I, S>(pvals: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self::new(
            pvals
                .into_iter()
                .map(|(id, raw_p)| PValueEntry {
                    id: id.into(),
                    raw_p,
                    weight: 1.0,
                })
                .collect(),
        )
    }

    pub fn weighted<I, S>(pvals: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64, f64)>,
        S: Into<String>,
    {
        Self::new(
            pvals
                .into_iter()
                .map(|(id, raw_p, weight)| PValueEntry {
                    id: id.into(),
                    raw_p,
                    weight,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[PValueEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices ascending by (p, id).
    fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            ea.raw_p.total_cmp(&eb.raw_p).then_with(|| ea.id.cmp(&eb.id))
        });
        idx
    }

    /// Weights divided by their maximum. The procedures are scale invariant,
    /// and equal weights become exactly 1.0 so partial sums are exact.
    fn normalized_weights(&self) -> Vec<f64> {
        let max = self.entries.iter().map(|e| e.weight).fold(0.0, f64::max);
        self.entries.iter().map(|e| e.weight / max).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bh,
    By,
    Wbh,
    Fdcr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionMethod {
    #[default]
    WeightedSimes,
    Fisher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentResult {
    pub method: Method,
    pub q: f64,
    pub adjusted: BTreeMap<String, f64>,
    pub rejected: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersection_p: Option<f64>,
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {q}")))
    }
}

/// Step-up adjusted values in sorted order from per-rank factors:
/// `adj_(j) = min(1, min_{k >= j} p_(k) * factor_k)`.
fn step_up(sorted_p: &[f64], factor: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut adj = vec![0.0; sorted_p.len()];
    let mut running = f64::INFINITY;
    for k in (0..sorted_p.len()).rev() {
        running = running.min(sorted_p[k] * factor(k));
        adj[k] = running.min(1.0);
    }
    adj
}

fn finish(pv: &PValueVector, order: &[usize], sorted_adj: Vec<f64>, method: Method, q: f64) -> AdjustmentResult {
    let mut adjusted = BTreeMap::new();
    let mut rejected = BTreeSet::new();
    for (&i, a) in order.iter().zip(sorted_adj) {
        let id = pv.entries[i].id.clone();
        if a <= q {
            rejected.insert(id.clone());
        }
        adjusted.insert(id, a);
    }
    AdjustmentResult {
        method,
        q,
        adjusted,
        rejected,
        intersection_p: None,
    }
}

fn bh_sorted(pv: &PValueVector) -> (Vec<usize>, Vec<f64>) {
    let order = pv.sorted_indices();
    let m = order.len() as f64;
    let sorted: Vec<f64> = order.iter().map(|&i| pv.entries[i].raw_p).collect();
    let adj = step_up(&sorted, |k| m / (k + 1) as f64);
    (order, adj)
}

/// Benjamini-Hochberg linear step-up; weights are ignored.
pub fn bh_adjust(pv: &PValueVector, q: f64) -> Result<AdjustmentResult> {
    check_q(q)?;
    let (order, adj) = bh_sorted(pv);
    Ok(finish(pv, &order, adj, Method::Bh, q))
}

/// Benjamini-Yekutieli: BH inflated by `c(m) = sum_{i<=m} 1/i`.
pub fn by_adjust(pv: &PValueVector, q: f64) -> Result<AdjustmentResult> {
    check_q(q)?;
    let c: f64 = (1..=pv.len()).map(|i| 1.0 / i as f64).sum();
    let (order, adj) = bh_sorted(pv);
    let adj = adj.into_iter().map(|a| (a * c).min(1.0)).collect();
    Ok(finish(pv, &order, adj, Method::By, q))
}

/// Weighted BH: with `W` the total weight and `W_j` the weight of the `j`
/// smallest p-values, rejects the first `max{j : p_(j) <= q W_j / W}`.
pub fn wbh_adjust(pv: &PValueVector, q: f64) -> Result<AdjustmentResult> {
    check_q(q)?;
    let (order, adj) = wbh_sorted(pv);
    Ok(finish(pv, &order, adj, Method::Wbh, q))
}

fn cumulative_weights(pv: &PValueVector, order: &[usize]) -> Vec<f64> {
    let w = pv.normalized_weights();
    let mut acc = 0.0;
    order
        .iter()
        .map(|&i| {
            acc += w[i];
            acc
        })
        .collect()
}

fn wbh_sorted(pv: &PValueVector) -> (Vec<usize>, Vec<f64>) {
    let order = pv.sorted_indices();
    let cum = cumulative_weights(pv, &order);
    let total = *cum.last().expect("non-empty");
    let sorted: Vec<f64> = order.iter().map(|&i| pv.entries[i].raw_p).collect();
    let adj = step_up(&sorted, |k| total / cum[k]);
    (order, adj)
}

/// Weighted Simes intersection p-value `min_j (sum c / sum_{i<=j} c_(i)) p_(j)`.
pub fn weighted_simes(pv: &PValueVector) -> f64 {
    let order = pv.sorted_indices();
    let cum = cumulative_weights(pv, &order);
    let total = *cum.last().expect("non-empty");
    order
        .iter()
        .zip(&cum)
        .map(|(&i, c)| pv.entries[i].raw_p * (total / c))
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Fisher's combination `-2 sum ln p` against chi-square with 2m df.
pub fn fisher_combine(pv: &PValueVector) -> FisherResult {
    let mut statistic = 0.0;
    for e in pv.entries() {
        let p = if e.raw_p <= 0.0 {
            log::warn!("p-value of `{}` is 0; flooring at {:e}", e.id, f64::MIN_POSITIVE);
            f64::MIN_POSITIVE
        } else {
            e.raw_p
        };
        statistic -= 2.0 * p.ln();
    }
    FisherResult {
        statistic,
        p_value: chi2_sf(statistic, 2.0 * pv.len() as f64),
    }
}

pub fn intersection_pvalue(pv: &PValueVector, method: IntersectionMethod) -> f64 {
    match method {
        IntersectionMethod::WeightedSimes => weighted_simes(pv),
        IntersectionMethod::Fisher => fisher_combine(pv).p_value,
    }
}

/// FDCR adjustment of a plain vector: the intersection p-value of the
/// vector is added under `intersection_id` with cost `c0` and W-BH is run on
/// all m+1 entries. With `c0 == 0` the intersection is left out, which is the
/// weighted-FDR special case.
pub fn fdcr_adjust_vector(
    pv: &PValueVector,
    q: f64,
    method: IntersectionMethod,
    c0: f64,
    intersection_id: &str,
) -> Result<AdjustmentResult> {
    check_q(q)?;
    if !(c0.is_finite() && c0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("C0 must be finite and >= 0, got {c0}")));
    }
    let p0 = intersection_pvalue(pv, method);
    let mut result = if c0 == 0.0 {
        wbh_adjust(pv, q)?
    } else {
        let mut entries = pv.entries().to_vec();
        entries.push(PValueEntry {
            id: intersection_id.to_string(),
            raw_p: p0,
            weight: c0,
        });
        wbh_adjust(&PValueVector::new(entries)?, q)?
    };
    result.method = Method::Fdcr;
    result.intersection_p = Some(p0);
    Ok(result)
}

/// FDCR adjustment of a hypothesis family. Writes the intersection raw p,
/// adjusted p-values and decisions back into the records.
pub fn fdcr_adjust(
    family: &mut HypothesisFamily,
    q: f64,
    method: IntersectionMethod,
    c0: f64,
) -> Result<AdjustmentResult> {
    let intersections: Vec<usize> = family
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.kind == HypothesisKind::Intersection)
        .map(|(i, _)| i)
        .collect();
    if intersections.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "family must have exactly one intersection record, found {}",
            intersections.len()
        )));
    }
    let mut entries = Vec::with_capacity(family.records.len());
    for r in family.records.iter().filter(|r| r.kind != HypothesisKind::Intersection) {
        let raw_p = r.raw_p.ok_or_else(|| Error::MissingRawP(r.id.clone()))?;
        entries.push(PValueEntry {
            id: r.id.clone(),
            raw_p,
            weight: r.cost,
        });
    }
    let pv = PValueVector::new(entries)?;
    let inter_id = family.records[intersections[0]].id.clone();
    let result = fdcr_adjust_vector(&pv, q, method, c0, &inter_id)?;

    for r in family.records.iter_mut() {
        if r.kind == HypothesisKind::Intersection {
            r.raw_p = result.intersection_p;
            r.cost = c0;
        }
        r.adjusted_p = result.adjusted.get(&r.id).copied();
        r.rejected = r.adjusted_p.map(|a| a <= q);
    }
    family.q_level = q;
    family.adjustment = Some(crate::family::AdjustmentInfo {
        method: Method::Fdcr,
        intersection_method: method,
        c0,
        q,
    });
    Ok(result)
}

/// Generic dispatch used by the `adjust` command.
pub fn adjust(pv: &PValueVector, method: Method, q: f64, c0: f64, intersection: IntersectionMethod) -> Result<AdjustmentResult> {
    match method {
        Method::Bh => bh_adjust(pv, q),
        Method::By => by_adjust(pv, q),
        Method::Wbh => wbh_adjust(pv, q),
        Method::Fdcr => fdcr_adjust_vector(pv, q, intersection, c0, crate::family::INTERSECTION_ID),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Procedure {
    Bh,
    By,
    Wbh,
    Fdcr { c0: f64, intersection: IntersectionMethod },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub m: usize,
    /// The first `m0` hypotheses are the true nulls.
    pub m0: usize,
    /// Mean shift of the z statistic for each false null; a single value is
    /// broadcast.
    pub effect_sizes: Vec<f64>,
    /// Per-hypothesis costs; empty means all 1.
    pub costs: Vec<f64>,
    /// Intersection cost used when evaluating the FDCR measure.
    pub c0: f64,
    pub q: f64,
    pub reps: usize,
    pub seed: u64,
}

/// Outcome counts of one simulated family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimulationTally {
    pub v: usize,
    pub r: usize,
    pub i_v: bool,
    pub i_r: bool,
    pub r0: bool,
    pub v0: bool,
    pub cost_v: f64,
    pub cost_r: f64,
    pub m0: usize,
    pub m: usize,
}

impl SimulationTally {
    fn ratio(num: f64, den: f64) -> f64 {
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn fdp(&self) -> f64 {
        Self::ratio(self.v as f64, self.r as f64)
    }

    pub fn weighted_fdp(&self) -> f64 {
        Self::ratio(self.cost_v, self.cost_r)
    }

    pub fn cost_fdp(&self, c0: f64) -> f64 {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        Self::ratio(c0 * b(self.v0) + self.cost_v, c0 * b(self.r0) + self.cost_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub mcse: f64,
}

impl Estimate {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            mcse: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub fdr: Estimate,
    pub wfdr: Estimate,
    pub fdcr: Estimate,
    pub strong_fwe: Estimate,
    pub weak_fwe: Estimate,
    pub reps: usize,
}

fn simulate_family<R: Rng>(config: &SimulationConfig, rng: &mut R) -> Vec<f64> {
    (0..config.m)
        .map(|i| {
            if i < config.m0 {
                rng.random::<f64>()
            } else {
                let k = i - config.m0;
                let effect = if config.effect_sizes.len() == 1 {
                    config.effect_sizes[0]
                } else {
                    config.effect_sizes[k]
                };
                let z = effect + crate::dist::normal_quantile(rng.random::<f64>().max(f64::MIN_POSITIVE));
                normal_sf(z)
            }
        })
        .collect()
}

/// Runs `procedure` on one family and tallies the outcome.
pub fn tally(procedure: Procedure, config: &SimulationConfig, pvals: &[f64]) -> Result<SimulationTally> {
    let costs: Vec<f64> = if config.costs.is_empty() {
        vec![1.0; config.m]
    } else {
        config.costs.clone()
    };
    let ids: Vec<String> = (0..config.m).map(|i| format!("h{i:06}")).collect();
    let pv = PValueVector::weighted(
        ids.iter()
            .zip(pvals)
            .zip(&costs)
            .map(|((id, &p), &c)| (id.clone(), p, c)),
    )?;
    let res = match procedure {
        Procedure::Bh => bh_adjust(&pv, config.q)?,
        Procedure::By => by_adjust(&pv, config.q)?,
        Procedure::Wbh => wbh_adjust(&pv, config.q)?,
        Procedure::Fdcr { c0, intersection } => {
            fdcr_adjust_vector(&pv, config.q, intersection, c0, crate::family::INTERSECTION_ID)?
        }
    };
    let mut t = SimulationTally {
        m0: config.m0,
        m: config.m,
        ..Default::default()
    };
    for (i, id) in ids.iter().enumerate() {
        if res.rejected.contains(id) {
            t.r += 1;
            t.cost_r += costs[i];
            if i < config.m0 {
                t.v += 1;
                t.cost_v += costs[i];
            }
        }
    }
    t.i_r = t.r > 0;
    t.i_v = t.v > 0;
    t.r0 = match procedure {
        Procedure::Fdcr { .. } => res.rejected.contains(crate::family::INTERSECTION_ID),
        // a rejected member implies the intersection is rejected
        _ => t.i_r,
    };
    t.v0 = t.r0 && config.m0 == config.m;
    Ok(t)
}

pub fn simulate_error_rates(procedure: Procedure, config: &SimulationConfig) -> Result<ErrorRates> {
    if config.m0 > config.m || config.m == 0 {
        return Err(Error::InvalidParameter("need 0 <= m0 <= m and m >= 1".into()));
    }
    if config.reps == 0 {
        return Err(Error::InvalidParameter("reps must be positive".into()));
    }
    let alts = config.m - config.m0;
    if alts > 0 && config.effect_sizes.len() != 1 && config.effect_sizes.len() != alts {
        return Err(Error::InvalidParameter(format!(
            "effect_sizes must have 1 or {alts} entries"
        )));
    }
    if !config.costs.is_empty() && config.costs.len() != config.m {
        return Err(Error::InvalidParameter(format!("costs must have {} entries", config.m)));
    }
    check_q(config.q)?;
    let tallies = (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream_rng(config.seed, &format!("sim:rep:{r}"));
            let pvals = simulate_family(config, &mut rng);
            tally(procedure, config, &pvals)
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: &dyn Fn(&SimulationTally) -> f64| Estimate::of(&tallies.iter().map(f).collect::<Vec<_>>());
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    Ok(ErrorRates {
        fdr: col(&|t| t.fdp()),
        wfdr: col(&|t| t.weighted_fdp()),
        fdcr: col(&|t| t.cost_fdp(config.c0)),
        strong_fwe: col(&|t| b(t.i_v)),
        weak_fwe: col(&|t| b(t.v0)),
        reps: config.reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(p: &[f64]) -> PValueVector {
        PValueVector::unweighted(p.iter().enumerate().map(|(i, &p)| (format!("h{i}"), p))).unwrap()
    }

    fn adjusted(r: &AdjustmentResult, n: usize) -> Vec<f64> {
        (0..n).map(|i| r.adjusted[&format!("h{i}")]).collect()
    }

    #[test]
    fn bh_examples() {
        let r = bh_adjust(&pv(&[1.0, 1.0, 1.0]), 0.05).unwrap();
        assert_eq!(adjusted(&r, 3), [1.0, 1.0, 1.0]);
        assert!(r.rejected.is_empty());

        let r = bh_adjust(&pv(&[0.03]), 0.05).unwrap();
        assert_eq!(adjusted(&r, 1), [0.03]);

        // hand step-up: 4/1*.01, 4/2*.02, 4/3*.03, 4/4*.04 -> all .04
        let r = bh_adjust(&pv(&[0.01, 0.02, 0.03, 0.04]), 0.05).unwrap();
        for a in adjusted(&r, 4) {
            assert!((a - 0.04).abs() < 1e-15);
        }
        assert_eq!(r.rejected.len(), 4);
    }

    #[test]
    fn by_examples() {
        let r = by_adjust(&pv(&[0.03]), 0.05).unwrap();
        assert_eq!(adjusted(&r, 1), [0.03]);
        let r = by_adjust(&pv(&[0.01, 0.02, 0.03, 0.04]), 0.05).unwrap();
        let c = 1.0 + 0.5 + 1.0 / 3.0 + 0.25;
        for a in adjusted(&r, 4) {
            assert!((a - 0.04 * c).abs() < 1e-12);
            assert!((a - 0.083_333_333_333).abs() < 1e-9);
        }
        assert!(r.rejected.is_empty());
    }

    #[test]
    fn wbh_hand_example() {
        let v = PValueVector::weighted([("a", 0.01, 1.0), ("b", 0.5, 99.0)]).unwrap();
        let r = wbh_adjust(&v, 0.05).unwrap();
        assert!(r.rejected.is_empty());
        // a: min(0.01 * 100/1, 0.5 * 100/100) = 0.5
        assert!((r.adjusted["a"] - 0.5).abs() < 1e-12);
        assert!((r.adjusted["b"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn simes_examples() {
        assert!((weighted_simes(&pv(&[0.02, 0.9])) - 0.04).abs() < 1e-15);
        assert_eq!(weighted_simes(&pv(&[0.37])), 0.37);
        assert_eq!(weighted_simes(&pv(&[1.0, 1.0, 1.0])), 1.0);
    }

    #[test]
    fn fisher_examples() {
        let f = fisher_combine(&pv(&[1.0, 1.0]));
        assert_eq!(f.statistic, 0.0);
        assert_eq!(f.p_value, 1.0);
        let f = fisher_combine(&pv(&[0.05]));
        assert!((f.statistic - 5.991464547107979).abs() < 1e-9);
        assert!((f.p_value - 0.05).abs() < 1e-12);
        let f = fisher_combine(&pv(&[0.0, 0.5]));
        assert!(f.statistic.is_finite());
        assert!(f.p_value < 1e-300);
    }

    #[test]
    fn vector_validation() {
        assert!(PValueVector::unweighted(Vec::<(String, f64)>::new()).is_err());
        assert!(PValueVector::unweighted([("a", 1.5)]).is_err());
        assert!(PValueVector::weighted([("a", 0.5, 0.0)]).is_err());
        assert!(PValueVector::weighted([("a", 0.5, f64::INFINITY)]).is_err());
        assert!(PValueVector::unweighted([("a", 0.5), ("a", 0.2)]).is_err());
        assert!(bh_adjust(&pv(&[0.5]), 1.0).is_err());
    }

    #[test]
    fn fdcr_with_tiny_costs_is_driven_by_intersection() {
        // member costs ~0: W-BH thresholds for members are ~0 until the
        // intersection (cost 1) enters the cumulative weight
        let p = [0.001, 0.002, 0.01, 0.2];
        let v = PValueVector::weighted(p.iter().enumerate().map(|(i, &p)| (format!("h{i}"), p, 1e-9))).unwrap();
        let r = fdcr_adjust_vector(&v, 0.05, IntersectionMethod::WeightedSimes, 1.0, "intersection").unwrap();
        let p0 = r.intersection_p.unwrap();
        assert!((p0 - 0.004).abs() < 1e-12);
        // once the intersection is rejected, members face threshold ~q
        // (weak-FWE behaviour: no protection for the sub-hypotheses)
        for (i, &pi) in p.iter().enumerate() {
            let id = format!("h{i}");
            assert_eq!(r.rejected.contains(&id), p0 <= 0.05 && pi <= 0.05, "{id}");
        }
        assert!(r.rejected.contains("intersection"));

        // intersection not rejected -> nothing is
        let v = PValueVector::weighted([("h0", 0.3, 1e-9), ("h1", 0.6, 1e-9)]).unwrap();
        let r = fdcr_adjust_vector(&v, 0.05, IntersectionMethod::WeightedSimes, 1.0, "intersection").unwrap();
        assert!(r.rejected.is_empty());
    }

    #[test]
    fn simulation_edge_cases() {
        let config = SimulationConfig {
            m: 10,
            m0: 0,
            effect_sizes: vec![3.0],
            costs: vec![],
            c0: 1.0,
            q: 0.05,
            reps: 200,
            seed: 1,
        };
        let r = simulate_error_rates(Procedure::Bh, &config).unwrap();
        assert_eq!(r.fdr.mean, 0.0);
        assert_eq!(r.strong_fwe.mean, 0.0);
        assert!(simulate_error_rates(Procedure::Bh, &SimulationConfig { m0: 11, ..config.clone() }).is_err());
        assert!(simulate_error_rates(Procedure::Bh, &SimulationConfig { reps: 0, ..config }).is_err());
    }
}
