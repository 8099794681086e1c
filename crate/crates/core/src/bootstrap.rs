//! Resampling machinery: deterministic substreams, permutation screening of
//! pairwise correlations, and the nested bootstrap for "parent contributes
//! nothing" tests.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{moment_summary, Dataset};
use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::multiplicity::{bh_adjust, by_adjust, PValueVector};
use crate::scm::LinearScm;

pub const DEFAULT_OUTER_REPS: usize = 999;

/// Below this many outer replicates p-values are too coarse to be useful.
pub const MIN_PVALUE_REPS: usize = 100;

/// Seed of the substream named `label` under `master_seed`: the first eight
/// bytes (little endian) of SHA-256 over the seed's little-endian bytes
/// followed by the UTF-8 label.
pub fn derive_substream(master_seed: u64, label: &str) -> u64 {
    debug_assert!(!label.is_empty(), "substream label must be non-empty");
    let digest = Sha256::new()
        .chain_update(master_seed.to_le_bytes())
        .chain_update(label.as_bytes())
        .finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn substream_rng(master_seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_substream(master_seed, label))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RowBootstrap,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplingPlan {
    pub reps_outer: usize,
    /// 0 disables nesting.
    pub reps_inner: usize,
    pub master_seed: u64,
    pub scheme: Scheme,
}

impl Default for ResamplingPlan {
    fn default() -> Self {
        Self {
            reps_outer: DEFAULT_OUTER_REPS,
            reps_inner: 0,
            master_seed: 0,
            scheme: Scheme::Permutation,
        }
    }
}

impl ResamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.reps_outer == 0 {
            return Err(Error::InvalidParameter("reps_outer must be positive".into()));
        }
        if self.reps_outer < MIN_PVALUE_REPS {
            log::warn!(
                "only {} resamples; p-values are floored at {:.3}",
                self.reps_outer,
                1.0 / (self.reps_outer as f64 + 1.0)
            );
        }
        Ok(())
    }
}

/// Add-one Monte Carlo p-value: never exactly 0 or 1 would require
/// `exceed == reps`, which yields 1.
pub fn add_one_pvalue(exceed: usize, reps: usize) -> f64 {
    (1.0 + exceed as f64) / (reps as f64 + 1.0)
}

fn standardize(col: &[f64]) -> Option<Vec<f64>> {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss <= 0.0 {
        return None;
    }
    let scale = ss.sqrt();
    Some(col.iter().map(|v| (v - mean) / scale).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPValue {
    pub a: String,
    pub b: String,
    pub r: f64,
    pub raw_p: f64,
}

impl PairPValue {
    pub fn id(&self) -> String {
        format!("pair:{},{}", self.a, self.b)
    }
}

/// Resampling p-value for "no correlation" on every column pair (upper
/// triangle, dataset column order). Pairs involving a zero-variance column
/// are skipped.
pub fn pairwise_r2_pvalues(data: &Dataset, plan: &ResamplingPlan) -> Result<Vec<PairPValue>> {
    plan.validate()?;
    let names = data.names();
    let std_cols: Vec<Option<Vec<f64>>> = names
        .iter()
        .map(|n| data.column(n).map(standardize))
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            match (&std_cols[i], &std_cols[j]) {
                (Some(_), Some(_)) => pairs.push((i, j)),
                _ => log::warn!("skipping degenerate pair ({}, {})", names[i], names[j]),
            }
        }
    }
    let out = pairs
        .par_iter()
        .map(|&(i, j)| {
            let x = std_cols[i].as_ref().expect("checked");
            let y = std_cols[j].as_ref().expect("checked");
            let label = format!("pair:{},{}", names[i], names[j]);
            let mut rng = substream_rng(plan.master_seed, &label);
            let r = dot(x, y);
            let exceed = match plan.scheme {
                Scheme::Permutation => permutation_exceedances(x, y, r, plan.reps_outer, &mut rng),
                Scheme::RowBootstrap => bootstrap_exceedances(x, y, r, plan.reps_outer, &mut rng),
            };
            PairPValue {
                a: names[i].clone(),
                b: names[j].clone(),
                r: r.clamp(-1.0, 1.0),
                raw_p: add_one_pvalue(exceed, plan.reps_outer),
            }
        })
        .collect();
    Ok(out)
}

/// Counts permutations of `y` whose R^2 with `x` reaches the observed one.
/// `x` and `y` are standardized to unit norm, so the dot product is r.
fn permutation_exceedances<R: Rng>(x: &[f64], y: &[f64], r_obs: f64, reps: usize, rng: &mut R) -> usize {
    let r2 = r_obs * r_obs;
    let mut perm = y.to_vec();
    (0..reps)
        .filter(|_| {
            perm.shuffle(rng);
            let r = dot(x, &perm);
            r * r >= r2
        })
        .count()
}

/// Shift-method bootstrap: resample rows jointly and count centred replicates
/// whose squared deviation reaches the observed R^2.
fn bootstrap_exceedances<R: Rng>(x: &[f64], y: &[f64], r_obs: f64, reps: usize, rng: &mut R) -> usize {
    let n = x.len();
    let r2 = r_obs * r_obs;
    (0..reps)
        .filter(|_| {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for _ in 0..n {
                let k = rng.random_range(0..n);
                let (a, b) = (x[k], y[k]);
                sx += a;
                sy += b;
                sxx += a * a;
                syy += b * b;
                sxy += a * b;
            }
            let nf = n as f64;
            let cxy = sxy - sx * sy / nf;
            let cxx = sxx - sx * sx / nf;
            let cyy = syy - sy * sy / nf;
            let r = if cxx > 0.0 && cyy > 0.0 { cxy / (cxx * cyy).sqrt() } else { 0.0 };
            (r - r_obs).powi(2) >= r2
        })
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreenAdjust {
    Bh,
    By,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRow {
    pub a: String,
    pub b: String,
    pub r: f64,
    pub raw_p: f64,
    pub adjusted_p: f64,
}

/// Correlation matrix plus adjusted pairwise p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningTable {
    pub names: Vec<String>,
    pub corr: Vec<Vec<f64>>,
    pub adjust: ScreenAdjust,
    pub reps: usize,
    pub pairs: Vec<ScreenRow>,
}

impl ScreeningTable {
    pub fn pair(&self, a: &str, b: &str) -> Option<&ScreenRow> {
        self.pairs
            .iter()
            .find(|r| (r.a == a && r.b == b) || (r.a == b && r.b == a))
    }
}

pub fn screen(data: &Dataset, plan: &ResamplingPlan, adjust: ScreenAdjust) -> Result<ScreeningTable> {
    let moments = moment_summary(data)?;
    let pairs = pairwise_r2_pvalues(data, plan)?;
    let rows = if pairs.is_empty() {
        Vec::new()
    } else {
        let pv = PValueVector::unweighted(pairs.iter().map(|p| (p.id(), p.raw_p)))?;
        let res = match adjust {
            ScreenAdjust::Bh => bh_adjust(&pv, 0.05)?,
            ScreenAdjust::By => by_adjust(&pv, 0.05)?,
        };
        pairs
            .into_iter()
            .map(|p| ScreenRow {
                adjusted_p: res.adjusted[&p.id()],
                a: p.a,
                b: p.b,
                r: p.r,
                raw_p: p.raw_p,
            })
            .collect()
    };
    Ok(ScreeningTable {
        names: moments.names,
        corr: moments.corr,
        adjust,
        reps: plan.reps_outer,
        pairs: rows,
    })
}

/// Row-major sample of `p` columns with precomputed centring.
pub(crate) struct RowSample {
    pub p: usize,
    pub n: usize,
    pub rows: Vec<f64>,
    pub center: Vec<f64>,
}

impl RowSample {
    pub fn new(data: &Dataset, names: &[String]) -> Result<Self> {
        let p = names.len();
        let n = data.n();
        let mut rows = data.row_major(names)?;
        let center: Vec<f64> = (0..p)
            .map(|j| (0..n).map(|i| rows[i * p + j]).sum::<f64>() / n as f64)
            .collect();
        for i in 0..n {
            for j in 0..p {
                rows[i * p + j] -= center[j];
            }
        }
        Ok(Self { p, n, rows, center })
    }

    /// Mean and (n-1) covariance of a row resample drawn from `rng`.
    pub fn resample_moments<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, DMatrix<f64>) {
        let (p, n) = (self.p, self.n);
        let mut sum = vec![0.0; p];
        let mut cross = vec![0.0; p * p];
        for _ in 0..n {
            let k = rng.random_range(0..n);
            let row = &self.rows[k * p..(k + 1) * p];
            for a in 0..p {
                sum[a] += row[a];
                let ra = row[a];
                let base = a * p;
                for b in a..p {
                    cross[base + b] += ra * row[b];
                }
            }
        }
        let nf = n as f64;
        let mean_c: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let mut cov = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let v = (cross[a * p + b] - nf * mean_c[a] * mean_c[b]) / (nf - 1.0);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let mean = mean_c.iter().zip(&self.center).map(|(m, c)| m + c).collect();
        (mean, cov)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionTest {
    pub parent: String,
    pub child: String,
    pub estimate: f64,
    /// Inner-bootstrap p-value on the observed data.
    pub raw_p: f64,
    /// BH-adjusted across all edges on the observed data.
    pub adjusted_p: f64,
    /// Mean BH-adjusted p-value over outer replicates.
    pub outer_mean_adjusted_p: f64,
    /// Fraction of outer replicates in which the edge is rejected at `q`.
    pub outer_rejection_rate: f64,
}

fn inner_bootstrap_pvalues<R: Rng>(
    graph: &CausalGraph,
    order: &[String],
    edges: &[(usize, usize)],
    sample: &RowSample,
    reps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut low = vec![0usize; edges.len()];
    let mut high = vec![0usize; edges.len()];
    let mut used = 0usize;
    for _ in 0..reps {
        let (mean, cov) = sample.resample_moments(rng);
        let Ok(scm) = LinearScm::from_moments(graph, order, &mean, &cov) else {
            continue;
        };
        used += 1;
        for (e, &(parent, child)) in edges.iter().enumerate() {
            let slope = scm.parents[child]
                .iter()
                .find(|(k, _)| *k == parent)
                .map(|(_, b)| *b)
                .unwrap_or(0.0);
            if slope <= 0.0 {
                low[e] += 1;
            }
            if slope >= 0.0 {
                high[e] += 1;
            }
        }
    }
    low.iter()
        .zip(&high)
        .map(|(&l, &h)| (2.0 * add_one_pvalue(l.min(h), used)).min(1.0))
        .collect()
}

/// Nested bootstrap: the inner loop turns resampled slopes into a p-value
/// per edge, the outer loop resamples the data and repeats the inner loop
/// plus BH adjustment, giving a distribution of adjusted p-values.
pub fn parent_contribution_test(
    graph: &CausalGraph,
    data: &Dataset,
    plan: &ResamplingPlan,
    q: f64,
) -> Result<Vec<ContributionTest>> {
    if plan.reps_inner == 0 {
        return Err(Error::InvalidParameter(
            "nested bootstrap requires reps_inner > 0".into(),
        ));
    }
    plan.validate()?;
    let order = graph.topological_order();
    let index: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let edge_list: Vec<_> = graph.edges().collect();
    if edge_list.is_empty() {
        return Ok(Vec::new());
    }
    let edges: Vec<(usize, usize)> = edge_list
        .iter()
        .map(|e| (index[e.parent.as_str()], index[e.child.as_str()]))
        .collect();
    let ids: Vec<String> = edge_list.iter().map(|e| format!("{}->{}", e.parent, e.child)).collect();
    let sample = RowSample::new(data, &order)?;
    let observed = moment_summary(&data.select(&order)?)?;
    let fitted = LinearScm::from_moments(graph, &order, &observed.mean, &observed.cov_matrix())?;

    let adjust = |pvals: &[f64]| -> Result<Vec<f64>> {
        let pv = PValueVector::unweighted(ids.iter().cloned().zip(pvals.iter().copied()))?;
        let res = bh_adjust(&pv, q)?;
        Ok(ids.iter().map(|id| res.adjusted[id]).collect())
    };

    let mut rng = substream_rng(plan.master_seed, "nested:point");
    let raw = inner_bootstrap_pvalues(graph, &order, &edges, &sample, plan.reps_inner, &mut rng);
    let adjusted = adjust(&raw)?;

    let outer: Vec<Vec<f64>> = (0..plan.reps_outer)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream_rng(plan.master_seed, &format!("nested:outer:{r}"));
            let idx: Vec<usize> = (0..sample.n).map(|_| rng.random_range(0..sample.n)).collect();
            let mut rows = Vec::with_capacity(sample.rows.len());
            for &k in &idx {
                rows.extend_from_slice(&sample.rows[k * sample.p..(k + 1) * sample.p]);
            }
            let resampled = RowSample {
                p: sample.p,
                n: sample.n,
                rows,
                center: sample.center.clone(),
            };
            let pvals = inner_bootstrap_pvalues(graph, &order, &edges, &resampled, plan.reps_inner, &mut rng);
            adjust(&pvals)
        })
        .collect::<Result<_>>()?;

    let reps = outer.len() as f64;
    Ok(edge_list
        .iter()
        .zip(&edges)
        .enumerate()
        .map(|(e, (edge, &(parent, child)))| {
            let estimate = fitted.parents[child]
                .iter()
                .find(|(k, _)| *k == parent)
                .map(|(_, b)| *b)
                .unwrap_or(0.0);
            ContributionTest {
                parent: edge.parent.clone(),
                child: edge.child.clone(),
                estimate,
                raw_p: raw[e],
                adjusted_p: adjusted[e],
                outer_mean_adjusted_p: outer.iter().map(|v| v[e]).sum::<f64>() / reps,
                outer_rejection_rate: outer.iter().filter(|v| v[e] <= q).count() as f64 / reps,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn substreams_are_stable_and_distinct() {
        assert_eq!(derive_substream(7, "pair:A,B"), derive_substream(7, "pair:A,B"));
        assert_ne!(derive_substream(7, "pair:A,B"), derive_substream(7, "pair:A,C"));
        assert_ne!(derive_substream(7, "pair:A,B"), derive_substream(8, "pair:A,B"));
    }

    #[test]
    fn add_one_never_zero() {
        assert_eq!(add_one_pvalue(0, 999), 0.001);
        assert_eq!(add_one_pvalue(999, 999), 1.0);
    }

    #[test]
    fn permutation_preserves_multiset() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<f64> = (0..50).map(|i| (i * i % 17) as f64).collect();
        let mut perm = y.clone();
        perm.shuffle(&mut rng);
        let mut a = y.clone();
        let mut b = perm.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        assert_ne!(perm, y);
    }

    fn dataset(n: usize, seed: u64, rho: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nrm = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..n).map(|_| nrm.sample(&mut rng)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| rho * v + (1.0 - rho * rho).sqrt() * nrm.sample(&mut rng))
            .collect();
        Dataset::new(vec![("x".into(), x), ("y".into(), y)]).unwrap()
    }

    #[test]
    fn strong_dependence_hits_floor() {
        let d = dataset(2000, 2, 0.5);
        for scheme in [Scheme::Permutation, Scheme::RowBootstrap] {
            let plan = ResamplingPlan {
                reps_outer: 199,
                scheme,
                master_seed: 3,
                ..Default::default()
            };
            let p = pairwise_r2_pvalues(&d, &plan).unwrap();
            assert_eq!(p.len(), 1);
            assert_eq!(p[0].raw_p, 1.0 / 200.0);
        }
    }

    #[test]
    fn degenerate_pairs_are_skipped() {
        let d = Dataset::new(vec![
            ("x".into(), vec![1.0, 2.0, 3.0, 4.0]),
            ("k".into(), vec![1.0; 4]),
            ("y".into(), vec![2.0, 1.0, 4.0, 3.0]),
        ])
        .unwrap();
        let plan = ResamplingPlan {
            reps_outer: 100,
            ..Default::default()
        };
        let p = pairwise_r2_pvalues(&d, &plan).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].a.as_str(), p[0].b.as_str()), ("x", "y"));
    }

    #[test]
    fn nested_bootstrap_separates_real_and_null_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let nrm = Normal::new(0.0, 1.0).unwrap();
        let n = 300;
        let a: Vec<f64> = (0..n).map(|_| nrm.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| nrm.sample(&mut rng)).collect();
        let c: Vec<f64> = a.iter().map(|v| v + 0.5 * nrm.sample(&mut rng)).collect();
        let d = Dataset::new(vec![("a".into(), a), ("b".into(), b), ("c".into(), c)]).unwrap();
        let g = CausalGraph::from_parts(["a", "b", "c"], [Edge::new("a", "c", 3), Edge::new("b", "c", 1)], 0).unwrap();
        let plan = ResamplingPlan {
            reps_outer: 20,
            reps_inner: 99,
            master_seed: 1,
            scheme: Scheme::RowBootstrap,
        };
        let res = parent_contribution_test(&g, &d, &plan, 0.05).unwrap();
        let ac = res.iter().find(|r| r.parent == "a").unwrap();
        let bc = res.iter().find(|r| r.parent == "b").unwrap();
        assert!(ac.adjusted_p <= 0.05 && ac.outer_rejection_rate > 0.9);
        assert!(bc.raw_p > 0.05 || bc.outer_rejection_rate < 0.5);
        assert!(res.iter().all(|r| r.raw_p > 0.0 && r.raw_p <= 1.0));

        let again = parent_contribution_test(&g, &d, &plan, 0.05).unwrap();
        assert_eq!(res, again);
        let no_inner = ResamplingPlan { reps_inner: 0, ..plan };
        assert!(parent_contribution_test(&g, &d, &no_inner, 0.05).is_err());
    }
}
