//! Projects, iteration history and persistence for the co-design loop.

mod export;
mod store;

pub use export::{export_dot, fmt_g, report_json, round_json, round_sig, to_stable_json, write_fit_report, DotView, REPORT_DIGITS};
pub use store::{dataset_hash, ProjectStore};

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::bootstrap::derive_substream;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::{build_family, EquivalenceSpec, HypothesisFamily, HypothesisRecord, DEFAULT_BOOTSTRAP_REPS, DEFAULT_DELTA_RHO, MODEL_FIT_ID};
use crate::graph::{CausalGraph, Edge};
use crate::multiplicity::{fdcr_adjust, IntersectionMethod, DEFAULT_C0, DEFAULT_Q};
use crate::scm::{fit_scm, model_fit_statistic, ChiSquareTest, ScmFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub q: f64,
    pub delta_rho: f64,
    /// Bootstrap replicates for the covariance equivalence tests.
    pub reps: usize,
    pub master_seed: u64,
    pub intersection_method: IntersectionMethod,
    pub c0: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            q: DEFAULT_Q,
            delta_rho: DEFAULT_DELTA_RHO,
            reps: DEFAULT_BOOTSTRAP_REPS,
            master_seed: 0,
            intersection_method: IntersectionMethod::default(),
            c0: DEFAULT_C0,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if !(self.c0.is_finite() && self.c0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("c0 must be non-negative, got {}", self.c0)));
        }
        self.equivalence().validate()
    }

    pub fn equivalence(&self) -> EquivalenceSpec {
        EquivalenceSpec {
            delta_rho: self.delta_rho,
            bootstrap_reps: self.reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRef {
    /// SHA-256 of the canonical CSV text.
    pub sha256: String,
    pub n: usize,
    pub columns: Vec<String>,
}

impl DatasetRef {
    pub fn of(data: &Dataset) -> Result<Self> {
        Ok(Self {
            sha256: dataset_hash(data)?,
            n: data.n(),
            columns: data.names().to_vec(),
        })
    }

    pub fn file_name(&self) -> String {
        format!("data-{}.csv", self.sha256)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSnapshot {
    pub index: usize,
    pub graph_frozen: CausalGraph,
    pub fit: ScmFit,
    pub family: HypothesisFamily,
    pub model_fit: ChiSquareTest,
    pub created_at: DateTime<Utc>,
    pub note: String,
}

impl IterationSnapshot {
    pub fn record(&self, id: &str) -> Option<&HypothesisRecord> {
        self.family.record(id)
    }

    pub fn q(&self) -> f64 {
        self.family.q_level
    }
}

/// Fits, builds and adjusts one iteration's family without touching any
/// project state.
pub fn compute_iteration(
    index: usize,
    graph: &CausalGraph,
    data: &Dataset,
    settings: &Settings,
    note: &str,
    created_at: DateTime<Utc>,
) -> Result<IterationSnapshot> {
    settings.validate()?;
    if graph.node_count() == 0 {
        return Err(Error::InvalidParameter("graph has no nodes".into()));
    }
    let fit = fit_scm(graph, data)?;
    let seed = derive_substream(settings.master_seed, &format!("iteration:{index}"));
    let mut family = build_family(graph, &fit, data, &settings.equivalence(), settings.q, seed, index)?;
    fdcr_adjust(&mut family, settings.q, settings.intersection_method, settings.c0)?;
    let model_fit = model_fit_statistic(&fit, data)?;
    Ok(IterationSnapshot {
        index,
        graph_frozen: graph.clone(),
        fit,
        family,
        model_fit,
        created_at,
        note: note.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub dataset_ref: DatasetRef,
    graph: CausalGraph,
    iterations: Vec<IterationSnapshot>,
    pub settings: Settings,
}

impl Project {
    pub fn new(id: impl Into<String>, data: &Dataset, settings: Settings) -> Result<Self> {
        settings.validate()?;
        let graph = CausalGraph::with_nodes(data.names().iter().cloned())?;
        Ok(Self {
            id: id.into(),
            dataset_ref: DatasetRef::of(data)?,
            graph,
            iterations: Vec::new(),
            settings,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn iterations(&self) -> &[IterationSnapshot] {
        &self.iterations
    }

    pub fn iteration(&self, index: usize) -> Result<&IterationSnapshot> {
        index
            .checked_sub(1)
            .and_then(|i| self.iterations.get(i))
            .ok_or(Error::UnknownIteration(index))
    }

    pub fn last_iteration(&self) -> Option<&IterationSnapshot> {
        self.iterations.last()
    }

    /// Replaces the current graph. Every node must be a dataset column; the
    /// stored version always moves forward.
    pub fn set_graph(&mut self, graph: CausalGraph) -> Result<()> {
        for name in graph.node_names() {
            if !self.dataset_ref.columns.iter().any(|c| c == name) {
                return Err(Error::MissingColumn(name.to_string()));
            }
        }
        let floor = self
            .iterations
            .last()
            .map_or(self.graph.version(), |s| s.graph_frozen.version().max(self.graph.version()));
        let version = if graph == self.graph { graph.version() } else { graph.version().max(floor + 1) };
        self.graph = graph.with_version(version);
        Ok(())
    }

    pub fn run_iteration(&mut self, data: &Dataset, note: &str) -> Result<&IterationSnapshot> {
        self.run_iteration_at(data, note, Utc::now())
    }

    pub fn run_iteration_at(&mut self, data: &Dataset, note: &str, created_at: DateTime<Utc>) -> Result<&IterationSnapshot> {
        self.check_dataset(data)?;
        let index = self.iterations.len() + 1;
        let snapshot = compute_iteration(index, &self.graph, data, &self.settings, note, created_at)?;
        self.iterations.push(snapshot);
        Ok(self.iterations.last().expect("just pushed"))
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.n() != self.dataset_ref.n || data.names() != self.dataset_ref.columns.as_slice() {
            return Err(Error::InvalidParameter("dataset does not match the project".into()));
        }
        Ok(())
    }

    /// Checks the invariants that deserialisation alone cannot.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.iterations.iter().enumerate() {
            if s.index != i + 1 {
                return Err(Error::History(format!("iteration at position {} has index {}", i + 1, s.index)));
            }
        }
        if let Some(last) = self.iterations.last() {
            if self.graph.version() < last.graph_frozen.version() {
                return Err(Error::History("current graph is older than the last snapshot".into()));
            }
        }
        self.settings.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let project: Project = serde_json::from_str(text)?;
        project.validate()?;
        Ok(project)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn diff(&self, from: usize, to: usize) -> Result<IterationDiff> {
        Ok(diff(self.iteration(from)?, self.iteration(to)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    pub raw_p: Option<f64>,
    pub adjusted_p: Option<f64>,
    pub rejected: Option<bool>,
}

impl From<&HypothesisRecord> for RecordState {
    fn from(r: &HypothesisRecord) -> Self {
        Self {
            estimate: r.estimate,
            raw_p: r.raw_p,
            adjusted_p: r.adjusted_p,
            rejected: r.rejected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDiff {
    pub id: String,
    pub before: Option<RecordState>,
    pub after: Option<RecordState>,
    pub rejection_changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefChange {
    pub parent: String,
    pub child: String,
    pub before: u8,
    pub after: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiff {
    pub from: usize,
    pub to: usize,
    pub edges_added: Vec<Edge>,
    pub edges_removed: Vec<Edge>,
    pub belief_changes: Vec<BeliefChange>,
    pub records: Vec<RecordDiff>,
    pub model_fit_p: (f64, f64),
}

pub fn diff(from: &IterationSnapshot, to: &IterationSnapshot) -> IterationDiff {
    let (a, b) = (&from.graph_frozen, &to.graph_frozen);
    let edges_added = b.edges().filter(|e| !a.has_edge(&e.parent, &e.child)).collect();
    let edges_removed = a.edges().filter(|e| !b.has_edge(&e.parent, &e.child)).collect();
    let belief_changes = b
        .edges()
        .filter_map(|e| {
            let before = a.belief(&e.parent, &e.child)?;
            (before != e.belief).then(|| BeliefChange {
                parent: e.parent.clone(),
                child: e.child.clone(),
                before,
                after: e.belief,
            })
        })
        .collect();
    let ids: BTreeSet<&str> = from
        .family
        .records
        .iter()
        .chain(&to.family.records)
        .map(|r| r.id.as_str())
        .collect();
    let records = ids
        .into_iter()
        .map(|id| {
            let before = from.record(id).map(RecordState::from);
            let after = to.record(id).map(RecordState::from);
            let rejection_changed = before.and_then(|s| s.rejected) != after.and_then(|s| s.rejected);
            RecordDiff {
                id: id.to_string(),
                before,
                after,
                rejection_changed,
            }
        })
        .collect();
    let mf = |s: &IterationSnapshot| s.record(MODEL_FIT_ID).and_then(|r| r.raw_p).unwrap_or(s.model_fit.p_value);
    IterationDiff {
        from: from.index,
        to: to.index,
        edges_added,
        edges_removed,
        belief_changes,
        records,
        model_fit_p: (mf(from), mf(to)),
    }
}
