//! Statistical core of the causal co-design workflow: causal graphs with
//! belief scores, linear SCM fitting, the per-iteration hypothesis family,
//! cost-weighted multiplicity control and resampling utilities.

pub mod bootstrap;
pub mod data;
pub mod dist;
pub mod error;
pub mod family;
pub mod graph;
pub mod multiplicity;
pub mod scm;
pub mod session;
pub mod toy;

pub use bootstrap::{derive_substream, ResamplingPlan, Scheme};
pub use data::{moment_summary, Dataset, MomentSummary};
pub use error::{Error, Result};
pub use family::{build_family, EquivalenceSpec, HypothesisFamily, HypothesisKind, HypothesisRecord};
pub use graph::{CausalGraph, Edge};
pub use multiplicity::{fdcr_adjust, IntersectionMethod, Method, PValueVector};
pub use scm::{fit_scm, ScmFit};
pub use session::{IterationSnapshot, Project, ProjectStore, Settings};
