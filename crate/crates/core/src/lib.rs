//! Adaptive sequence submodular maximization.
//!
//! Items are vertices of a directed graph (or ordered hypergraph); choosing a
//! sequence of vertices induces the edges whose endpoints appear in order, and
//! the value of a sequence is a set function of those edges and of their
//! states. States are revealed one vertex at a time, so good policies adapt.
//!
//! - [`graph`]: digraphs, ordered hypergraphs, induced and valid edge sets.
//! - [`states`]: realizations, edge-state rules, priors and posteriors.
//! - [`utility`]: probabilistic coverage and linear utilities, expected gains.
//! - [`policy`]: adaptive and non-adaptive sequence greedy, baselines.
//! - [`oracle`]: exhaustive optimal values, γ estimation, bound checks, DkS reduction.
//! - [`ingest`]: graphs from purchase logs and navigation paths.
//! - [`eval`]: accuracy, sequence and relevance metrics and the replay harness.

pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod oracle;
pub mod policy;
pub mod states;
pub mod utility;

pub use error::{Error, Result};
pub use graph::{EdgeId, OrderedHypergraph, Sequence, SequenceStructure, VertexId, WeightedDigraph};
pub use states::{EdgeStateRule, EdgeStates, PartialRealization, Realization, State, StateDistribution};
