//! Greedy sequence policies and the frequency baseline.
//!
//! Every greedy variant shares one engine: score each valid edge by its
//! expected marginal gain given the edge states observed so far, append the
//! missing vertices of the best edge, then observe what the feedback oracle
//! reveals about them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, OrderedHypergraph, Positions, Sequence, SequenceStructure, VertexId, WeightedDigraph};
use crate::states::{
    induce_edge_partial, EdgePosterior, EdgeStateRule, PartialRealization, Realization, State, VertexPrior,
};
use crate::utility::Utility;

/// Source of vertex states revealed after each append.
pub trait FeedbackOracle {
    fn reveal(&mut self, v: VertexId) -> Option<State>;
}

/// Reveals states from a fixed realization.
pub struct RealizationFeedback<'a> {
    phi: &'a Realization,
}

impl<'a> RealizationFeedback<'a> {
    pub fn new(phi: &'a Realization) -> Self {
        RealizationFeedback { phi }
    }
}

impl FeedbackOracle for RealizationFeedback<'_> {
    fn reveal(&mut self, v: VertexId) -> Option<State> {
        Some(self.phi.get(v))
    }
}

/// Reveals nothing; turns any greedy into its non-adaptive counterpart.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeverReveal;

impl FeedbackOracle for NeverReveal {
    fn reveal(&mut self, _v: VertexId) -> Option<State> {
        None
    }
}

/// Wraps a closure, e.g. a held-out user's observed behaviour.
pub struct FnFeedback<F>(pub F);

impl<F: FnMut(VertexId) -> Option<State>> FeedbackOracle for FnFeedback<F> {
    fn reveal(&mut self, v: VertexId) -> Option<State> {
        (self.0)(v)
    }
}

/// How exact ties between candidate edges are broken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Smallest edge id, i.e. lexicographic `(src, dst)` for digraphs.
    #[default]
    LowestId,
    HighestId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// The next step would exceed the budget.
    Budget,
    NoValidEdges,
    /// The path policy confirmed its target vertex.
    TargetReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub edge: EdgeId,
    pub delta: f64,
    pub appended: Vec<VertexId>,
    pub observed: Vec<(VertexId, State)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    sigma: Sequence,
    /// Length of the given prefix at the start of `sigma`.
    given: usize,
    steps: Vec<TraceStep>,
    final_psi: PartialRealization,
    stop: StopReason,
}

impl PolicyTrace {
    /// A trace for a precomputed sequence with no greedy steps.
    pub fn fixed(sigma: Sequence) -> Self {
        PolicyTrace {
            sigma,
            given: 0,
            steps: Vec::new(),
            final_psi: PartialRealization::new(),
            stop: StopReason::Budget,
        }
    }

    pub fn sigma(&self) -> &Sequence {
        &self.sigma
    }

    pub fn given_len(&self) -> usize {
        self.given
    }

    /// The vertices the policy appended after the given prefix.
    pub fn appended(&self) -> &[VertexId] {
        &self.sigma.as_slice()[self.given..]
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn final_psi(&self) -> &PartialRealization {
        &self.final_psi
    }

    pub fn stop(&self) -> StopReason {
        self.stop
    }

    /// Replays the steps and checks that each chosen edge was valid when picked.
    pub fn replay_is_valid<G: SequenceStructure + ?Sized>(&self, graph: &G) -> bool {
        let mut pos = Positions::new(graph.vertex_count());
        for &v in &self.sigma.as_slice()[..self.given] {
            pos.push(v);
        }
        let mut next = self.given;
        for step in &self.steps {
            if !graph.is_valid(step.edge, &pos) {
                return false;
            }
            for &v in &step.appended {
                if self.sigma.as_slice().get(next) != Some(&v) || !pos.push(v) {
                    return false;
                }
                next += 1;
            }
        }
        next == self.sigma.len()
    }
}

/// The pieces a greedy policy scores edges with.
pub struct Problem<'a, G: ?Sized, U: ?Sized> {
    pub graph: &'a G,
    pub utility: &'a U,
    pub rule: &'a EdgeStateRule,
    pub prior: &'a VertexPrior,
}

impl<'a, G: ?Sized, U: ?Sized> Problem<'a, G, U> {
    pub fn new(graph: &'a G, utility: &'a U, rule: &'a EdgeStateRule, prior: &'a VertexPrior) -> Self {
        Problem {
            graph,
            utility,
            rule,
            prior,
        }
    }
}

/// Budget, tie rule and an optional given prefix with known states.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOptions {
    /// Maximum number of vertices appended after the prefix.
    pub k: usize,
    pub tie: TieBreak,
    pub prefix: Vec<VertexId>,
    pub prefix_states: PartialRealization,
}

impl GreedyOptions {
    pub fn new(k: usize) -> Self {
        GreedyOptions {
            k,
            tie: TieBreak::default(),
            prefix: Vec::new(),
            prefix_states: PartialRealization::new(),
        }
    }

    pub fn with_tie(mut self, tie: TieBreak) -> Self {
        self.tie = tie;
        self
    }

    /// Starts from `prefix`, with every prefix vertex known to be in `state`.
    pub fn with_prefix(mut self, prefix: Vec<VertexId>, state: State) -> Result<Self> {
        for &v in &prefix {
            self.prefix_states.insert(v, state)?;
        }
        self.prefix = prefix;
        Ok(self)
    }
}

enum Mode {
    Free,
    Path {
        frontier: VertexId,
        target: Option<VertexId>,
    },
}

fn better(tie: TieBreak, best: Option<(EdgeId, f64)>, e: EdgeId, delta: f64) -> bool {
    match best {
        None => true,
        Some((b, d)) => delta > d || (delta == d && tie == TieBreak::HighestId && e > b),
    }
}

fn run_greedy<G, U>(
    problem: &Problem<'_, G, U>,
    feedback: &mut dyn FeedbackOracle,
    opts: &GreedyOptions,
    mut mode: Mode,
) -> Result<PolicyTrace>
where
    G: SequenceStructure + ?Sized,
    U: Utility + ?Sized,
{
    let graph = problem.graph;
    let n = graph.vertex_count();
    if problem.prior.vertex_count() != n {
        return Err(Error::input(format!(
            "prior covers {} vertices, graph has {n}",
            problem.prior.vertex_count()
        )));
    }
    if problem.utility.edge_count() != graph.edge_count() {
        return Err(Error::input(format!(
            "utility covers {} edges, graph has {}",
            problem.utility.edge_count(),
            graph.edge_count()
        )));
    }
    let mut sigma = Sequence::new(opts.prefix.clone())?;
    let mut pos = sigma.positions(n)?;
    let mut psi = PartialRealization::new();
    for (v, s) in opts.prefix_states.iter() {
        if !pos.contains(v) {
            return Err(Error::input(format!("known state for vertex {v} outside the prefix")));
        }
        psi.insert(v, s)?;
    }
    // Known prefix states enter as point masses, since a prefix need not
    // induce any edge that would carry them.
    let prior = if psi.is_empty() {
        problem.prior.clone()
    } else {
        let probs = (0..n)
            .map(|i| match psi.get(VertexId(i)) {
                Some(s) => {
                    let mut p = vec![0.0; problem.prior.alphabet()];
                    p[s.index()] = 1.0;
                    p
                }
                None => problem.prior.marginal(VertexId(i)).to_vec(),
            })
            .collect();
        VertexPrior::new(problem.prior.alphabet(), probs)?
    };
    let width = match mode {
        Mode::Free => graph.step_width(),
        Mode::Path { .. } => 1,
    };
    let mut induced: Vec<EdgeId> = graph.edge_ids().filter(|&e| graph.is_induced(e, &pos)).collect();
    let mut steps = Vec::new();
    let mut appended_count = 0usize;

    let stop = loop {
        if appended_count + width > opts.k {
            break StopReason::Budget;
        }
        let candidates: Vec<EdgeId> = graph
            .edge_ids()
            .filter(|&e| graph.is_valid(e, &pos))
            .filter(|&e| match mode {
                Mode::Free => true,
                Mode::Path { frontier, .. } => graph.edge_vertices(e)[0] == frontier,
            })
            .collect();
        if candidates.is_empty() {
            break StopReason::NoValidEdges;
        }
        let evidence = induce_edge_partial(&psi, graph, &induced, problem.rule);
        let posterior = EdgePosterior::new(&prior, problem.rule, graph, &evidence)?;
        let dists: Vec<Vec<f64>> = candidates
            .iter()
            .map(|&e| posterior.edge_state_distribution(problem.rule, graph.edge_vertices(e)))
            .collect();
        let mut deltas = vec![0.0; candidates.len()];
        for s in 0..problem.prior.alphabet() {
            if dists.iter().all(|d| d[s] == 0.0) {
                continue;
            }
            let gains = problem.utility.gains(&evidence, &candidates, State(s as u8));
            for (i, g) in gains.into_iter().enumerate() {
                deltas[i] += dists[i][s] * g;
            }
        }
        let mut best: Option<(EdgeId, f64)> = None;
        for (&e, &d) in candidates.iter().zip(&deltas) {
            if better(opts.tie, best, e, d) {
                best = Some((e, d));
            }
        }
        let (edge, delta) = best.expect("candidates is non-empty");

        let mut appended = Vec::new();
        let mut observed = Vec::new();
        for &v in graph.edge_vertices(edge) {
            if pos.contains(v) {
                continue;
            }
            pos.push(v);
            sigma.push_unchecked(v);
            appended.push(v);
            appended_count += 1;
            if let Some(s) = feedback.reveal(v) {
                psi.insert(v, s)?;
                observed.push((v, s));
            }
        }
        for &v in &appended {
            for &e in graph.edges_ending_at(v) {
                if graph.is_induced(e, &pos) && !induced.contains(&e) {
                    induced.push(e);
                }
            }
        }
        steps.push(TraceStep {
            edge,
            delta,
            appended,
            observed,
        });

        if let Mode::Path { frontier, target } = &mut mode {
            let head = graph.edge_vertices(edge)[graph.edge_vertices(edge).len() - 1];
            if psi.get(head) == Some(State::ONE) {
                *frontier = head;
                if *target == Some(head) {
                    break StopReason::TargetReached;
                }
            }
        }
    };

    Ok(PolicyTrace {
        sigma,
        given: opts.prefix.len(),
        steps,
        final_psi: psi,
        stop,
    })
}

/// Adaptive sequence greedy on any sequence structure. Each step appends up
/// to the structure's step width, and stops once that would exceed `opts.k`.
pub fn adaptive_sequence_greedy<G, U>(
    problem: &Problem<'_, G, U>,
    feedback: &mut dyn FeedbackOracle,
    opts: &GreedyOptions,
) -> Result<PolicyTrace>
where
    G: SequenceStructure + ?Sized,
    U: Utility + ?Sized,
{
    run_greedy(problem, feedback, opts, Mode::Free)
}

/// Hypergraph form of [`adaptive_sequence_greedy`]: steps append up to `rank` vertices.
pub fn adaptive_hyper_sequence_greedy<U: Utility + ?Sized>(
    problem: &Problem<'_, OrderedHypergraph, U>,
    feedback: &mut dyn FeedbackOracle,
    opts: &GreedyOptions,
) -> Result<PolicyTrace> {
    run_greedy(problem, feedback, opts, Mode::Free)
}

/// Greedy that never observes appended vertices. Only the prefix states in
/// `opts` inform the scores.
pub fn nonadaptive_sequence_greedy<G, U>(problem: &Problem<'_, G, U>, opts: &GreedyOptions) -> Result<PolicyTrace>
where
    G: SequenceStructure + ?Sized,
    U: Utility + ?Sized,
{
    run_greedy(problem, &mut NeverReveal, opts, Mode::Free)
}

/// Greedy restricted to arcs leaving the frontier, one vertex per step.
///
/// The frontier starts at `start` and moves to a picked vertex only when it is
/// revealed in state 1. Rejected vertices stay in the sequence. The run ends
/// early once `target_stop` is confirmed.
pub fn path_constrained_greedy<U: Utility + ?Sized>(
    problem: &Problem<'_, WeightedDigraph, U>,
    feedback: &mut dyn FeedbackOracle,
    opts: &GreedyOptions,
    start: VertexId,
    target_stop: Option<VertexId>,
) -> Result<PolicyTrace> {
    let n = problem.graph.vertex_count();
    for v in std::iter::once(start).chain(target_stop) {
        if v.0 >= n {
            return Err(Error::UnknownVertex { vertex: v.0, n });
        }
    }
    let mut opts = opts.clone();
    if !opts.prefix.contains(&start) {
        opts.prefix.push(start);
        opts.prefix_states.insert(start, State::ONE)?;
    }
    run_greedy(
        problem,
        feedback,
        &opts,
        Mode::Path {
            frontier: start,
            target: target_stop,
        },
    )
}

/// The `k` vertices with the largest self-loop weight, skipping `exclude`.
/// Ties go to the smaller vertex id; vertices without a self-loop count as 0.
pub fn frequency_baseline(g: &WeightedDigraph, k: usize, exclude: &[VertexId]) -> Sequence {
    let mut ranked: Vec<(VertexId, f64)> = (0..g.vertex_count())
        .map(VertexId)
        .filter(|v| !exclude.contains(v))
        .map(|v| (v, g.self_loop_weight(v).unwrap_or(0.0)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let picks = ranked.into_iter().take(k).map(|(v, _)| v).collect();
    Sequence::new(picks).expect("ranked vertices are distinct")
}
