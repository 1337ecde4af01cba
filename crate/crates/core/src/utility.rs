//! Set utilities over edge states and exact conditional marginal gains.
//!
//! Both bundled utilities only look at edges in state 1: state-0 and unknown
//! edges contribute nothing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{guard, Error, Result};
use crate::graph::{EdgeId, OrderedHypergraph, Positions, Sequence, SequenceStructure, VertexId, WeightedDigraph};
use crate::policy::{FeedbackOracle, PolicyTrace, RealizationFeedback};
use crate::states::{EdgeStateRule, EdgeStates, Realization, State, StateDistribution};

/// Largest set whose joint state distribution `set_marginal_gain` enumerates.
pub const MAX_SET_GAIN_EDGES: usize = 12;

const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// A non-negative set function `h` of the known edge states.
pub trait Utility: Sync {
    fn edge_count(&self) -> usize;

    /// `h(ψ)`: value of the edges in `known` under their states.
    fn value(&self, known: &EdgeStates) -> f64;

    /// `h(ψ + {e: s}) − h(ψ)` for an edge `e` not yet in `known`.
    fn gain(&self, known: &EdgeStates, e: EdgeId, s: State) -> f64 {
        let next = known.with(e, s).expect("gain of an edge already in the domain");
        self.value(&next) - self.value(known)
    }

    /// [`gain`](Self::gain) for many candidates at once.
    fn gains(&self, known: &EdgeStates, candidates: &[EdgeId], s: State) -> Vec<f64> {
        candidates.iter().map(|&e| self.gain(known, e, s)).collect()
    }
}

/// Probabilistic coverage: `h(E₁) = Σ_j [1 − Π_{e ∈ E₁ ending at j} (1 − w_e)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageUtility {
    weights: Vec<f64>,
    targets: Vec<VertexId>,
    n: usize,
}

impl CoverageUtility {
    pub fn new(n: usize, weights: Vec<f64>, targets: Vec<VertexId>) -> Result<Self> {
        if weights.len() != targets.len() {
            return Err(Error::input("one weight and one target per edge"));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::input(format!("coverage weight {w} outside [0, 1]")));
        }
        if let Some(t) = targets.iter().find(|t| t.0 >= n) {
            return Err(Error::UnknownVertex { vertex: t.0, n });
        }
        Ok(CoverageUtility { weights, targets, n })
    }

    pub fn from_digraph(g: &WeightedDigraph) -> Self {
        let targets = g.edges().iter().map(|e| e.dst()).collect();
        CoverageUtility::new(g.vertex_count(), g.weights(), targets).expect("digraph weights are in [0, 1]")
    }

    pub fn from_hypergraph(h: &OrderedHypergraph, weights: Vec<f64>) -> Result<Self> {
        let targets = h.edge_ids().map(|e| h.edge_target(e)).collect();
        CoverageUtility::new(h.vertex_count(), weights, targets)
    }

    pub fn weight(&self, e: EdgeId) -> f64 {
        self.weights[e.0]
    }

    pub fn target(&self, e: EdgeId) -> VertexId {
        self.targets[e.0]
    }

    /// Coverage of a set of edges known to be in state 1.
    pub fn coverage_value(&self, ones: &[EdgeId]) -> f64 {
        let mut miss = vec![1.0; self.n];
        for &e in ones {
            miss[self.targets[e.0].0] *= 1.0 - self.weights[e.0];
        }
        miss.iter().map(|m| 1.0 - m).sum()
    }

    fn miss_probability(&self, known: &EdgeStates, target: VertexId) -> f64 {
        known
            .iter()
            .filter(|&(e, s)| s == State::ONE && self.targets[e.0] == target)
            .fold(1.0, |acc, (e, _)| acc * (1.0 - self.weights[e.0]))
    }

    /// `p_one · w_e · Π (1 − w)` over state-1 edges in `known` sharing `e`'s target.
    pub fn coverage_marginal_closed_form(&self, e: EdgeId, known: &EdgeStates, p_one: f64) -> f64 {
        p_one * self.weights[e.0] * self.miss_probability(known, self.targets[e.0])
    }
}

impl Utility for CoverageUtility {
    fn edge_count(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, known: &EdgeStates) -> f64 {
        let ones: Vec<EdgeId> = known.iter().filter(|&(_, s)| s == State::ONE).map(|(e, _)| e).collect();
        self.coverage_value(&ones)
    }

    fn gain(&self, known: &EdgeStates, e: EdgeId, s: State) -> f64 {
        debug_assert!(!known.contains(e));
        if s != State::ONE {
            return 0.0;
        }
        self.coverage_marginal_closed_form(e, known, 1.0)
    }

    fn gains(&self, known: &EdgeStates, candidates: &[EdgeId], s: State) -> Vec<f64> {
        if s != State::ONE {
            return vec![0.0; candidates.len()];
        }
        let mut miss = vec![1.0; self.n];
        for (e, st) in known.iter() {
            if st == State::ONE {
                miss[self.targets[e.0].0] *= 1.0 - self.weights[e.0];
            }
        }
        candidates
            .iter()
            .map(|&e| self.weights[e.0] * miss[self.targets[e.0].0])
            .collect()
    }
}

/// Modular utility: sum of the weights of edges in state 1. Unit weights
/// give the counting utility.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearUtility {
    weights: Vec<f64>,
}

impl LinearUtility {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::input(format!("linear weight {w} must be non-negative")));
        }
        Ok(LinearUtility { weights })
    }

    pub fn counting(m: usize) -> Self {
        LinearUtility { weights: vec![1.0; m] }
    }
}

impl Utility for LinearUtility {
    fn edge_count(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, known: &EdgeStates) -> f64 {
        known
            .iter()
            .filter(|&(_, s)| s == State::ONE)
            .map(|(e, _)| self.weights[e.0])
            .sum()
    }

    fn gain(&self, _known: &EdgeStates, e: EdgeId, s: State) -> f64 {
        if s == State::ONE {
            self.weights[e.0]
        } else {
            0.0
        }
    }
}

/// Either bundled utility, for callers that pick one at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum BundledUtility {
    Coverage(CoverageUtility),
    Linear(LinearUtility),
}

impl Utility for BundledUtility {
    fn edge_count(&self) -> usize {
        match self {
            BundledUtility::Coverage(u) => u.edge_count(),
            BundledUtility::Linear(u) => u.edge_count(),
        }
    }

    fn value(&self, known: &EdgeStates) -> f64 {
        match self {
            BundledUtility::Coverage(u) => u.value(known),
            BundledUtility::Linear(u) => u.value(known),
        }
    }

    fn gain(&self, known: &EdgeStates, e: EdgeId, s: State) -> f64 {
        match self {
            BundledUtility::Coverage(u) => u.gain(known, e, s),
            BundledUtility::Linear(u) => u.gain(known, e, s),
        }
    }

    fn gains(&self, known: &EdgeStates, candidates: &[EdgeId], s: State) -> Vec<f64> {
        match self {
            BundledUtility::Coverage(u) => u.gains(known, candidates, s),
            BundledUtility::Linear(u) => u.gains(known, candidates, s),
        }
    }
}

fn check_distribution(probs: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in probs {
        if p.is_nan() || p < 0.0 {
            return Err(Error::input(format!("negative or NaN probability {p}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::input(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// `Δ(e | ψ) = Σ_s P(s) · [h(ψ + {e: s}) − h(ψ)]`, with `edge_state_dist` the
/// distribution of `e`'s state already conditioned on `known`.
pub fn marginal_gain<U: Utility + ?Sized>(
    h: &U,
    e: EdgeId,
    known: &EdgeStates,
    edge_state_dist: &[f64],
) -> Result<f64> {
    check_distribution(edge_state_dist.iter().copied())?;
    if known.contains(e) {
        return Err(Error::input(format!("edge {e} is already observed")));
    }
    Ok(edge_state_dist
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, &p)| p * h.gain(known, e, State(s as u8)))
        .sum())
}

/// `Δ(A | ψ)` by enumerating the joint states of `A`.
///
/// `joint` lists `(states of A in order, probability)` conditioned on `known`.
pub fn set_marginal_gain<U: Utility + ?Sized>(
    h: &U,
    set: &[EdgeId],
    known: &EdgeStates,
    joint: &[(Vec<State>, f64)],
) -> Result<f64> {
    guard("set size", set.len(), MAX_SET_GAIN_EDGES)?;
    if let Some(e) = set.iter().find(|&&e| known.contains(e)) {
        return Err(Error::input(format!("edge {e} is already observed")));
    }
    check_distribution(joint.iter().map(|(_, p)| *p))?;
    let base = h.value(known);
    let mut total = 0.0;
    for (states, p) in joint {
        if states.len() != set.len() {
            return Err(Error::input("joint outcome length differs from the set size"));
        }
        if *p == 0.0 {
            continue;
        }
        let mut next = known.clone();
        for (&e, &s) in set.iter().zip(states) {
            next.insert(e, s)?;
        }
        total += p * (h.value(&next) - base);
    }
    Ok(total)
}

/// Joint distribution of the states of `set`, conditioned on the edge states
/// in `known`, by enumerating realizations of `dist`.
pub fn joint_edge_distribution<G: SequenceStructure + ?Sized>(
    graph: &G,
    rule: &EdgeStateRule,
    dist: &StateDistribution,
    known: &EdgeStates,
    set: &[EdgeId],
) -> Result<Vec<(Vec<State>, f64)>> {
    let mut out: Vec<(Vec<State>, f64)> = Vec::new();
    let mut total = 0.0;
    for (phi, p) in dist.enumerate_realizations(graph.vertex_count())? {
        let consistent = known
            .iter()
            .all(|(e, s)| phi.edge_state(rule, graph.edge_vertices(e)) == s);
        if !consistent {
            continue;
        }
        total += p;
        let states: Vec<State> = set
            .iter()
            .map(|&e| phi.edge_state(rule, graph.edge_vertices(e)))
            .collect();
        match out.iter_mut().find(|(s, _)| *s == states) {
            Some(entry) => entry.1 += p,
            None => out.push((states, p)),
        }
    }
    if total <= 0.0 {
        return Err(Error::ImpossibleEvidence);
    }
    for entry in &mut out {
        entry.1 /= total;
    }
    Ok(out)
}

/// `f(σ, φ) = h(E(σ), φ^E)`.
pub fn realized_value<G, U>(
    graph: &G,
    utility: &U,
    rule: &EdgeStateRule,
    phi: &Realization,
    sigma: &Sequence,
) -> Result<f64>
where
    G: SequenceStructure + ?Sized,
    U: Utility + ?Sized,
{
    let pos: Positions = sigma.positions(graph.vertex_count())?;
    let mut known = EdgeStates::new(graph.edge_count());
    for e in graph.edge_ids() {
        if graph.is_induced(e, &pos) {
            known.insert(e, phi.edge_state(rule, graph.edge_vertices(e)))?;
        }
    }
    Ok(utility.value(&known))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpectationMode {
    /// Sum over every realization with positive probability.
    Exact,
    /// Average over seeded samples.
    MonteCarlo { samples: usize, seed: u64 },
}

/// `f_avg(π)`: the policy is re-run under each realization, which also serves
/// as its feedback oracle.
pub fn policy_expected_value<G, U, P>(
    policy: P,
    graph: &G,
    utility: &U,
    rule: &EdgeStateRule,
    dist: &StateDistribution,
    mode: ExpectationMode,
) -> Result<f64>
where
    G: SequenceStructure + ?Sized,
    U: Utility + ?Sized,
    P: Fn(&mut dyn FeedbackOracle) -> Result<PolicyTrace>,
{
    let run = |phi: &Realization| -> Result<f64> {
        let mut feedback = RealizationFeedback::new(phi);
        let trace = policy(&mut feedback)?;
        realized_value(graph, utility, rule, phi, trace.sigma())
    };
    match mode {
        ExpectationMode::Exact => {
            let mut total = 0.0;
            for (phi, p) in dist.enumerate_realizations(graph.vertex_count())? {
                total += p * run(&phi)?;
            }
            Ok(total)
        }
        ExpectationMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::input("Monte-Carlo estimate needs at least one sample"));
            }
            let mut seeds = ChaCha8Rng::seed_from_u64(seed);
            let mut total = 0.0;
            for _ in 0..samples {
                let phi = dist.sample_realization(seeds.gen())?;
                total += run(&phi)?;
            }
            Ok(total / samples as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::{movie_graph, F, R, T};
    use crate::policy::{adaptive_sequence_greedy, GreedyOptions, Problem};
    use crate::states::{induce_edge_partial, EdgePosterior, PartialRealization, VertexPrior};
    use proptest::prelude::*;

    fn edge(g: &WeightedDigraph, s: usize, d: usize) -> EdgeId {
        g.find_edge(VertexId(s), VertexId(d)).unwrap()
    }

    #[test]
    fn coverage_value_examples() {
        let g = WeightedDigraph::new(3, [(0, 2, 0.5), (1, 2, 0.5), (0, 1, 0.5)]).unwrap();
        let h = CoverageUtility::from_digraph(&g);
        assert_eq!(h.coverage_value(&[]), 0.0);
        assert_eq!(h.coverage_value(&[edge(&g, 0, 1)]), 0.5);
        assert!((h.coverage_value(&[edge(&g, 0, 2), edge(&g, 1, 2)]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        let g = WeightedDigraph::new(3, [(0, 2, 0.4), (1, 2, 0.5)]).unwrap();
        let h = CoverageUtility::from_digraph(&g);
        let e = edge(&g, 0, 2);
        let empty = EdgeStates::new(2);
        assert!((h.coverage_marginal_closed_form(e, &empty, 1.0) - 0.4).abs() < 1e-15);
        let one_prior = EdgeStates::from_pairs(2, [(edge(&g, 1, 2), State::ONE)]).unwrap();
        assert!((h.coverage_marginal_closed_form(e, &one_prior, 1.0) - 0.2).abs() < 1e-15);
        assert_eq!(h.coverage_marginal_closed_form(e, &one_prior, 0.0), 0.0);
    }

    /// Movie example: counting utility, start-vertex rule, uniform unknowns.
    #[test]
    fn movie_marginal_gains() {
        let g = movie_graph();
        let h = LinearUtility::counting(g.edge_count());
        let rule = EdgeStateRule::StartVertex;
        let prior = VertexPrior::bernoulli(&[0.5; 3]).unwrap();
        let psi1 = PartialRealization::from_pairs([(F, 1), (T, 0)]).unwrap();
        let fr = edge(&g, F, R);
        let rr = edge(&g, R, R);

        let others: Vec<EdgeId> = g.edge_ids().filter(|&e| e != fr).collect();
        let psi1_e = induce_edge_partial(&psi1, &g, &others, &rule);
        let post = EdgePosterior::new(&prior, &rule, &g, &psi1_e).unwrap();
        let d_rr = post.edge_state_distribution(&rule, g.edge(rr).vertices());
        assert_eq!(marginal_gain(&h, rr, &psi1_e, &d_rr).unwrap(), 0.5);
        let d_fr = post.edge_state_distribution(&rule, g.edge(fr).vertices());
        assert_eq!(marginal_gain(&h, fr, &psi1_e, &d_fr).unwrap(), 1.0);

        // ψ2: F unknown, so no edge leaving F is observed.
        let psi2 = PartialRealization::from_pairs([(T, 0)]).unwrap();
        let psi2_e = induce_edge_partial(&psi2, &g, &others, &rule);
        let post2 = EdgePosterior::new(&prior, &rule, &g, &psi2_e).unwrap();
        let d_fr2 = post2.edge_state_distribution(&rule, g.edge(fr).vertices());
        assert_eq!(marginal_gain(&h, fr, &psi2_e, &d_fr2).unwrap(), 0.5);
    }

    #[test]
    fn marginal_gain_rejects_bad_distribution() {
        let h = LinearUtility::counting(1);
        let known = EdgeStates::new(1);
        assert!(marginal_gain(&h, EdgeId(0), &known, &[0.5, 0.6]).is_err());
        assert!(marginal_gain(&h, EdgeId(0), &known, &[0.3, 0.7]).is_ok());
    }

    #[test]
    fn set_gain_cases() {
        let g = WeightedDigraph::new(2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let h = LinearUtility::counting(2);
        let dist = StateDistribution::uniform(2, 0.5).unwrap();
        let rule = EdgeStateRule::StartVertex;
        let known = EdgeStates::new(2);
        let a = [EdgeId(0), EdgeId(1)];
        let joint = joint_edge_distribution(&g, &rule, &dist, &known, &a).unwrap();
        assert!((set_marginal_gain(&h, &a, &known, &joint).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(set_marginal_gain(&h, &[], &known, &[(vec![], 1.0)]).unwrap(), 0.0);

        let single = joint_edge_distribution(&g, &rule, &dist, &known, &a[..1]).unwrap();
        let set = set_marginal_gain(&h, &a[..1], &known, &single).unwrap();
        let marg = marginal_gain(&h, a[0], &known, &[0.5, 0.5]).unwrap();
        assert!((set - marg).abs() < 1e-12);

        let too_many: Vec<EdgeId> = (0..13).map(EdgeId).collect();
        assert!(set_marginal_gain(&h, &too_many, &EdgeStates::new(13), &[])
            .unwrap_err()
            .is_guard());
    }

    #[test]
    fn expected_value_examples() {
        let g = WeightedDigraph::new(1, [(0, 0, 1.0)]).unwrap();
        let h = LinearUtility::counting(1);
        let rule = EdgeStateRule::StartVertex;
        let dist = StateDistribution::bernoulli(vec![0.3]).unwrap();
        let always_pick = |_: &mut dyn FeedbackOracle| Ok(PolicyTrace::fixed(Sequence::from_indices(&[0]).unwrap()));
        let v = policy_expected_value(always_pick, &g, &h, &rule, &dist, ExpectationMode::Exact).unwrap();
        assert!((v - 0.3).abs() < 1e-12);

        let nothing = |_: &mut dyn FeedbackOracle| Ok(PolicyTrace::fixed(Sequence::empty()));
        assert_eq!(
            policy_expected_value(nothing, &g, &h, &rule, &dist, ExpectationMode::Exact).unwrap(),
            0.0
        );

        let mc = policy_expected_value(
            always_pick,
            &g,
            &h,
            &rule,
            &dist,
            ExpectationMode::MonteCarlo {
                samples: 20_000,
                seed: 5,
            },
        )
        .unwrap();
        assert!((mc - 0.3).abs() < 0.02);
    }

    #[test]
    fn point_mass_expectation_is_single_run() {
        let g = movie_graph();
        let h = CoverageUtility::from_digraph(&g);
        let rule = EdgeStateRule::StartVertex;
        let phi = Realization::from_bits(&[1, 0, 1]);
        let dist = StateDistribution::point_mass(phi.clone());
        let prior = dist.prior().unwrap();
        let problem = Problem::new(&g, &h, &rule, &prior);
        let opts = GreedyOptions::new(3);
        let policy = |fb: &mut dyn FeedbackOracle| adaptive_sequence_greedy(&problem, fb, &opts);
        let exact = policy_expected_value(policy, &g, &h, &rule, &dist, ExpectationMode::Exact).unwrap();
        let trace = adaptive_sequence_greedy(&problem, &mut RealizationFeedback::new(&phi), &opts).unwrap();
        let single = realized_value(&g, &h, &rule, &phi, trace.sigma()).unwrap();
        assert_eq!(exact, single);
    }

    type Arcs = Vec<(usize, usize, f64)>;

    fn random_case() -> impl Strategy<Value = (usize, Arcs, Vec<f64>, u64)> {
        (1usize..=6).prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec((0..n, 0..n, 0.0f64..=1.0), 1..12),
                prop::collection::vec(0.0f64..=1.0, n),
                any::<u64>(),
            )
        })
    }

    fn build(n: usize, raw: Vec<(usize, usize, f64)>) -> WeightedDigraph {
        let mut seen = std::collections::HashSet::new();
        let edges: Vec<_> = raw.into_iter().filter(|(s, d, _)| seen.insert((*s, *d))).collect();
        WeightedDigraph::new(n, edges).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        /// Closed form against the enumeration route, plus adaptive monotonicity.
        #[test]
        fn coverage_closed_form_matches_enumeration((n, raw, q, pick) in random_case()) {
            let g = build(n, raw);
            let m = g.edge_count();
            let h = CoverageUtility::from_digraph(&g);
            let rule = EdgeStateRule::StartVertex;
            let dist = StateDistribution::bernoulli(q).unwrap();
            // Observe a pseudo-random subset of edges under a sampled realization.
            let phi = dist.sample_realization(pick).unwrap();
            let mut known = EdgeStates::new(m);
            let target = EdgeId((pick as usize) % m);
            for e in g.edge_ids() {
                if e != target && (pick >> (e.0 % 60)) & 1 == 1 {
                    known.insert(e, phi.edge_state(&rule, g.edge(e).vertices())).unwrap();
                }
            }
            let joint = joint_edge_distribution(&g, &rule, &dist, &known, &[target]).unwrap();
            let mut edge_dist = vec![0.0, 0.0];
            for (s, p) in &joint {
                edge_dist[s[0].index()] += p;
            }
            let enumerated = marginal_gain(&h, target, &known, &edge_dist).unwrap();
            let closed = h.coverage_marginal_closed_form(target, &known, edge_dist[1]);
            prop_assert!((enumerated - closed).abs() < 1e-12);
            prop_assert!(enumerated >= 0.0);
            let v = h.value(&known);
            prop_assert!(v >= 0.0 && v <= n as f64 + 1e-12);
        }

        #[test]
        fn linear_set_gain_is_additive((n, raw, q, pick) in random_case()) {
            let g = build(n, raw);
            let m = g.edge_count();
            let h = LinearUtility::new(g.weights()).unwrap();
            let rule = EdgeStateRule::StartVertex;
            let dist = StateDistribution::bernoulli(q).unwrap();
            let known = EdgeStates::new(m);
            let set: Vec<EdgeId> = g.edge_ids().filter(|e| (pick >> (e.0 % 60)) & 1 == 1).take(6).collect();
            let joint = joint_edge_distribution(&g, &rule, &dist, &known, &set).unwrap();
            let total = set_marginal_gain(&h, &set, &known, &joint).unwrap();
            let mut sum = 0.0;
            for &e in &set {
                let single = joint_edge_distribution(&g, &rule, &dist, &known, &[e]).unwrap();
                sum += set_marginal_gain(&h, &[e], &known, &single).unwrap();
            }
            prop_assert!((total - sum).abs() < 1e-12);
        }
    }
}
