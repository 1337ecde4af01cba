//! Exhaustive reference computations on small instances: optimal sequences
//! and adaptive policies, the weak-submodularity ratio γ, approximation-bound
//! checks and the densest-k-subgraph reduction.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{guard, Error, Result};
use crate::graph::{EdgeId, OrderedHypergraph, Sequence, SequenceStructure, VertexId, WeightedDigraph};
use crate::policy::{adaptive_sequence_greedy, FeedbackOracle, GreedyOptions, Problem, TieBreak};
use crate::states::{EdgeStateRule, EdgeStates, Realization, State, StateDistribution};
use crate::utility::{
    policy_expected_value, realized_value, BundledUtility, CoverageUtility, ExpectationMode, LinearUtility, Utility,
};

pub const MAX_SEQUENCE_VERTICES: usize = 10;
pub const MAX_ADAPTIVE_VERTICES: usize = 6;
pub const MAX_GAMMA_EDGES: usize = 10;
pub const DEFAULT_MAX_SET: usize = 4;
const MAX_BITSET_EDGES: usize = 128;
const POSITIVE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Instance<G, U> {
    pub graph: G,
    pub utility: U,
    pub rule: EdgeStateRule,
    pub dist: StateDistribution,
    pub k: usize,
}

impl<G: SequenceStructure, U: Utility> Instance<G, U> {
    /// `f_avg` of a fixed sequence.
    pub fn sequence_value(&self, sigma: &Sequence) -> Result<f64> {
        let mut total = 0.0;
        for (phi, p) in self.dist.enumerate_realizations(self.graph.vertex_count())? {
            total += p * realized_value(&self.graph, &self.utility, &self.rule, &phi, sigma)?;
        }
        Ok(total)
    }

    fn weighted_realizations(&self) -> Result<Vec<(Realization, f64)>> {
        self.dist.enumerate_realizations(self.graph.vertex_count())
    }

    fn edge_states_of(&self, phi: &Realization) -> Vec<State> {
        self.graph
            .edge_ids()
            .map(|e| phi.edge_state(&self.rule, self.graph.edge_vertices(e)))
            .collect()
    }
}

fn bits(mask: u128) -> impl Iterator<Item = usize> {
    (0..128).filter(move |i| (mask >> i) & 1 == 1)
}

fn edge_states_from_bits(m: usize, dom: u128, states: &[State]) -> EdgeStates {
    EdgeStates::from_pairs(m, bits(dom).map(|i| (EdgeId(i), states[i]))).expect("each edge once")
}

fn induced_and_alive<G: SequenceStructure + ?Sized>(graph: &G, seq: &[VertexId]) -> (u128, u128) {
    let pos = Sequence::new(seq.to_vec())
        .and_then(|s| s.positions(graph.vertex_count()))
        .expect("search sequences are distinct and in range");
    let mut induced = 0u128;
    let mut alive = 0u128;
    for e in graph.edge_ids() {
        if graph.is_induced(e, &pos) {
            induced |= 1 << e.0;
        } else if graph.is_valid(e, &pos) {
            alive |= 1 << e.0;
        }
    }
    (induced, alive)
}

/// Best fixed sequence of at most `k` distinct vertices, by `f_avg`.
///
/// Sequences are searched depth-first in lexicographic order and the first
/// maximiser found is kept, so shorter sequences win ties.
pub fn optimal_sequence<G: SequenceStructure, U: Utility>(inst: &Instance<G, U>) -> Result<(Sequence, f64)> {
    let n = inst.graph.vertex_count();
    let m = inst.graph.edge_count();
    guard("vertex count", n, MAX_SEQUENCE_VERTICES)?;
    guard("edge count", m, MAX_BITSET_EDGES)?;
    let reals: Vec<(Vec<State>, f64)> = inst
        .weighted_realizations()?
        .into_iter()
        .map(|(phi, p)| (inst.edge_states_of(&phi), p))
        .collect();
    let mut cache: HashMap<u128, f64> = HashMap::new();
    let mut value_of = |induced: u128| -> f64 {
        *cache.entry(induced).or_insert_with(|| {
            reals
                .iter()
                .map(|(states, p)| p * inst.utility.value(&edge_states_from_bits(m, induced, states)))
                .sum()
        })
    };

    let mut best: (Vec<VertexId>, f64) = (Vec::new(), value_of(0));
    let mut seq: Vec<VertexId> = Vec::new();
    fn dfs<G: SequenceStructure>(
        graph: &G,
        k: usize,
        seq: &mut Vec<VertexId>,
        best: &mut (Vec<VertexId>, f64),
        value_of: &mut dyn FnMut(u128) -> f64,
    ) {
        if seq.len() >= k {
            return;
        }
        for v in (0..graph.vertex_count()).map(VertexId) {
            if seq.contains(&v) {
                continue;
            }
            seq.push(v);
            let (induced, _) = induced_and_alive(graph, seq);
            let value = value_of(induced);
            if value > best.1 {
                *best = (seq.clone(), value);
            }
            dfs(graph, k, seq, best, value_of);
            seq.pop();
        }
    }
    dfs(&inst.graph, inst.k.min(n), &mut seq, &mut best, &mut value_of);
    Ok((Sequence::new(best.0)?, best.1))
}

struct AdaptiveSearch<'a, G, U> {
    inst: &'a Instance<G, U>,
    /// `(vertex state bits, probability, edge states)` per realization.
    reals: Vec<(u64, f64, Vec<State>)>,
    memo: HashMap<(u64, u64, u128, u128), f64>,
    leaf: HashMap<(u128, u128), f64>,
}

impl<G: SequenceStructure, U: Utility> AdaptiveSearch<'_, G, U> {
    fn leaf_value(&mut self, induced: u128, ones: u64, mask: u64) -> f64 {
        let m = self.inst.graph.edge_count();
        let states = &self
            .reals
            .iter()
            .find(|(b, _, _)| b & mask == ones)
            .expect("node has positive probability")
            .2;
        let state_ones = bits(induced)
            .filter(|&i| states[i] == State::ONE)
            .fold(0u128, |acc, i| acc | 1 << i);
        let utility = &self.inst.utility;
        *self
            .leaf
            .entry((induced, state_ones))
            .or_insert_with(|| utility.value(&edge_states_from_bits(m, induced, states)))
    }

    fn value(&mut self, seq: &mut Vec<VertexId>, mask: u64, ones: u64, induced: u128, alive: u128) -> f64 {
        let key = (mask, ones, induced, alive);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let mut best = self.leaf_value(induced, ones, mask);
        if seq.len() < self.inst.k {
            let consistent: Vec<(u64, f64)> = self
                .reals
                .iter()
                .filter(|(b, _, _)| b & mask == ones)
                .map(|(b, p, _)| (*b, *p))
                .collect();
            let total: f64 = consistent.iter().map(|(_, p)| p).sum();
            for v in 0..self.inst.graph.vertex_count() {
                if mask >> v & 1 == 1 {
                    continue;
                }
                let mass_one: f64 = consistent.iter().filter(|(b, _)| b >> v & 1 == 1).map(|(_, p)| p).sum();
                let mass_zero: f64 = consistent.iter().filter(|(b, _)| b >> v & 1 == 0).map(|(_, p)| p).sum();
                seq.push(VertexId(v));
                let (next_induced, next_alive) = induced_and_alive(&self.inst.graph, seq);
                let mut expected = 0.0;
                for (bit, mass) in [(0u64, mass_zero), (1u64, mass_one)] {
                    if mass > 0.0 {
                        let child = self.value(seq, mask | 1 << v, ones | bit << v, next_induced, next_alive);
                        expected += mass / total * child;
                    }
                }
                seq.pop();
                if expected > best {
                    best = expected;
                }
            }
        }
        self.memo.insert(key, best);
        best
    }
}

/// Value of the best adaptive policy that appends up to `k` vertices one at a
/// time, observing each vertex's state before choosing the next.
pub fn optimal_adaptive_value<G: SequenceStructure, U: Utility>(inst: &Instance<G, U>) -> Result<f64> {
    let n = inst.graph.vertex_count();
    guard("vertex count", n, MAX_ADAPTIVE_VERTICES)?;
    guard("edge count", inst.graph.edge_count(), MAX_BITSET_EDGES)?;
    let mut reals = Vec::new();
    for (phi, p) in inst.weighted_realizations()? {
        let mut b = 0u64;
        for (i, s) in phi.states().iter().enumerate() {
            if *s == State::ONE {
                b |= 1 << i;
            } else if *s != State::ZERO {
                return Err(Error::input("adaptive oracle needs binary vertex states"));
            }
        }
        reals.push((b, p, inst.edge_states_of(&phi)));
    }
    let (_, alive) = induced_and_alive(&inst.graph, &[]);
    let mut search = AdaptiveSearch {
        inst,
        reals,
        memo: HashMap::new(),
        leaf: HashMap::new(),
    };
    Ok(search.value(&mut Vec::new(), 0, 0, 0, alive))
}

/// The pair of observations and edge set attaining `gamma_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaWitness {
    pub psi: BTreeMap<EdgeId, State>,
    pub psi_prime: BTreeMap<EdgeId, State>,
    pub set: Vec<EdgeId>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub gamma_hat: f64,
    /// Smallest ratio before clamping; `None` when no set had positive gain.
    pub min_ratio: Option<f64>,
    pub witness: Option<GammaWitness>,
    pub max_set: usize,
}

/// Per-state marginal gains of every edge outside a domain, cached by
/// `(domain, states)` bitmasks.
struct GainRows<'a, U: ?Sized> {
    utility: &'a U,
    m: usize,
    slots: Vec<u32>,
    rows: Vec<Vec<[f64; 2]>>,
}

impl<'a, U: Utility + ?Sized> GainRows<'a, U> {
    fn new(utility: &'a U, m: usize) -> Self {
        GainRows {
            utility,
            m,
            slots: vec![u32::MAX; 1 << (2 * m)],
            rows: Vec::new(),
        }
    }

    fn row(&mut self, dom: u32, states: u32) -> usize {
        let key = ((dom as usize) << self.m) | states as usize;
        if self.slots[key] == u32::MAX {
            let m = self.m;
            let known = EdgeStates::from_pairs(
                m,
                (0..m)
                    .filter(|i| dom >> i & 1 == 1)
                    .map(|i| (EdgeId(i), State((states >> i & 1) as u8))),
            )
            .expect("each edge once");
            let outside: Vec<EdgeId> = (0..m).filter(|i| dom >> i & 1 == 0).map(EdgeId).collect();
            let zero = self.utility.gains(&known, &outside, State::ZERO);
            let one = self.utility.gains(&known, &outside, State::ONE);
            let mut row = vec![[0.0; 2]; m];
            for (j, e) in outside.iter().enumerate() {
                row[e.0] = [zero[j], one[j]];
            }
            self.slots[key] = self.rows.len() as u32;
            self.rows.push(row);
        }
        self.slots[key] as usize
    }
}

fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & mask) };
        Some(cur)
    })
}

fn mask_map(m: usize, dom: u32, states: u32) -> BTreeMap<EdgeId, State> {
    (0..m)
        .filter(|i| dom >> i & 1 == 1)
        .map(|i| (EdgeId(i), State((states >> i & 1) as u8)))
        .collect()
}

/// Enumerates the weak adaptive submodularity ratio over realizable
/// observation pairs `ψ ⊆ ψ′` and edge sets `A` with `|A| ≤ max_set`.
///
/// The result is an estimate: larger sets are not examined, so it can only
/// overshoot the true ratio.
pub fn estimate_gamma<G: SequenceStructure, U: Utility>(
    inst: &Instance<G, U>,
    max_set: usize,
) -> Result<GammaEstimate> {
    let m = inst.graph.edge_count();
    guard("edge count", m, MAX_GAMMA_EDGES)?;
    // Realizations only matter through their edge states, so merge equal ones.
    let mut patterns: Vec<(u32, f64)> = Vec::new();
    for (phi, p) in inst.weighted_realizations()? {
        let mut est = 0u32;
        for (i, s) in inst.edge_states_of(&phi).into_iter().enumerate() {
            match s {
                State::ZERO => {}
                State::ONE => est |= 1 << i,
                _ => return Err(Error::input("gamma enumeration needs binary edge states")),
            }
        }
        match patterns.iter_mut().find(|(e, _)| *e == est) {
            Some(entry) => entry.1 += p,
            None => patterns.push((est, p)),
        }
    }
    let full: u32 = if m == 0 { 0 } else { (1u32 << m) - 1 };
    let mut gains = GainRows::new(&inst.utility, m);

    // Δ(e | ψ) for every edge outside dom(ψ), cached per ψ.
    let mut deltas: HashMap<(u32, u32), Vec<f64>> = HashMap::new();
    let mut delta_of = |dom: u32, states: u32, gains: &mut GainRows<'_, U>| -> Vec<f64> {
        deltas
            .entry((dom, states))
            .or_insert_with(|| {
                let consistent: Vec<(u32, f64)> = patterns
                    .iter()
                    .filter(|(est, _)| est & dom == states)
                    .copied()
                    .collect();
                let total: f64 = consistent.iter().map(|(_, p)| p).sum();
                let slot = gains.row(dom, states);
                let row = &gains.rows[slot];
                (0..m)
                    .map(|i| {
                        if dom >> i & 1 == 1 {
                            return 0.0;
                        }
                        let p_one = consistent
                            .iter()
                            .filter(|(est, _)| est >> i & 1 == 1)
                            .map(|(_, p)| p)
                            .sum::<f64>()
                            / total;
                        (1.0 - p_one) * row[i][0] + p_one * row[i][1]
                    })
                    .collect()
            })
            .clone()
    };

    let mut best: Option<(f64, GammaWitness)> = None;
    for dom_prime in 0..=full {
        let mut seen: Vec<u32> = Vec::new();
        for &(est, _) in &patterns {
            let st_prime = est & dom_prime;
            if seen.contains(&st_prime) {
                continue;
            }
            seen.push(st_prime);
            let consistent: Vec<(u32, f64)> = patterns
                .iter()
                .filter(|(e, _)| e & dom_prime == st_prime)
                .copied()
                .collect();
            let total: f64 = consistent.iter().map(|(_, p)| p).sum();
            let lower: Vec<(u32, Vec<f64>)> = submasks(dom_prime)
                .map(|d| (d, delta_of(d, st_prime & d, &mut gains)))
                .collect();
            let outside = full & !dom_prime;
            for set in submasks(outside) {
                let size = set.count_ones() as usize;
                if size == 0 || size > max_set {
                    continue;
                }
                // Δ(A | ψ′) by telescoping single-edge gains along A.
                let mut den = 0.0;
                for &(est, p) in &consistent {
                    let mut dom = dom_prime;
                    let mut chain = 0.0;
                    for i in (0..m).filter(|i| set >> i & 1 == 1) {
                        let row = gains.row(dom, est & dom);
                        chain += gains.rows[row][i][(est >> i & 1) as usize];
                        dom |= 1 << i;
                    }
                    den += p * chain;
                }
                den /= total;
                if den <= POSITIVE {
                    continue;
                }
                for (d, delta) in &lower {
                    let num: f64 = (0..m).filter(|i| set >> i & 1 == 1).map(|i| delta[i]).sum();
                    let ratio = num / den;
                    if best.as_ref().is_none_or(|(r, _)| ratio < *r) {
                        best = Some((
                            ratio,
                            GammaWitness {
                                psi: mask_map(m, *d, st_prime & d),
                                psi_prime: mask_map(m, dom_prime, st_prime),
                                set: (0..m).filter(|i| set >> i & 1 == 1).map(EdgeId).collect(),
                                ratio,
                            },
                        ));
                    }
                }
            }
        }
    }
    Ok(match best {
        Some((ratio, witness)) => GammaEstimate {
            gamma_hat: ratio.min(1.0),
            min_ratio: Some(ratio),
            witness: Some(witness),
            max_set,
        },
        None => GammaEstimate {
            gamma_hat: 1.0,
            min_ratio: None,
            witness: None,
            max_set,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub greedy_value: f64,
    pub opt_value: f64,
    pub gamma_hat: f64,
    pub d_in: usize,
    /// 2 for digraphs, the rank `r` for hypergraphs.
    pub width: usize,
    pub bound: f64,
    pub ratio: f64,
    pub holds: bool,
    /// Cap on `|A|` used for `gamma_hat`; the true ratio may be smaller.
    pub max_set: usize,
}

/// Checks `f_avg(greedy) ≥ γ̂ / (width · d_in + γ̂) · OPT` exactly.
pub fn verify_bound<G: SequenceStructure, U: Utility>(
    inst: &Instance<G, U>,
    tie: TieBreak,
    max_set: usize,
) -> Result<BoundReport> {
    let prior = inst.dist.prior()?;
    let problem = Problem::new(&inst.graph, &inst.utility, &inst.rule, &prior);
    let opts = GreedyOptions::new(inst.k).with_tie(tie);
    let greedy_value = policy_expected_value(
        |fb: &mut dyn FeedbackOracle| adaptive_sequence_greedy(&problem, fb, &opts),
        &inst.graph,
        &inst.utility,
        &inst.rule,
        &inst.dist,
        ExpectationMode::Exact,
    )?;
    let opt_value = optimal_adaptive_value(inst)?;
    let gamma_hat = estimate_gamma(inst, max_set)?.gamma_hat;
    let d_in = inst.graph.max_in_degree();
    let width = inst.graph.step_width();
    let bound = gamma_hat / ((width * d_in) as f64 + gamma_hat);
    let ratio = if opt_value <= POSITIVE {
        1.0
    } else {
        greedy_value / opt_value
    };
    let holds = opt_value <= POSITIVE || greedy_value >= bound * opt_value - 1e-9;
    Ok(BoundReport {
        greedy_value,
        opt_value,
        gamma_hat,
        d_in,
        width,
        bound,
        ratio,
        holds,
        max_set,
    })
}

/// Hypergraph form of [`verify_bound`], where the width is the rank.
pub fn verify_hyper_bound<U: Utility>(
    inst: &Instance<OrderedHypergraph, U>,
    tie: TieBreak,
    max_set: usize,
) -> Result<BoundReport> {
    verify_bound(inst, tie, max_set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKind {
    #[default]
    Coverage,
    Linear,
}

fn random_bernoulli(rng: &mut ChaCha8Rng, n: usize, point_mass: bool) -> StateDistribution {
    if point_mass {
        let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        StateDistribution::point_mass(Realization::from_bits(&bits))
    } else {
        let q = (0..n).map(|_| rng.gen::<f64>()).collect();
        StateDistribution::bernoulli(q).expect("q in [0, 1)")
    }
}

/// Random digraph instance: 2 to `max_vertices` vertices, 1 to 10 distinct
/// arcs (self-loops allowed), weights and state probabilities in `[0, 1)`,
/// start-vertex rule and budget 2 to 5.
pub fn random_digraph_instance(
    seed: u64,
    max_vertices: usize,
    utility: UtilityKind,
    point_mass: bool,
) -> Instance<WeightedDigraph, BundledUtility> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_vertices.max(2));
    let target = rng.gen_range(1..=MAX_GAMMA_EDGES.min(n * n));
    let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
    while arcs.len() < target {
        let (s, d) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if arcs.iter().all(|&(a, b, _)| (a, b) != (s, d)) {
            arcs.push((s, d, rng.gen::<f64>()));
        }
    }
    let graph = WeightedDigraph::new(n, arcs).expect("generated arcs are valid");
    let utility = match utility {
        UtilityKind::Coverage => BundledUtility::Coverage(CoverageUtility::from_digraph(&graph)),
        UtilityKind::Linear => BundledUtility::Linear(LinearUtility::new(graph.weights()).expect("weights in [0, 1]")),
    };
    let dist = random_bernoulli(&mut rng, n, point_mass);
    let k = rng.gen_range(2..=5);
    Instance {
        graph,
        utility,
        rule: EdgeStateRule::StartVertex,
        dist,
        k,
    }
}

/// Random ordered-hypergraph instance with coverage utility: hyperedges of
/// length 1 to `max_rank`, each covering its last vertex. The budget is drawn
/// from `max(2, rank)` to 5.
pub fn random_hyper_instance(
    seed: u64,
    max_vertices: usize,
    max_rank: usize,
    point_mass: bool,
) -> Instance<OrderedHypergraph, CoverageUtility> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_vertices.max(2));
    let target = rng.gen_range(1..=MAX_GAMMA_EDGES);
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut attempts = 0;
    while edges.len() < target && attempts < 200 {
        attempts += 1;
        let len = rng.gen_range(1..=max_rank.max(1).min(n));
        let mut verts: Vec<usize> = (0..n).collect();
        verts.shuffle(&mut rng);
        verts.truncate(len);
        if !edges.contains(&verts) {
            edges.push(verts);
        }
    }
    let weights = edges.iter().map(|_| rng.gen::<f64>()).collect();
    let graph = OrderedHypergraph::new(n, edges).expect("generated hyperedges are valid");
    let utility = CoverageUtility::from_hypergraph(&graph, weights).expect("weights in [0, 1)");
    let dist = random_bernoulli(&mut rng, n, point_mass);
    // The hypergraph guarantee needs room for at least one full step.
    let k = rng.gen_range(graph.rank().max(2)..=5);
    Instance {
        graph,
        utility,
        rule: EdgeStateRule::StartVertex,
        dist,
        k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_vertices: usize,
    pub hypergraph: bool,
    pub max_rank: usize,
    pub utility: UtilityKind,
    pub point_mass: bool,
    pub max_set: usize,
    pub tie: TieBreak,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            instances: 200,
            seed: 0,
            max_vertices: MAX_ADAPTIVE_VERTICES,
            hypergraph: false,
            max_rank: 3,
            utility: UtilityKind::Coverage,
            point_mass: false,
            max_set: DEFAULT_MAX_SET,
            tie: TieBreak::LowestId,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub seed: u64,
    pub n: usize,
    pub edges: usize,
    pub report: BoundReport,
}

/// Verifies one campaign instance; instance `i` uses seed `cfg.seed + i`.
pub fn campaign_row(cfg: &CampaignConfig, i: usize) -> Result<CampaignRow> {
    let seed = cfg.seed.wrapping_add(i as u64);
    let (n, edges, report) = if cfg.hypergraph {
        let inst = random_hyper_instance(seed, cfg.max_vertices, cfg.max_rank, cfg.point_mass);
        (
            inst.graph.vertex_count(),
            inst.graph.edge_count(),
            verify_bound(&inst, cfg.tie, cfg.max_set)?,
        )
    } else {
        let inst = random_digraph_instance(seed, cfg.max_vertices, cfg.utility, cfg.point_mass);
        (
            inst.graph.vertex_count(),
            inst.graph.edge_count(),
            verify_bound(&inst, cfg.tie, cfg.max_set)?,
        )
    };
    Ok(CampaignRow { seed, n, edges, report })
}

/// Runs every campaign instance on the current rayon pool, in seed order.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Vec<CampaignRow>> {
    guard("vertex count", cfg.max_vertices, MAX_ADAPTIVE_VERTICES)?;
    (0..cfg.instances)
        .into_par_iter()
        .map(|i| campaign_row(cfg, i))
        .collect()
}

/// Bidirects a simple undirected graph with unit weights, paired with the
/// counting utility.
pub fn dks_reduce(n: usize, edges: &[(usize, usize)]) -> Result<(WeightedDigraph, LinearUtility)> {
    let mut arcs = Vec::with_capacity(edges.len() * 2);
    for &(u, v) in edges {
        if u == v {
            return Err(Error::input(format!(
                "self-loop {{{u}, {v}}} in an undirected simple graph"
            )));
        }
        arcs.push((u, v, 1.0));
        arcs.push((v, u, 1.0));
    }
    let graph = WeightedDigraph::new(n, arcs)?;
    let utility = LinearUtility::counting(graph.edge_count());
    Ok((graph, utility))
}

/// [`dks_reduce`] as an instance with every vertex deterministically in state 1.
pub fn dks_instance(n: usize, edges: &[(usize, usize)], k: usize) -> Result<Instance<WeightedDigraph, LinearUtility>> {
    let (graph, utility) = dks_reduce(n, edges)?;
    Ok(Instance {
        graph,
        utility,
        rule: EdgeStateRule::StartVertex,
        dist: StateDistribution::point_mass(Realization::all(n, State::ONE)),
        k,
    })
}
