//! Vertex states, (partial) realizations, edge-state rules and the
//! distributions realizations are drawn from.
//!
//! Unknown states are represented by absence from a partial map, never by a
//! sentinel value. Edge states are a deterministic function of the states of
//! the edge's vertices; [`EdgePosterior`] conditions the independent vertex
//! prior on a set of observed edge states.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{guard, Error, Result};
use crate::graph::{EdgeId, SequenceStructure, VertexId};

/// Largest vertex count `enumerate_realizations` accepts.
pub const MAX_ENUMERATED_VERTICES: usize = 20;

/// Largest joint table a posterior factor may grow to.
const MAX_FACTOR_ENTRIES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub u8);

impl State {
    pub const ZERO: State = State(0);
    pub const ONE: State = State(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A state for every vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "BTreeMap<VertexId, State>", try_from = "BTreeMap<VertexId, State>")]
pub struct Realization(Vec<State>);

impl Realization {
    pub fn new(states: Vec<State>) -> Self {
        Realization(states)
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Realization(bits.iter().copied().map(State).collect())
    }

    /// Binary realization whose vertex `i` is in state 1 iff bit `i` of `mask` is set.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Realization((0..n).map(|i| State(((mask >> i) & 1) as u8)).collect())
    }

    pub fn all(n: usize, s: State) -> Self {
        Realization(vec![s; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: VertexId) -> State {
        self.0[v.0]
    }

    pub fn states(&self) -> &[State] {
        &self.0
    }

    /// State the rule assigns to an edge with the given vertices.
    pub fn edge_state(&self, rule: &EdgeStateRule, verts: &[VertexId]) -> State {
        let reads = rule.reads(verts);
        let states: Vec<State> = reads.as_slice().iter().map(|&v| self.get(v)).collect();
        rule.apply(&states)
    }

    pub fn as_partial(&self) -> PartialRealization {
        PartialRealization(self.0.iter().enumerate().map(|(i, &s)| (VertexId(i), s)).collect())
    }
}

impl From<Realization> for BTreeMap<VertexId, State> {
    fn from(r: Realization) -> Self {
        r.as_partial().0
    }
}

impl TryFrom<BTreeMap<VertexId, State>> for Realization {
    type Error = String;

    fn try_from(map: BTreeMap<VertexId, State>) -> std::result::Result<Self, String> {
        let n = map.len();
        let mut states = Vec::with_capacity(n);
        for (i, (v, s)) in map.into_iter().enumerate() {
            if v.0 != i {
                return Err(format!("realization is missing vertex {i}"));
            }
            states.push(s);
        }
        Ok(Realization(states))
    }
}

/// States for a subset of the vertices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialRealization(BTreeMap<VertexId, State>);

impl PartialRealization {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, u8)>>(pairs: I) -> Result<Self> {
        let mut psi = PartialRealization::new();
        for (v, s) in pairs {
            psi.insert(VertexId(v), State(s))?;
        }
        Ok(psi)
    }

    pub fn get(&self, v: VertexId) -> Option<State> {
        self.0.get(&v).copied()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.0.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, State)> + '_ {
        self.0.iter().map(|(&v, &s)| (v, s))
    }

    pub fn domain(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.0.keys().copied()
    }

    /// In-place variant of [`PartialRealization::observe`].
    pub fn insert(&mut self, v: VertexId, s: State) -> Result<()> {
        match self.0.get(&v) {
            Some(&existing) if existing != s => Err(Error::Inconsistent {
                vertex: v.0,
                existing: existing.0,
                new: s.0,
            }),
            Some(_) => Ok(()),
            None => {
                self.0.insert(v, s);
                Ok(())
            }
        }
    }

    /// Returns a copy extended with `(v, s)`.
    ///
    /// Re-observing the same state is a no-op; a different state is an error.
    pub fn observe(&self, v: VertexId, s: State) -> Result<PartialRealization> {
        let mut next = self.clone();
        next.insert(v, s)?;
        Ok(next)
    }

    /// True iff `self ⊆ other`: same state wherever `self` is defined.
    pub fn is_subrealization(&self, other: &PartialRealization) -> bool {
        self.0.iter().all(|(v, s)| other.0.get(v) == Some(s))
    }

    pub fn is_consistent_with(&self, phi: &Realization) -> bool {
        self.0.iter().all(|(v, &s)| v.0 < phi.len() && phi.get(*v) == s)
    }
}

/// Partial map from edge id to edge state, dense over the edge count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeStates {
    states: Vec<Option<State>>,
    known: Vec<EdgeId>,
}

impl EdgeStates {
    pub fn new(m: usize) -> Self {
        EdgeStates {
            states: vec![None; m],
            known: Vec::new(),
        }
    }

    pub fn from_pairs<I: IntoIterator<Item = (EdgeId, State)>>(m: usize, pairs: I) -> Result<Self> {
        let mut out = EdgeStates::new(m);
        for (e, s) in pairs {
            out.insert(e, s)?;
        }
        Ok(out)
    }

    pub fn edge_count(&self) -> usize {
        self.states.len()
    }

    pub fn get(&self, e: EdgeId) -> Option<State> {
        self.states[e.0]
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.states[e.0].is_some()
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    pub fn insert(&mut self, e: EdgeId, s: State) -> Result<()> {
        if e.0 >= self.states.len() {
            return Err(Error::UnknownEdge {
                edge: e.0,
                m: self.states.len(),
            });
        }
        match self.states[e.0] {
            Some(existing) if existing != s => Err(Error::input(format!(
                "edge {e} already in state {existing}, cannot set {s}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.states[e.0] = Some(s);
                self.known.push(e);
                Ok(())
            }
        }
    }

    pub fn with(&self, e: EdgeId, s: State) -> Result<EdgeStates> {
        let mut next = self.clone();
        next.insert(e, s)?;
        Ok(next)
    }

    /// Known edges in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, State)> + '_ {
        self.known.iter().map(|&e| (e, self.states[e.0].unwrap()))
    }

    pub fn to_map(&self) -> BTreeMap<EdgeId, State> {
        self.iter().collect()
    }
}

/// Which vertex states of an edge a rule reads.
#[derive(Debug, Clone, Copy)]
pub enum Reads<'a> {
    Slice(&'a [VertexId]),
    Pair([VertexId; 2]),
}

impl Reads<'_> {
    pub fn as_slice(&self) -> &[VertexId] {
        match self {
            Reads::Slice(s) => s,
            Reads::Pair(p) => &p[..],
        }
    }
}

/// Deterministic map from the states of an edge's vertices to the edge's state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeStateRule {
    /// Edge takes the state of its first vertex.
    #[default]
    StartVertex,
    /// Edge takes the state of its last vertex.
    EndVertex,
    /// Minimum over all vertex states (logical AND for binary states).
    AllOf,
    /// Maximum over all vertex states (logical OR for binary states).
    AnyOf,
    /// Arbitrary table over (first vertex state, last vertex state), row-major.
    Table { alphabet: u8, table: Vec<u8> },
}

impl EdgeStateRule {
    pub fn table(alphabet: u8, table: Vec<u8>) -> Result<Self> {
        let a = alphabet as usize;
        if a == 0 || table.len() != a * a || table.iter().any(|&q| q >= alphabet) {
            return Err(Error::input(format!(
                "edge-state table must have {} entries below {alphabet}",
                a * a
            )));
        }
        Ok(EdgeStateRule::Table { alphabet, table })
    }

    pub fn reads<'a>(&self, verts: &'a [VertexId]) -> Reads<'a> {
        match self {
            EdgeStateRule::StartVertex => Reads::Slice(&verts[..1]),
            EdgeStateRule::EndVertex => Reads::Slice(&verts[verts.len() - 1..]),
            EdgeStateRule::AllOf | EdgeStateRule::AnyOf => Reads::Slice(verts),
            EdgeStateRule::Table { .. } => {
                if verts.len() == 1 {
                    Reads::Slice(verts)
                } else {
                    Reads::Pair([verts[0], verts[verts.len() - 1]])
                }
            }
        }
    }

    /// Applies the rule to the states of the vertices returned by [`reads`](Self::reads).
    pub fn apply(&self, read: &[State]) -> State {
        match self {
            EdgeStateRule::StartVertex | EdgeStateRule::EndVertex => read[0],
            EdgeStateRule::AllOf => read.iter().copied().min().unwrap(),
            EdgeStateRule::AnyOf => read.iter().copied().max().unwrap(),
            EdgeStateRule::Table { alphabet, table } => {
                let (first, last) = (read[0], read[read.len() - 1]);
                State(table[first.index() * *alphabet as usize + last.index()])
            }
        }
    }
}

/// Edge states determined by `psi` for the given edges: an edge gets a state
/// iff every vertex the rule reads is observed.
pub fn induce_edge_partial<G: SequenceStructure + ?Sized>(
    psi: &PartialRealization,
    graph: &G,
    edges: &[EdgeId],
    rule: &EdgeStateRule,
) -> EdgeStates {
    let mut out = EdgeStates::new(graph.edge_count());
    for &e in edges {
        let reads = rule.reads(graph.edge_vertices(e));
        let states: Option<Vec<State>> = reads.as_slice().iter().map(|&v| psi.get(v)).collect();
        if let Some(states) = states {
            out.insert(e, rule.apply(&states)).expect("each edge is assigned once");
        }
    }
    out
}

pub fn is_subrealization(psi: &PartialRealization, other: &PartialRealization) -> bool {
    psi.is_subrealization(other)
}

/// Prior over realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StateDistribution {
    /// Vertex `i` is in state 1 with probability `q[i]`, independently.
    Bernoulli { q: Vec<f64> },
    /// A single known realization.
    PointMass { realization: Realization },
    /// Ground truth replayed from held-out data.
    Replay {
        n: usize,
        states: BTreeMap<VertexId, State>,
    },
}

impl StateDistribution {
    pub fn bernoulli(q: Vec<f64>) -> Result<Self> {
        if let Some((i, p)) = q.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::input(format!(
                "bernoulli parameter {p} of vertex {i} outside [0, 1]"
            )));
        }
        Ok(StateDistribution::Bernoulli { q })
    }

    pub fn uniform(n: usize, q: f64) -> Result<Self> {
        Self::bernoulli(vec![q; n])
    }

    pub fn point_mass(realization: Realization) -> Self {
        StateDistribution::PointMass { realization }
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            StateDistribution::Bernoulli { q } => q.len(),
            StateDistribution::PointMass { realization } => realization.len(),
            StateDistribution::Replay { n, .. } => *n,
        }
    }

    fn replay_realization(n: usize, states: &BTreeMap<VertexId, State>) -> Result<Realization> {
        (0..n)
            .map(|i| {
                states
                    .get(&VertexId(i))
                    .copied()
                    .ok_or_else(|| Error::input(format!("replay has no state for vertex {i}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Realization)
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            StateDistribution::Bernoulli { q } => q.iter().all(|&p| p == 0.0 || p == 1.0),
            _ => true,
        }
    }

    /// Per-vertex marginals as a binary prior.
    pub fn prior(&self) -> Result<VertexPrior> {
        let probs = match self {
            StateDistribution::Bernoulli { q } => q.iter().map(|&p| vec![1.0 - p, p]).collect(),
            StateDistribution::PointMass { realization } => one_hot(realization),
            StateDistribution::Replay { n, states } => one_hot(&Self::replay_realization(*n, states)?),
        };
        VertexPrior::new(2, probs)
    }

    /// Draws one realization; deterministic given `seed`.
    pub fn sample_realization(&self, seed: u64) -> Result<Realization> {
        match self {
            StateDistribution::Bernoulli { q } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(Realization(
                    q.iter().map(|&p| State((rng.gen::<f64>() < p) as u8)).collect(),
                ))
            }
            StateDistribution::PointMass { realization } => Ok(realization.clone()),
            StateDistribution::Replay { n, states } => Self::replay_realization(*n, states),
        }
    }

    /// Every realization with positive probability, with its probability.
    pub fn enumerate_realizations(&self, n: usize) -> Result<Vec<(Realization, f64)>> {
        guard("vertex count", n, MAX_ENUMERATED_VERTICES)?;
        if self.vertex_count() != n {
            return Err(Error::input(format!(
                "distribution covers {} vertices, expected {n}",
                self.vertex_count()
            )));
        }
        match self {
            StateDistribution::Bernoulli { q } => {
                let mut out = Vec::new();
                for mask in 0u64..(1u64 << n) {
                    let mut p = 1.0;
                    for (i, &qi) in q.iter().enumerate() {
                        p *= if (mask >> i) & 1 == 1 { qi } else { 1.0 - qi };
                    }
                    if p > 0.0 {
                        out.push((Realization::from_mask(n, mask), p));
                    }
                }
                Ok(out)
            }
            StateDistribution::PointMass { realization } => Ok(vec![(realization.clone(), 1.0)]),
            StateDistribution::Replay { n, states } => Ok(vec![(Self::replay_realization(*n, states)?, 1.0)]),
        }
    }
}

fn one_hot(r: &Realization) -> Vec<Vec<f64>> {
    r.states()
        .iter()
        .map(|s| {
            let mut p = vec![0.0, 0.0];
            p[s.index()] = 1.0;
            p
        })
        .collect()
}

pub fn sample_realization(dist: &StateDistribution, seed: u64) -> Result<Realization> {
    dist.sample_realization(seed)
}

pub fn enumerate_realizations(dist: &StateDistribution, n: usize) -> Result<Vec<(Realization, f64)>> {
    dist.enumerate_realizations(n)
}

/// Independent per-vertex state marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPrior {
    alphabet: usize,
    probs: Vec<Vec<f64>>,
}

impl VertexPrior {
    pub fn new(alphabet: usize, probs: Vec<Vec<f64>>) -> Result<Self> {
        for (i, p) in probs.iter().enumerate() {
            let total: f64 = p.iter().sum();
            if p.len() != alphabet || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::input(format!(
                    "marginal of vertex {i} is not a distribution over {alphabet} states"
                )));
            }
        }
        Ok(VertexPrior { alphabet, probs })
    }

    /// Binary prior with `P(state 1) = q[i]`.
    pub fn bernoulli(q: &[f64]) -> Result<Self> {
        StateDistribution::bernoulli(q.to_vec())?.prior()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn vertex_count(&self) -> usize {
        self.probs.len()
    }

    pub fn marginal(&self, v: VertexId) -> &[f64] {
        &self.probs[v.0]
    }
}

#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<VertexId>,
    // Entry index is Σ state(vars[i]) · alphabet^i.
    table: Vec<f64>,
}

/// The vertex prior conditioned on observed edge states.
///
/// Vertices whose state is constrained only through single-vertex evidence
/// keep an independent marginal; evidence that couples several vertices
/// (e.g. `AllOf` in state 0) merges them into one joint factor.
#[derive(Debug, Clone)]
pub struct EdgePosterior<'a> {
    prior: &'a VertexPrior,
    factors: Vec<Factor>,
    // usize::MAX: still the untouched prior marginal.
    factor_of: Vec<usize>,
}

impl<'a> EdgePosterior<'a> {
    pub fn unconditioned(prior: &'a VertexPrior) -> Self {
        EdgePosterior {
            prior,
            factors: Vec::new(),
            factor_of: vec![usize::MAX; prior.vertex_count()],
        }
    }

    pub fn new<G: SequenceStructure + ?Sized>(
        prior: &'a VertexPrior,
        rule: &EdgeStateRule,
        graph: &G,
        evidence: &EdgeStates,
    ) -> Result<Self> {
        let mut post = Self::unconditioned(prior);
        for (e, q) in evidence.iter() {
            let reads = rule.reads(graph.edge_vertices(e));
            post.condition(rule, reads.as_slice(), q)?;
        }
        Ok(post)
    }

    fn factor_for(&mut self, v: VertexId) -> usize {
        if self.factor_of[v.0] == usize::MAX {
            self.factors.push(Factor {
                vars: vec![v],
                table: self.prior.marginal(v).to_vec(),
            });
            self.factor_of[v.0] = self.factors.len() - 1;
        }
        self.factor_of[v.0]
    }

    fn condition(&mut self, rule: &EdgeStateRule, reads: &[VertexId], q: State) -> Result<()> {
        let a = self.prior.alphabet;
        let mut ids: Vec<usize> = reads.iter().map(|&v| self.factor_for(v)).collect();
        ids.sort_unstable();
        ids.dedup();
        let target = if ids.len() == 1 {
            ids[0]
        } else {
            let mut vars = Vec::new();
            let mut table = vec![1.0];
            for &id in &ids {
                let f = &self.factors[id];
                let size = table.len() * f.table.len();
                guard("posterior factor entries", size, MAX_FACTOR_ENTRIES)?;
                let mut next = Vec::with_capacity(size);
                for &pf in &f.table {
                    for &pt in &table {
                        next.push(pt * pf);
                    }
                }
                table = next;
                vars.extend_from_slice(&f.vars);
            }
            self.factors.push(Factor { vars, table });
            let id = self.factors.len() - 1;
            for &v in &self.factors[id].vars.clone() {
                self.factor_of[v.0] = id;
            }
            id
        };
        let f = &mut self.factors[target];
        let slot: Vec<usize> = reads
            .iter()
            .map(|v| f.vars.iter().position(|u| u == v).unwrap())
            .collect();
        let mut states = vec![State(0); reads.len()];
        let mut total = 0.0;
        for (idx, p) in f.table.iter_mut().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (k, &s) in slot.iter().enumerate() {
                states[k] = State(((idx / a.pow(s as u32)) % a) as u8);
            }
            if rule.apply(&states) != q {
                *p = 0.0;
            }
            total += *p;
        }
        if total <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        for p in f.table.iter_mut() {
            *p /= total;
        }
        Ok(())
    }

    pub fn vertex_marginal(&self, v: VertexId) -> Vec<f64> {
        self.read_distribution(&[v], |s| s[0])
    }

    /// Conditional distribution of the state of an edge with vertices `verts`.
    pub fn edge_state_distribution(&self, rule: &EdgeStateRule, verts: &[VertexId]) -> Vec<f64> {
        let reads = rule.reads(verts);
        self.read_distribution(reads.as_slice(), |s| rule.apply(s))
    }

    fn read_distribution(&self, reads: &[VertexId], f: impl Fn(&[State]) -> State) -> Vec<f64> {
        let a = self.prior.alphabet;
        let mut out = vec![0.0; a];
        // Fast path: one read vertex with an untouched or singleton factor.
        if reads.len() == 1 {
            let v = reads[0];
            let probs: &[f64] = match self.factor_of[v.0] {
                usize::MAX => self.prior.marginal(v),
                id if self.factors[id].vars.len() == 1 => &self.factors[id].table,
                _ => &[],
            };
            if !probs.is_empty() {
                for (s, &p) in probs.iter().enumerate() {
                    if p > 0.0 {
                        out[f(&[State(s as u8)]).index()] += p;
                    }
                }
                return out;
            }
        }
        // General case: enumerate the joint table of every factor touched.
        let mut blocks: Vec<(Vec<VertexId>, &[f64])> = Vec::new();
        for &v in reads {
            if blocks.iter().any(|(vars, _)| vars.contains(&v)) {
                continue;
            }
            match self.factor_of[v.0] {
                usize::MAX => blocks.push((vec![v], self.prior.marginal(v))),
                id => blocks.push((self.factors[id].vars.clone(), &self.factors[id].table)),
            }
        }
        let mut slot = Vec::with_capacity(reads.len());
        for &v in reads {
            let (b, i) = blocks
                .iter()
                .enumerate()
                .find_map(|(b, (vars, _))| vars.iter().position(|&u| u == v).map(|i| (b, i)))
                .unwrap();
            slot.push((b, i));
        }
        let mut choice = vec![0usize; blocks.len()];
        let mut states = vec![State(0); reads.len()];
        loop {
            let mut p = 1.0;
            for (b, &c) in choice.iter().enumerate() {
                p *= blocks[b].1[c];
            }
            if p > 0.0 {
                for (k, &(b, i)) in slot.iter().enumerate() {
                    states[k] = State(((choice[b] / a.pow(i as u32)) % a) as u8);
                }
                out[f(&states).index()] += p;
            }
            let mut b = 0;
            loop {
                if b == blocks.len() {
                    return out;
                }
                choice[b] += 1;
                if choice[b] < blocks[b].1.len() {
                    break;
                }
                choice[b] = 0;
                b += 1;
            }
        }
    }
}
