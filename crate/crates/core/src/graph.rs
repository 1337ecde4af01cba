//! Weighted digraphs and ordered hypergraphs over dense vertex ids.
//!
//! A sequence of vertices induces the edges whose vertices all occur in it in
//! the edge's own order. For a digraph this means an arc `(u, v)` is induced
//! once `u` appears strictly before `v`, and a self-loop as soon as its vertex
//! appears. Both structures implement [`SequenceStructure`], which is all the
//! policies and oracles need.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub usize);

impl VertexId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub usize);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An ordered list of distinct vertices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(Vec<VertexId>);

impl Sequence {
    pub fn new(items: Vec<VertexId>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for v in &items {
            if !seen.insert(*v) {
                return Err(Error::RepeatedVertex(v.0));
            }
        }
        Ok(Sequence(items))
    }

    pub fn from_indices(items: &[usize]) -> Result<Self> {
        Self::new(items.iter().copied().map(VertexId).collect())
    }

    pub fn empty() -> Self {
        Sequence(Vec::new())
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().map(|v| v.0).collect()
    }

    /// Position lookup table for a structure with `n` vertices.
    pub fn positions(&self, n: usize) -> Result<Positions> {
        let mut pos = Positions::new(n);
        for &v in &self.0 {
            if v.0 >= n {
                return Err(Error::UnknownVertex { vertex: v.0, n });
            }
            pos.push(v);
        }
        Ok(pos)
    }

    pub(crate) fn push_unchecked(&mut self, v: VertexId) {
        self.0.push(v);
    }
}

impl From<Sequence> for Vec<VertexId> {
    fn from(s: Sequence) -> Self {
        s.0
    }
}

/// Position of every vertex in a sequence under construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Positions {
    slots: Vec<Option<usize>>,
    len: usize,
}

impl Positions {
    pub fn new(n: usize) -> Self {
        Positions {
            slots: vec![None; n],
            len: 0,
        }
    }

    pub fn of(&self, v: VertexId) -> Option<usize> {
        self.slots[v.0]
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.slots[v.0].is_some()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Appends `v`; returns false if it was already present.
    pub fn push(&mut self, v: VertexId) -> bool {
        if self.slots[v.0].is_some() {
            return false;
        }
        self.slots[v.0] = Some(self.len);
        self.len += 1;
        true
    }
}

/// The common view used by greedy policies and exact oracles.
///
/// Every edge is an ordered list of distinct vertices; its last vertex is the
/// one it "ends" at, which is what in-degree and coverage targets refer to.
pub trait SequenceStructure: Sync {
    fn vertex_count(&self) -> usize;
    fn edge_count(&self) -> usize;
    fn edge_vertices(&self, e: EdgeId) -> &[VertexId];
    fn edges_ending_at(&self, v: VertexId) -> &[EdgeId];
    /// Whether `e` may still be picked given the current sequence.
    fn is_valid(&self, e: EdgeId, pos: &Positions) -> bool;
    /// Whether `e` is induced by the current sequence.
    fn is_induced(&self, e: EdgeId, pos: &Positions) -> bool;
    /// Number of vertices a single greedy step may append (2 for digraphs, r for hypergraphs).
    fn step_width(&self) -> usize;

    fn max_in_degree(&self) -> usize {
        (0..self.vertex_count())
            .map(|v| self.edges_ending_at(VertexId(v)).len())
            .max()
            .unwrap_or(0)
    }

    fn edge_target(&self, e: EdgeId) -> VertexId {
        *self.edge_vertices(e).last().expect("edges have at least one vertex")
    }

    fn edge_ids(&self) -> std::iter::Map<std::ops::Range<usize>, fn(usize) -> EdgeId> {
        (0..self.edge_count()).map(EdgeId as fn(usize) -> EdgeId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    ends: [VertexId; 2],
    pub weight: f64,
}

impl Edge {
    pub fn src(&self) -> VertexId {
        self.ends[0]
    }

    pub fn dst(&self) -> VertexId {
        self.ends[1]
    }

    pub fn is_loop(&self) -> bool {
        self.ends[0] == self.ends[1]
    }

    /// `[v]` for a self-loop, `[src, dst]` otherwise.
    pub fn vertices(&self) -> &[VertexId] {
        if self.is_loop() {
            &self.ends[..1]
        } else {
            &self.ends[..]
        }
    }
}

/// Directed graph with weights in `[0, 1]`, self-loops allowed, no parallel arcs.
///
/// Edge ids follow lexicographic `(src, dst)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n: usize,
    edges: Vec<Edge>,
    incoming: Vec<Vec<EdgeId>>,
    outgoing: Vec<Vec<EdgeId>>,
    labels: Option<Vec<String>>,
}

impl WeightedDigraph {
    pub fn new<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut list = Vec::new();
        for (src, dst, weight) in edges {
            for v in [src, dst] {
                if v >= n {
                    return Err(Error::UnknownVertex { vertex: v, n });
                }
            }
            if !(0.0..=1.0).contains(&weight) {
                return Err(Error::InvalidWeight {
                    edge: format!("({src}, {dst})"),
                    weight,
                });
            }
            list.push(Edge {
                ends: [VertexId(src), VertexId(dst)],
                weight,
            });
        }
        list.sort_by_key(|e| e.ends);
        for pair in list.windows(2) {
            if pair[0].ends == pair[1].ends {
                let (s, d) = (pair[0].ends[0], pair[0].ends[1]);
                return Err(Error::DuplicateEdge(format!("({s}, {d})")));
            }
        }
        let mut incoming = vec![Vec::new(); n];
        let mut outgoing = vec![Vec::new(); n];
        for (i, e) in list.iter().enumerate() {
            incoming[e.dst().0].push(EdgeId(i));
            outgoing[e.src().0].push(EdgeId(i));
        }
        Ok(WeightedDigraph {
            n,
            edges: list,
            incoming,
            outgoing,
            labels: None,
        })
    }

    pub fn empty() -> Self {
        Self::new(0, std::iter::empty()).expect("empty graph is valid")
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::input(format!("{} labels for {} vertices", labels.len(), self.n)));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, v: VertexId) -> Option<&str> {
        self.labels.as_ref().map(|l| l[v.0].as_str())
    }

    pub fn find_edge(&self, src: VertexId, dst: VertexId) -> Option<EdgeId> {
        self.edges
            .binary_search_by_key(&[src, dst], |e| e.ends)
            .ok()
            .map(EdgeId)
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.incoming[v.0]
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.outgoing[v.0]
    }

    pub fn self_loop_weight(&self, v: VertexId) -> Option<f64> {
        self.find_edge(v, v).map(|e| self.edges[e.0].weight)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    fn check_sequence(&self, sigma: &Sequence) -> Result<Positions> {
        sigma.positions(self.n)
    }

    /// Edges `(u, v)` with `u` at or before `v` in `sigma`.
    pub fn induced_edges(&self, sigma: &Sequence) -> Result<Vec<EdgeId>> {
        let pos = self.check_sequence(sigma)?;
        Ok(self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| match (pos.of(e.src()), pos.of(e.dst())) {
                (Some(i), Some(j)) => i <= j,
                _ => false,
            })
            .map(|(i, _)| EdgeId(i))
            .collect())
    }

    /// Edges whose destination is not yet in `sigma`.
    pub fn valid_edges(&self, sigma: &Sequence) -> Result<Vec<EdgeId>> {
        let pos = self.check_sequence(sigma)?;
        Ok(self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| !pos.contains(e.dst()))
            .map(|(i, _)| EdgeId(i))
            .collect())
    }

    /// Largest in-degree, self-loops included.
    pub fn max_in_degree(&self) -> usize {
        self.incoming.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Writes the `#vertices` / `#label` / `src\tdst\tweight` format.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#vertices {}", self.n)?;
        if let Some(labels) = &self.labels {
            for (i, name) in labels.iter().enumerate() {
                writeln!(out, "#label {i} {name}")?;
            }
        }
        for e in &self.edges {
            writeln!(out, "{}\t{}\t{}", e.src(), e.dst(), e.weight)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut labels: Vec<(usize, String)> = Vec::new();
        let mut edges = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let parse_err = |msg: String| Error::Parse { line: lineno, msg };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#vertices") {
                let v = rest
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad vertex count {:?}", rest.trim())))?;
                n = Some(v);
            } else if let Some(rest) = line.strip_prefix("#label") {
                let rest = rest.trim_start();
                let (id, name) = rest
                    .split_once(' ')
                    .ok_or_else(|| parse_err("expected `#label <id> <name>`".into()))?;
                let id = id.parse().map_err(|_| parse_err(format!("bad label id {id:?}")))?;
                labels.push((id, name.to_string()));
            } else if line.starts_with('#') {
                continue;
            } else {
                if n.is_none() {
                    return Err(parse_err("edge before `#vertices` header".into()));
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 3 {
                    return Err(parse_err(format!(
                        "expected 3 tab-separated fields, found {}",
                        fields.len()
                    )));
                }
                let src = fields[0]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad source {:?}", fields[0])))?;
                let dst = fields[1]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad destination {:?}", fields[1])))?;
                let w = fields[2]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad weight {:?}", fields[2])))?;
                edges.push((src, dst, w));
            }
        }
        let n = n.ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing `#vertices` header".into(),
        })?;
        let g = WeightedDigraph::new(n, edges)?;
        if labels.is_empty() {
            return Ok(g);
        }
        let mut table = vec![None; n];
        for (id, name) in labels {
            if id >= n {
                return Err(Error::UnknownVertex { vertex: id, n });
            }
            table[id] = Some(name);
        }
        let table = table
            .into_iter()
            .enumerate()
            .map(|(i, l)| l.unwrap_or_else(|| i.to_string()))
            .collect();
        g.with_labels(table)
    }
}

impl SequenceStructure for WeightedDigraph {
    fn vertex_count(&self) -> usize {
        self.n
    }

    fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn edge_vertices(&self, e: EdgeId) -> &[VertexId] {
        self.edges[e.0].vertices()
    }

    fn edges_ending_at(&self, v: VertexId) -> &[EdgeId] {
        &self.incoming[v.0]
    }

    fn is_valid(&self, e: EdgeId, pos: &Positions) -> bool {
        !pos.contains(self.edges[e.0].dst())
    }

    fn is_induced(&self, e: EdgeId, pos: &Positions) -> bool {
        let edge = &self.edges[e.0];
        matches!((pos.of(edge.src()), pos.of(edge.dst())), (Some(i), Some(j)) if i <= j)
    }

    fn step_width(&self) -> usize {
        2
    }

    fn max_in_degree(&self) -> usize {
        WeightedDigraph::max_in_degree(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedHyperedge(Vec<VertexId>);

impl OrderedHyperedge {
    pub fn new(vertices: Vec<VertexId>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::input("hyperedge must have at least one vertex"));
        }
        let seq = Sequence::new(vertices)?;
        Ok(OrderedHyperedge(seq.into()))
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Hypergraph whose hyperedges are ordered vertex lists. Edge ids follow
/// insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedHypergraph {
    n: usize,
    hyperedges: Vec<OrderedHyperedge>,
    ending: Vec<Vec<EdgeId>>,
    rank: usize,
}

impl OrderedHypergraph {
    pub fn new<I>(n: usize, hyperedges: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<usize>>,
    {
        let mut list = Vec::new();
        let mut seen = HashSet::new();
        for verts in hyperedges {
            for &v in &verts {
                if v >= n {
                    return Err(Error::UnknownVertex { vertex: v, n });
                }
            }
            if !seen.insert(verts.clone()) {
                return Err(Error::DuplicateEdge(format!("{verts:?}")));
            }
            list.push(OrderedHyperedge::new(verts.into_iter().map(VertexId).collect())?);
        }
        let mut ending = vec![Vec::new(); n];
        for (i, e) in list.iter().enumerate() {
            let last = e.vertices()[e.len() - 1];
            ending[last.0].push(EdgeId(i));
        }
        let rank = list.iter().map(OrderedHyperedge::len).max().unwrap_or(0);
        Ok(OrderedHypergraph {
            n,
            hyperedges: list,
            ending,
            rank,
        })
    }

    /// Encodes a digraph: self-loops become length-1 hyperedges, arcs length-2
    /// ones, in the digraph's edge id order.
    pub fn from_digraph(g: &WeightedDigraph) -> Self {
        let lists = g.edges().iter().map(|e| e.vertices().iter().map(|v| v.0).collect());
        Self::new(g.vertex_count(), lists).expect("a digraph encodes to a valid hypergraph")
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn hyperedge(&self, e: EdgeId) -> &OrderedHyperedge {
        &self.hyperedges[e.0]
    }

    pub fn hyperedges(&self) -> &[OrderedHyperedge] {
        &self.hyperedges
    }

    /// Length of the longest hyperedge (0 when there are none).
    pub fn rank(&self) -> usize {
        self.rank
    }

    fn prefix_consistent(e: &OrderedHyperedge, pos: &Positions) -> (bool, bool) {
        // Returns (sigma ∩ V(e) is a prefix of e, every vertex of e is in sigma).
        let mut last: Option<usize> = None;
        let mut seen_missing = false;
        for &v in e.vertices() {
            match pos.of(v) {
                Some(p) => {
                    if seen_missing || last.is_some_and(|l| p < l) {
                        return (false, false);
                    }
                    last = Some(p);
                }
                None => seen_missing = true,
            }
        }
        (true, !seen_missing)
    }

    /// Hyperedges whose overlap with `sigma` is a prefix of the hyperedge and
    /// which are not yet fully contained in `sigma`.
    pub fn hyper_valid_edges(&self, sigma: &Sequence) -> Result<Vec<EdgeId>> {
        let pos = sigma.positions(self.n)?;
        Ok((0..self.hyperedges.len())
            .map(EdgeId)
            .filter(|&e| SequenceStructure::is_valid(self, e, &pos))
            .collect())
    }

    /// Hyperedges whose vertices all occur in `sigma`, in hyperedge order.
    pub fn fully_induced_hyperedges(&self, sigma: &Sequence) -> Result<Vec<EdgeId>> {
        let pos = sigma.positions(self.n)?;
        Ok((0..self.hyperedges.len())
            .map(EdgeId)
            .filter(|&e| SequenceStructure::is_induced(self, e, &pos))
            .collect())
    }

    /// Largest number of hyperedges ending at one vertex.
    pub fn max_in_degree(&self) -> usize {
        self.ending.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#vertices {}", self.n)?;
        for e in &self.hyperedges {
            let line: Vec<String> = e.vertices().iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut n = None;
        let mut lists = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#vertices") {
                n = Some(rest.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad vertex count {:?}", rest.trim()),
                })?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let verts = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("bad vertex id {t:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            lists.push(verts);
        }
        let n = n.ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing `#vertices` header".into(),
        })?;
        Self::new(n, lists)
    }
}

impl SequenceStructure for OrderedHypergraph {
    fn vertex_count(&self) -> usize {
        self.n
    }

    fn edge_count(&self) -> usize {
        self.hyperedges.len()
    }

    fn edge_vertices(&self, e: EdgeId) -> &[VertexId] {
        self.hyperedges[e.0].vertices()
    }

    fn edges_ending_at(&self, v: VertexId) -> &[EdgeId] {
        &self.ending[v.0]
    }

    fn is_valid(&self, e: EdgeId, pos: &Positions) -> bool {
        let (prefix, full) = Self::prefix_consistent(&self.hyperedges[e.0], pos);
        prefix && !full
    }

    fn is_induced(&self, e: EdgeId, pos: &Positions) -> bool {
        let (prefix, full) = Self::prefix_consistent(&self.hyperedges[e.0], pos);
        prefix && full
    }

    fn step_width(&self) -> usize {
        self.rank.max(1)
    }

    fn max_in_degree(&self) -> usize {
        OrderedHypergraph::max_in_degree(self)
    }
}
