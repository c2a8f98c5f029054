//! Vertex-labeled graphs, triples and the verification predicates the rest of
//! the crate relies on.
//!
//! Vertices are dense `0..n` indices. Vertex subsets and adjacency rows are
//! bitsets, so neighbourhood intersections reduce to word-wise `&`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vertex = u32;

const WORD: usize = 64;

fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

/// A subset of `0..n` stored as a bitset.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VertexSet {
    n: usize,
    words: Vec<u64>,
}

impl VertexSet {
    pub fn new(n: usize) -> Self {
        VertexSet {
            n,
            words: vec![0; words_for(n)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::new(n);
        for v in 0..n {
            s.insert(v as Vertex);
        }
        s
    }

    pub fn from_iter_in(n: usize, it: impl IntoIterator<Item = Vertex>) -> Self {
        let mut s = Self::new(n);
        for v in it {
            s.insert(v);
        }
        s
    }

    /// Size of the ground set `0..n`.
    pub fn universe(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn contains(&self, v: Vertex) -> bool {
        let v = v as usize;
        v < self.n && self.words[v / WORD] >> (v % WORD) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, v: Vertex) -> bool {
        let v = v as usize;
        assert!(v < self.n, "vertex {v} outside universe of size {}", self.n);
        let had = self.words[v / WORD] >> (v % WORD) & 1 == 1;
        self.words[v / WORD] |= 1 << (v % WORD);
        !had
    }

    #[inline]
    pub fn remove(&mut self, v: Vertex) -> bool {
        let v = v as usize;
        if v >= self.n {
            return false;
        }
        let had = self.words[v / WORD] >> (v % WORD) & 1 == 1;
        self.words[v / WORD] &= !(1 << (v % WORD));
        had
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some((i * WORD + b) as Vertex)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<Vertex> {
        self.iter().collect()
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        debug_assert_eq!(self.n, other.n);
        VertexSet {
            n: self.n,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        debug_assert_eq!(self.n, other.n);
        VertexSet {
            n: self.n,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        debug_assert_eq!(self.n, other.n);
        VertexSet {
            n: self.n,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & !b)
                .collect(),
        }
    }

    pub fn complement(&self) -> VertexSet {
        VertexSet::full(self.n).difference(self)
    }

    pub fn intersection_len(&self, other: &VertexSet) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// An unordered 3-subset of vertices, stored in strictly increasing order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[Vertex; 3]", into = "[Vertex; 3]")]
pub struct Triple {
    a: Vertex,
    b: Vertex,
    c: Vertex,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("triple ({0}, {1}, {2}) repeats a vertex")]
pub struct DegenerateTriple(pub Vertex, pub Vertex, pub Vertex);

impl Triple {
    /// Builds a triple from three distinct vertices in any order.
    ///
    /// Panics if two vertices coincide; use [`Triple::try_new`] for input
    /// that has not been validated.
    pub fn new(x: Vertex, y: Vertex, z: Vertex) -> Triple {
        Self::try_new(x, y, z).expect("triple vertices must be distinct")
    }

    pub fn try_new(x: Vertex, y: Vertex, z: Vertex) -> Result<Triple, DegenerateTriple> {
        let mut v = [x, y, z];
        v.sort_unstable();
        if v[0] == v[1] || v[1] == v[2] {
            return Err(DegenerateTriple(x, y, z));
        }
        Ok(Triple {
            a: v[0],
            b: v[1],
            c: v[2],
        })
    }

    pub fn vertices(&self) -> [Vertex; 3] {
        [self.a, self.b, self.c]
    }

    pub fn a(&self) -> Vertex {
        self.a
    }
    pub fn b(&self) -> Vertex {
        self.b
    }
    pub fn c(&self) -> Vertex {
        self.c
    }

    /// The three vertex pairs, each as `(low, high)`.
    pub fn edges(&self) -> [Edge; 3] {
        [
            Edge(self.a, self.b),
            Edge(self.a, self.c),
            Edge(self.b, self.c),
        ]
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.a == v || self.b == v || self.c == v
    }

    pub fn contains_edge(&self, e: Edge) -> bool {
        self.contains(e.0) && self.contains(e.1)
    }

    pub fn shares_edge(&self, other: &Triple) -> bool {
        self.vertices().iter().filter(|v| other.contains(**v)).count() >= 2
    }

    /// The vertex of the triple not on `e`. `e` must be an edge of the triple.
    pub fn opposite(&self, e: Edge) -> Vertex {
        debug_assert!(self.contains_edge(e));
        self.vertices()
            .into_iter()
            .find(|&v| v != e.0 && v != e.1)
            .expect("edge belongs to triple")
    }

    pub fn max_vertex(&self) -> Vertex {
        self.c
    }

    pub fn is_within(&self, set: &VertexSet) -> bool {
        set.contains(self.a) && set.contains(self.b) && set.contains(self.c)
    }

    pub fn count_in(&self, set: &VertexSet) -> usize {
        self.vertices().iter().filter(|&&v| set.contains(v)).count()
    }

    /// Colex rank among all 3-subsets of the naturals; stable across `n`.
    pub fn rank(&self) -> u64 {
        let (a, b, c) = (self.a as u64, self.b as u64, self.c as u64);
        c * (c - 1) * (c.wrapping_sub(2)) / 6 + b * (b - 1) / 2 + a
    }

    pub fn map(&self, f: impl Fn(Vertex) -> Vertex) -> Triple {
        Triple::new(f(self.a), f(self.b), f(self.c))
    }
}

impl TryFrom<[Vertex; 3]> for Triple {
    type Error = DegenerateTriple;
    fn try_from(v: [Vertex; 3]) -> Result<Self, Self::Error> {
        Triple::try_new(v[0], v[1], v[2])
    }
}

impl From<Triple> for [Vertex; 3] {
    fn from(t: Triple) -> Self {
        t.vertices()
    }
}

impl fmt::Debug for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{} {} {}}}", self.a, self.b, self.c)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.a, self.b, self.c)
    }
}

/// An unordered vertex pair with `.0 < .1`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(pub Vertex, pub Vertex);

impl Edge {
    pub fn new(u: Vertex, v: Vertex) -> Edge {
        assert_ne!(u, v, "self-loop");
        if u < v {
            Edge(u, v)
        } else {
            Edge(v, u)
        }
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// Simple undirected graph on `0..n` with bitset adjacency rows.
#[derive(Clone, PartialEq, Eq)]
pub struct DenseGraph {
    n: usize,
    rows: Vec<VertexSet>,
    edge_count: usize,
}

impl DenseGraph {
    pub fn empty(n: usize) -> Self {
        DenseGraph {
            n,
            rows: vec![VertexSet::new(n); n],
            edge_count: 0,
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for u in 0..n as Vertex {
            for v in u + 1..n as Vertex {
                g.add_edge(u, v);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (Vertex, Vertex)>) -> Self {
        let mut g = Self::empty(n);
        for (u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    /// The edge shadow of a triple set: every pair covered by at least one triple.
    pub fn shadow_of(ts: &TripleSet) -> Self {
        let mut g = Self::empty(ts.n());
        for t in ts.iter() {
            for e in t.edges() {
                g.add_edge(e.0, e.1);
            }
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Inserts `uv`; returns false if it was already present.
    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> bool {
        assert_ne!(u, v, "self-loops are not allowed");
        let fresh = self.rows[u as usize].insert(v);
        self.rows[v as usize].insert(u);
        if fresh {
            self.edge_count += 1;
        }
        fresh
    }

    pub fn remove_edge(&mut self, u: Vertex, v: Vertex) -> bool {
        if u == v || u as usize >= self.n || v as usize >= self.n {
            return false;
        }
        let had = self.rows[u as usize].remove(v);
        self.rows[v as usize].remove(u);
        if had {
            self.edge_count -= 1;
        }
        had
    }

    #[inline]
    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        (u as usize) < self.n && self.rows[u as usize].contains(v)
    }

    pub fn has_triangle(&self, t: &Triple) -> bool {
        t.edges().iter().all(|e| self.has_edge(e.0, e.1))
    }

    pub fn neighbors(&self, v: Vertex) -> &VertexSet {
        &self.rows[v as usize]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.rows[v as usize].len()
    }

    pub fn degree_into(&self, v: Vertex, set: &VertexSet) -> usize {
        self.rows[v as usize].intersection_len(set)
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n as Vertex).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n as Vertex).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    /// Edges in ascending `(u, v)` order with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.n as Vertex).flat_map(move |u| {
            self.rows[u as usize]
                .iter()
                .filter(move |&v| v > u)
                .map(move |v| Edge(u, v))
        })
    }

    /// Subgraph keeping only edges with both ends in `set` (vertex labels unchanged).
    pub fn induced(&self, set: &VertexSet) -> DenseGraph {
        let mut g = DenseGraph::empty(self.n);
        for u in set.iter() {
            g.rows[u as usize] = self.rows[u as usize].intersection(set);
        }
        g.edge_count = g.rows.iter().map(VertexSet::len).sum::<usize>() / 2;
        g
    }

    /// `self \ other` as edge sets.
    pub fn minus(&self, other: &DenseGraph) -> DenseGraph {
        let rows: Vec<VertexSet> = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.difference(b))
            .collect();
        let edge_count = rows.iter().map(VertexSet::len).sum::<usize>() / 2;
        DenseGraph {
            n: self.n,
            rows,
            edge_count,
        }
    }

    pub fn union(&self, other: &DenseGraph) -> DenseGraph {
        let rows: Vec<VertexSet> = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.union(b))
            .collect();
        let edge_count = rows.iter().map(VertexSet::len).sum::<usize>() / 2;
        DenseGraph {
            n: self.n,
            rows,
            edge_count,
        }
    }

    /// Removes every edge with both ends in `set`.
    pub fn without_inside(&self, set: &VertexSet) -> DenseGraph {
        self.minus(&self.induced(set))
    }

    pub fn is_subgraph_of(&self, other: &DenseGraph) -> bool {
        self.rows
            .iter()
            .zip(&other.rows)
            .all(|(a, b)| a.is_subset(b))
    }

    pub fn remove_triangle(&mut self, t: &Triple) {
        for e in t.edges() {
            self.remove_edge(e.0, e.1);
        }
    }

    /// Relabels the vertices of `set` to `0..|set|` in ascending order and
    /// keeps the induced edges.
    pub fn compact(&self, set: &VertexSet) -> (DenseGraph, Vec<Vertex>) {
        let map: Vec<Vertex> = set.to_vec();
        let mut back = vec![u32::MAX; self.n];
        for (i, &v) in map.iter().enumerate() {
            back[v as usize] = i as Vertex;
        }
        let mut g = DenseGraph::empty(map.len());
        for (i, &u) in map.iter().enumerate() {
            for v in self.rows[u as usize].iter() {
                let j = back[v as usize];
                if j != u32::MAX && (i as Vertex) < j {
                    g.add_edge(i as Vertex, j);
                }
            }
        }
        (g, map)
    }
}

impl fmt::Debug for DenseGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseGraph(n={}, m={}, ", self.n, self.edge_count)?;
        f.debug_list().entries(self.edges()).finish()?;
        write!(f, ")")
    }
}

/// A duplicate-free set of triples over `0..n`, iterated in ascending order.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleSet {
    n: usize,
    triples: BTreeSet<Triple>,
}

impl TripleSet {
    pub fn new(n: usize) -> Self {
        TripleSet {
            n,
            triples: BTreeSet::new(),
        }
    }

    /// Collects triples, silently dropping repeats. Panics if a vertex is out of range.
    pub fn from_triples(n: usize, it: impl IntoIterator<Item = Triple>) -> Self {
        let mut s = Self::new(n);
        for t in it {
            s.insert(t);
        }
        s
    }

    /// Every 3-subset of `0..n`.
    pub fn complete(n: usize) -> Self {
        triangles_of(&DenseGraph::complete(n), None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn insert(&mut self, t: Triple) -> bool {
        assert!(
            (t.max_vertex() as usize) < self.n,
            "triple {t:?} outside universe of size {}",
            self.n
        );
        self.triples.insert(t)
    }

    pub fn remove(&mut self, t: &Triple) -> bool {
        self.triples.remove(t)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn to_vec(&self) -> Vec<Triple> {
        self.triples.iter().copied().collect()
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Triple>) {
        for t in other {
            self.insert(t);
        }
    }

    pub fn union(&self, other: &TripleSet) -> TripleSet {
        let mut s = self.clone();
        s.extend(other.iter().copied());
        s
    }

    pub fn difference(&self, other: &TripleSet) -> TripleSet {
        TripleSet {
            n: self.n,
            triples: self.triples.difference(&other.triples).copied().collect(),
        }
    }

    pub fn is_subset(&self, other: &TripleSet) -> bool {
        self.triples.is_subset(&other.triples)
    }

    pub fn is_disjoint(&self, other: &TripleSet) -> bool {
        self.triples.is_disjoint(&other.triples)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Triple) -> bool) -> TripleSet {
        TripleSet {
            n: self.n,
            triples: self.triples.iter().copied().filter(|t| keep(t)).collect(),
        }
    }

    /// Edge → incident triples, both in ascending order.
    pub fn edge_index(&self) -> BTreeMap<Edge, Vec<Triple>> {
        let mut idx: BTreeMap<Edge, Vec<Triple>> = BTreeMap::new();
        for t in &self.triples {
            for e in t.edges() {
                idx.entry(e).or_default().push(*t);
            }
        }
        idx
    }

    /// Whether no two triples share a vertex pair.
    pub fn is_edge_disjoint(&self) -> bool {
        let mut seen = DenseGraph::empty(self.n);
        for t in &self.triples {
            for e in t.edges() {
                if !seen.add_edge(e.0, e.1) {
                    return false;
                }
            }
        }
        true
    }

    pub fn shadow(&self) -> DenseGraph {
        DenseGraph::shadow_of(self)
    }

    pub fn vertex_set(&self) -> VertexSet {
        VertexSet::from_iter_in(self.n, self.triples.iter().flat_map(|t| t.vertices()))
    }

    /// Re-embeds into a universe of size `n` through `map` (old index → new vertex).
    pub fn relabel(&self, n: usize, map: &[Vertex]) -> TripleSet {
        TripleSet::from_triples(n, self.triples.iter().map(|t| t.map(|v| map[v as usize])))
    }

    pub fn to_text(&self) -> String {
        write_triples(self.n, self.triples.iter())
    }
}

impl fmt::Debug for TripleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TripleSet(n={}, ", self.n)?;
        f.debug_set().entries(self.triples.iter()).finish()?;
        write!(f, ")")
    }
}

impl<'a> IntoIterator for &'a TripleSet {
    type Item = &'a Triple;
    type IntoIter = std::collections::btree_set::Iter<'a, Triple>;
    fn into_iter(self) -> Self::IntoIter {
        self.triples.iter()
    }
}

/// True iff every degree is even and the edge count is a multiple of three.
pub fn is_triangle_divisible(g: &DenseGraph) -> bool {
    g.edge_count().is_multiple_of(3) && (0..g.n() as Vertex).all(|v| g.degree(v).is_multiple_of(2))
}

/// What went wrong first when checking a candidate decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    VertexCountMismatch { graph: usize, triples: usize },
    VertexOutOfRange { triple: Triple },
    DuplicateTriple { triple: Triple },
    NonEdge { triple: Triple, edge: Edge },
    CoveredTwice { edge: Edge, first: Triple, second: Triple },
    Uncovered { edge: Edge },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VertexCountMismatch { graph, triples } => write!(
                f,
                "vertex count mismatch: graph has {graph}, triple set has {triples}"
            ),
            Violation::VertexOutOfRange { triple } => {
                write!(f, "triple {triple:?} uses a vertex outside the graph")
            }
            Violation::DuplicateTriple { triple } => write!(f, "triple {triple:?} listed twice"),
            Violation::NonEdge { triple, edge } => {
                write!(f, "triple {triple:?} uses {edge}, which is not an edge")
            }
            Violation::CoveredTwice {
                edge,
                first,
                second,
            } => write!(f, "edge {edge} covered by both {first:?} and {second:?}"),
            Violation::Uncovered { edge } => write!(f, "edge {edge} is not covered"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub first_violation: Option<Violation>,
    /// Edges of the target covered by no triple.
    pub uncovered_edges: usize,
    /// Edges covered more than once (counted once per extra cover).
    pub overcovered_edges: usize,
}

impl VerificationReport {
    pub fn description(&self) -> Option<String> {
        self.first_violation.as_ref().map(ToString::to_string)
    }
}

/// Checks that `ts` covers every edge of `g` exactly once using only edges of `g`.
pub fn verify_decomposition(g: &DenseGraph, ts: &TripleSet) -> VerificationReport {
    if ts.n() != g.n() {
        return VerificationReport {
            valid: false,
            first_violation: Some(Violation::VertexCountMismatch {
                graph: g.n(),
                triples: ts.n(),
            }),
            uncovered_edges: g.edge_count(),
            overcovered_edges: 0,
        };
    }
    verify_triples(g, ts.iter().copied())
}

/// As [`verify_decomposition`] but over a raw list, so repeated triples are caught.
pub fn verify_triples(g: &DenseGraph, triples: impl IntoIterator<Item = Triple>) -> VerificationReport {
    let mut first: Option<Violation> = None;
    let note = |v: Violation, first: &mut Option<Violation>| {
        if first.is_none() {
            *first = Some(v);
        }
    };
    let mut cover: BTreeMap<Edge, Triple> = BTreeMap::new();
    let mut seen: BTreeSet<Triple> = BTreeSet::new();
    let mut overcovered = 0;
    for t in triples {
        if t.max_vertex() as usize >= g.n() {
            note(Violation::VertexOutOfRange { triple: t }, &mut first);
            continue;
        }
        if !seen.insert(t) {
            note(Violation::DuplicateTriple { triple: t }, &mut first);
        }
        for e in t.edges() {
            if !g.has_edge(e.0, e.1) {
                note(Violation::NonEdge { triple: t, edge: e }, &mut first);
                continue;
            }
            if let Some(prev) = cover.get(&e) {
                overcovered += 1;
                note(
                    Violation::CoveredTwice {
                        edge: e,
                        first: *prev,
                        second: t,
                    },
                    &mut first,
                );
            } else {
                cover.insert(e, t);
            }
        }
    }
    let mut uncovered = 0;
    for e in g.edges() {
        if !cover.contains_key(&e) {
            uncovered += 1;
            note(Violation::Uncovered { edge: e }, &mut first);
        }
    }
    VerificationReport {
        valid: first.is_none(),
        first_violation: first,
        uncovered_edges: uncovered,
        overcovered_edges: overcovered,
    }
}

/// All triangles of `g`, optionally restricted to vertices of `within`, in
/// ascending lexicographic order.
pub fn triangles_of(g: &DenseGraph, within: Option<&VertexSet>) -> TripleSet {
    let mut out = TripleSet::new(g.n());
    for t in triangle_list(g, within) {
        out.triples.insert(t);
    }
    out
}

/// [`triangles_of`] as a vector, avoiding the set when only iteration is needed.
pub fn triangle_list(g: &DenseGraph, within: Option<&VertexSet>) -> Vec<Triple> {
    let all = VertexSet::full(g.n());
    let within = within.unwrap_or(&all);
    let mut out = Vec::new();
    for a in within.iter() {
        let na = g.neighbors(a).intersection(within);
        for b in na.iter().filter(|&b| b > a) {
            let nab = na.intersection(g.neighbors(b));
            for c in nab.iter().filter(|&c| c > b) {
                out.push(Triple { a, b, c });
            }
        }
    }
    out
}

/// Largest number of non-neighbours any vertex has inside `within`
/// (default: all vertices), not counting the vertex itself.
pub fn complement_max_degree(g: &DenseGraph, within: Option<&VertexSet>) -> usize {
    let all = VertexSet::full(g.n());
    let within = within.unwrap_or(&all);
    (0..g.n() as Vertex)
        .map(|v| {
            let inside = within.len() - usize::from(within.contains(v));
            inside - g.degree_into(v, within)
        })
        .max()
        .unwrap_or(0)
}

/// An edge-disjoint triple set covering exactly the edges of `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    target: DenseGraph,
    triples: TripleSet,
}

impl Decomposition {
    pub fn new(target: DenseGraph, triples: TripleSet) -> Result<Self, VerificationReport> {
        let report = verify_decomposition(&target, &triples);
        if report.valid {
            Ok(Decomposition { target, triples })
        } else {
            Err(report)
        }
    }

    pub fn target(&self) -> &DenseGraph {
        &self.target
    }

    pub fn triples(&self) -> &TripleSet {
        &self.triples
    }

    pub fn into_triples(self) -> TripleSet {
        self.triples
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("missing header line \"n=<count>\"")]
    MissingHeader,
    #[error("line {line}: malformed header {text:?}")]
    BadHeader { line: usize, text: String },
    #[error("line {line}: expected {expected} vertex indices, got {text:?}")]
    BadRecord {
        line: usize,
        expected: usize,
        text: String,
    },
    #[error("line {line}: vertex {vertex} out of range for n={n}")]
    OutOfRange { line: usize, vertex: Vertex, n: usize },
    #[error("line {line}: {source}")]
    Degenerate {
        line: usize,
        source: DegenerateTriple,
    },
    #[error("line {line}: entries must be listed in ascending order")]
    NotAscending { line: usize },
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<usize, ParseError> {
    let (line, text) = lines.next().ok_or(ParseError::MissingHeader)?;
    text.strip_prefix("n=")
        .and_then(|s| usize::from_str(s.trim()).ok())
        .ok_or_else(|| ParseError::BadHeader {
            line,
            text: text.to_string(),
        })
}

fn parse_record<const K: usize>(
    line: usize,
    text: &str,
    n: usize,
) -> Result<[Vertex; K], ParseError> {
    let bad = || ParseError::BadRecord {
        line,
        expected: K,
        text: text.to_string(),
    };
    let fields: Vec<Vertex> = text
        .split_whitespace()
        .map(Vertex::from_str)
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let arr: [Vertex; K] = fields.try_into().map_err(|_| bad())?;
    if let Some(&v) = arr.iter().find(|&&v| v as usize >= n) {
        return Err(ParseError::OutOfRange { line, vertex: v, n });
    }
    Ok(arr)
}

/// Parses the canonical triple format, keeping repeats so callers can reject them.
pub fn parse_triple_list(text: &str) -> Result<(usize, Vec<Triple>), ParseError> {
    let mut lines = content_lines(text);
    let n = parse_header(&mut lines)?;
    let mut out = Vec::new();
    for (line, text) in lines {
        let [a, b, c] = parse_record::<3>(line, text, n)?;
        let t = Triple::try_new(a, b, c).map_err(|source| ParseError::Degenerate { line, source })?;
        if t.vertices() != [a, b, c] {
            return Err(ParseError::NotAscending { line });
        }
        out.push(t);
    }
    Ok((n, out))
}

pub fn parse_triple_set(text: &str) -> Result<TripleSet, ParseError> {
    let (n, list) = parse_triple_list(text)?;
    Ok(TripleSet::from_triples(n, list))
}

pub fn write_triples<'a>(n: usize, triples: impl IntoIterator<Item = &'a Triple>) -> String {
    let mut s = format!("n={n}\n");
    for t in triples {
        s.push_str(&format!("{t}\n"));
    }
    s
}

/// Edge-list companion format: header `n=<count>`, then one `u v` pair per line.
pub fn parse_graph(text: &str) -> Result<DenseGraph, ParseError> {
    let mut lines = content_lines(text);
    let n = parse_header(&mut lines)?;
    let mut g = DenseGraph::empty(n);
    for (line, text) in lines {
        let [u, v] = parse_record::<2>(line, text, n)?;
        if u >= v {
            return Err(ParseError::NotAscending { line });
        }
        g.add_edge(u, v);
    }
    Ok(g)
}

pub fn write_graph(g: &DenseGraph) -> String {
    let mut s = format!("n={}\n", g.n());
    for e in g.edges() {
        s.push_str(&format!("{} {}\n", e.0, e.1));
    }
    s
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn fano() -> TripleSet {
        let blocks = [
            [0, 1, 2],
            [0, 3, 4],
            [0, 5, 6],
            [1, 3, 5],
            [1, 4, 6],
            [2, 3, 6],
            [2, 4, 5],
        ];
        TripleSet::from_triples(7, blocks.iter().map(|b| Triple::new(b[0], b[1], b[2])))
    }

    #[test]
    fn triple_normalizes_and_rejects_repeats() {
        let t = Triple::new(5, 1, 3);
        assert_eq!(t.vertices(), [1, 3, 5]);
        assert!(Triple::try_new(1, 1, 2).is_err());
        assert_eq!(t.opposite(Edge(1, 5)), 3);
    }

    #[test]
    fn triple_ranks_are_a_bijection_onto_prefix() {
        let all = TripleSet::complete(12);
        let mut ranks: Vec<u64> = all.iter().map(Triple::rank).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, (0..220).collect::<Vec<_>>());
    }

    #[test]
    fn divisibility_examples() {
        assert!(is_triangle_divisible(&DenseGraph::complete(7)));
        assert!(!is_triangle_divisible(&DenseGraph::complete(5)));
        assert!(is_triangle_divisible(&DenseGraph::empty(4)));
    }

    #[test]
    fn verify_single_triangle_and_fano() {
        let k3 = DenseGraph::complete(3);
        let ts = TripleSet::from_triples(3, [Triple::new(0, 1, 2)]);
        assert!(verify_decomposition(&k3, &ts).valid);
        let k7 = DenseGraph::complete(7);
        assert!(verify_decomposition(&k7, &fano()).valid);
    }

    #[test]
    fn verify_fano_missing_block() {
        let k7 = DenseGraph::complete(7);
        let mut ts = fano();
        ts.remove(&Triple::new(0, 1, 2));
        let r = verify_decomposition(&k7, &ts);
        assert!(!r.valid);
        assert_eq!(r.uncovered_edges, 3);
        assert_eq!(r.first_violation, Some(Violation::Uncovered { edge: Edge(0, 1) }));
    }

    #[test]
    fn verify_reports_non_edges_and_double_cover() {
        let mut g = DenseGraph::complete(4);
        g.remove_edge(2, 3);
        let ts = TripleSet::from_triples(4, [Triple::new(0, 1, 2), Triple::new(1, 2, 3)]);
        let r = verify_decomposition(&g, &ts);
        assert!(!r.valid);
        assert!(matches!(r.first_violation, Some(Violation::CoveredTwice { .. })));
        let r = verify_triples(&g, [Triple::new(0, 2, 3)]);
        assert!(matches!(r.first_violation, Some(Violation::NonEdge { .. })));
        let r = verify_triples(
            &DenseGraph::complete(3),
            [Triple::new(0, 1, 2), Triple::new(0, 1, 2)],
        );
        assert!(matches!(r.first_violation, Some(Violation::DuplicateTriple { .. })));
    }

    #[test]
    fn triangle_enumeration_examples() {
        assert_eq!(triangles_of(&DenseGraph::complete(4), None).len(), 4);
        assert_eq!(triangles_of(&DenseGraph::complete(7), None).len(), 35);
        let c5 = DenseGraph::from_edges(5, (0..5).map(|i| (i, (i + 1) % 5)));
        assert_eq!(triangles_of(&c5, None).len(), 0);
        let within = VertexSet::from_iter_in(7, [0, 2, 4, 6]);
        let ts = triangles_of(&DenseGraph::complete(7), Some(&within));
        assert_eq!(ts.len(), 4);
        assert!(ts.iter().all(|t| t.is_within(&within)));
    }

    #[test]
    fn triangle_counts_match_binomial() {
        for n in 0..=30usize {
            let expect = n * n.saturating_sub(1) * n.saturating_sub(2) / 6;
            assert_eq!(triangles_of(&DenseGraph::complete(n), None).len(), expect, "n={n}");
        }
    }

    #[test]
    fn complement_degree_examples() {
        assert_eq!(complement_max_degree(&DenseGraph::complete(9), None), 0);
        assert_eq!(complement_max_degree(&DenseGraph::empty(6), None), 5);
        let mut g = DenseGraph::complete(7);
        for (u, v) in [(0, 1), (2, 3), (4, 5)] {
            g.remove_edge(u, v);
        }
        assert_eq!(complement_max_degree(&g, None), 1);
        let within = VertexSet::from_iter_in(7, [0, 2, 4]);
        // vertex 1 misses 0
        assert_eq!(complement_max_degree(&g, Some(&within)), 1);
        let within = VertexSet::from_iter_in(7, [6]);
        assert_eq!(complement_max_degree(&g, Some(&within)), 0);
    }

    #[test]
    fn text_format_round_trip_and_errors() {
        let text = fano().to_text();
        assert!(text.starts_with("n=7\n0 1 2\n"));
        assert_eq!(parse_triple_set(&text).unwrap(), fano());
        assert_eq!(parse_triple_list(""), Err(ParseError::MissingHeader));
        assert!(matches!(
            parse_triple_list("n=5\n0 1"),
            Err(ParseError::BadRecord { line: 2, .. })
        ));
        assert!(matches!(
            parse_triple_list("n=5\n0 1 7"),
            Err(ParseError::OutOfRange { .. })
        ));
        assert!(matches!(
            parse_triple_list("n=5\n2 1 0"),
            Err(ParseError::NotAscending { .. })
        ));
        let g = DenseGraph::complete(4);
        assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
    }

    #[test]
    fn compact_relabels_in_order() {
        let g = DenseGraph::complete(6);
        let set = VertexSet::from_iter_in(6, [1, 3, 4]);
        let (h, map) = g.compact(&set);
        assert_eq!(map, vec![1, 3, 4]);
        assert_eq!(h, DenseGraph::complete(3));
    }
}
