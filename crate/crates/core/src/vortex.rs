//! Iterative absorption: nested vortex levels, reserve graphs, and the cover-down
//! steps that clear every edge outside the next level.
//!
//! A level works on a graph `g` whose edges all lie inside the current level
//! and a subset `v1` (the next level). Vertices of `g` with an edge but not in
//! `v1` are the level's *outside* vertices.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DenseGraph, Edge, Triple, TripleSet, Vertex, VertexSet};
use crate::nibble::{fractional_weights_with, greedy_cover, subsample_weighted, RegularizedSample, WeightConfig};
use crate::oracle::ExactCover;
use crate::sampling::{Seed, TriplePool};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VortexError {
    #[error("vortex ratio must lie in (0, 1), got {0}")]
    BadRatio(f64),
    #[error("x is not a subset of the vertex set")]
    BadSubset,
    #[error("x has {got} vertices in some part, expected {expected} in each")]
    Unbalanced { expected: usize, got: usize },
    #[error("reserve selection failed after {attempts} attempts: {report}")]
    ReserveFailed {
        attempts: usize,
        report: PropertyReport,
    },
    #[error("internal cover-down starved at edge {edge}")]
    InternalStarved { edge: Edge },
    #[error("no exact cover-down leaves a leftover made of terminal triangles")]
    TerminalInfeasible,
    #[error("link matching failed at vertex {vertex}")]
    LinkMatchingFailed { vertex: Vertex },
    #[error("odd degree {degree} at outside vertex {vertex}")]
    OddDegree { vertex: Vertex, degree: usize },
    #[error("nibble sample rejected {attempts} times")]
    SampleRejected { attempts: usize },
    #[error("level set must be a proper nonempty subset of the active vertices")]
    BadLevel,
}

/// Nested vertex sets `V₀ ⊇ V₁ ⊇ … ⊇ V_ℓ = X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vortex {
    levels: Vec<VertexSet>,
}

impl Vortex {
    pub fn levels(&self) -> &[VertexSet] {
        &self.levels
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(VertexSet::len).collect()
    }

    /// Number of cover-down steps, `ℓ`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn last(&self) -> &VertexSet {
        self.levels.last().expect("vortex has a level")
    }
}

/// `t₀ = n`, `t_{i+1} = max(⌈ratio·tᵢ⌉, |x|)` until `|x|` is reached.
pub fn vortex_sizes(n: usize, x_len: usize, ratio: f64) -> Vec<usize> {
    let mut sizes = vec![n];
    let mut t = n;
    while t > x_len {
        let next = ((ratio * t as f64) - 1e-9).ceil() as usize;
        t = next.min(t - 1).max(x_len);
        sizes.push(t);
    }
    sizes
}

fn check_ratio(ratio: f64) -> Result<(), VortexError> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(VortexError::BadRatio(ratio))
    }
}

/// A uniformly random vortex on `0..n` ending in `x`.
pub fn build_vortex(n: usize, x: &VertexSet, ratio: f64, seed: &Seed) -> Result<Vortex, VortexError> {
    build_vortex_in(&VertexSet::full(n), x, ratio, seed)
}

/// As [`build_vortex`], with `universe` as the top level.
pub fn build_vortex_in(universe: &VertexSet, x: &VertexSet, ratio: f64, seed: &Seed) -> Result<Vortex, VortexError> {
    check_ratio(ratio)?;
    let n = universe.universe();
    if x.universe() != n || !x.is_subset(universe) {
        return Err(VortexError::BadSubset);
    }
    let sizes = vortex_sizes(universe.len(), x.len(), ratio);
    let mut rng = seed.rng();
    let mut levels = vec![universe.clone()];
    // free vertices of the current level, in random order; keeping a prefix
    // gives each next level as a uniform subset
    let mut free = universe.difference(x).to_vec();
    free.shuffle(&mut rng);
    for &t in &sizes[1..] {
        free.truncate(t - x.len());
        levels.push(VertexSet::from_iter_in(n, free.iter().copied()).union(x));
    }
    Ok(Vortex { levels })
}

/// A vortex on `K_{m,m,m}` (parts `0..m`, `m..2m`, `2m..3m`) in which every
/// level has equally many vertices in each part.
pub fn build_balanced_vortex(
    part_size: usize,
    x: &VertexSet,
    ratio: f64,
    seed: &Seed,
) -> Result<Vortex, VortexError> {
    check_ratio(ratio)?;
    let n = 3 * part_size;
    if x.universe() != n {
        return Err(VortexError::BadSubset);
    }
    let per_part: Vec<Vec<Vertex>> = (0..3)
        .map(|j| x.iter().filter(|&v| v as usize / part_size.max(1) == j).collect())
        .collect();
    let xk = per_part[0].len();
    if let Some(bad) = per_part.iter().find(|p| p.len() != xk) {
        return Err(VortexError::Unbalanced {
            expected: xk,
            got: bad.len(),
        });
    }
    let mut rng = seed.rng();
    let mut free: Vec<Vec<Vertex>> = (0..3)
        .map(|j| {
            let mut f: Vec<Vertex> = ((j * part_size) as Vertex..((j + 1) * part_size) as Vertex)
                .filter(|&v| !x.contains(v))
                .collect();
            f.shuffle(&mut rng);
            f
        })
        .collect();
    let mut levels = vec![VertexSet::full(n)];
    let mut s = part_size;
    while s > xk {
        let next = ((ratio * s as f64) + 1e-9).floor() as usize;
        s = next.min(s - 1).max(xk);
        for f in &mut free {
            f.truncate(s - xk);
        }
        let level = VertexSet::from_iter_in(n, free.iter().flatten().copied()).union(x);
        levels.push(level);
    }
    Ok(Vortex { levels })
}

/// Outcome of one regularity condition on a reserve graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    /// Largest relative violation seen (0 when passed).
    pub worst: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| format!("{}={}", c.name, if c.passed { "ok" } else { "violated" }))
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Crossing edges between the outside vertices and `v1`.
#[derive(Debug, Clone)]
pub struct ReserveGraph {
    pub edges: DenseGraph,
    pub q: f64,
    pub property_report: PropertyReport,
    pub attempts: usize,
}

fn active(g: &DenseGraph) -> VertexSet {
    VertexSet::from_iter_in(g.n(), (0..g.n() as Vertex).filter(|&v| g.degree(v) > 0))
}

struct Band {
    name: &'static str,
    passed: bool,
    worst: f64,
    checked: usize,
}

impl Band {
    fn new(name: &'static str) -> Self {
        Band {
            name,
            passed: true,
            worst: 0.0,
            checked: 0,
        }
    }

    /// `value` within `mean·(1 ± tol)`; a zero mean with positive availability fails.
    fn two_sided(&mut self, value: usize, mean: f64, available: usize, tol: f64) {
        self.checked += 1;
        if available == 0 {
            return;
        }
        if mean <= 0.0 {
            self.passed = false;
            self.worst = f64::INFINITY;
            return;
        }
        let dev = (value as f64 - mean).abs() / mean;
        if dev > tol + 1e-12 {
            self.passed = false;
            self.worst = self.worst.max(dev);
        }
    }

    fn at_least(&mut self, value: usize, bound: f64) {
        self.checked += 1;
        if (value as f64) < bound - 1e-12 {
            self.passed = false;
            let rel = if bound > 0.0 { 1.0 - value as f64 / bound } else { 1.0 };
            self.worst = self.worst.max(rel);
        }
    }

    fn at_most(&mut self, value: usize, bound: f64) {
        self.checked += 1;
        if value as f64 > bound + 1e-12 {
            self.passed = false;
            let rel = if bound > 0.0 { value as f64 / bound - 1.0 } else { f64::INFINITY };
            self.worst = self.worst.max(rel);
        }
    }

    fn finish(self) -> PropertyCheck {
        PropertyCheck {
            name: self.name.to_string(),
            passed: self.passed,
            worst: self.worst,
            checked: self.checked,
        }
    }
}

/// Checks the five reserve regularity conditions. Expected values are taken
/// relative to what `g` actually offers (equal to the textbook `q|V₁|`, `qn`
/// forms when `g` is complete).
pub fn reserve_properties(g: &DenseGraph, v1: &VertexSet, r: &DenseGraph, q: f64, tol: f64) -> PropertyReport {
    let act = active(g);
    let outside = act.difference(v1).to_vec();
    let inner = act.intersection(v1).to_vec();
    let outside_set = act.difference(v1);
    let mut a1 = Band::new("A1");
    let mut a2 = Band::new("A2");
    let mut a3 = Band::new("A3");
    let mut a4 = Band::new("A4");
    let mut a5 = Band::new("A5");
    for &v in &outside {
        let avail = g.degree_into(v, v1);
        a1.two_sided(r.degree(v), q * avail as f64, avail, tol);
        let nrv = r.neighbors(v);
        for &w in &inner {
            let common = g.neighbors(v).intersection(v1).intersection_len(g.neighbors(w));
            a3.two_sided(nrv.intersection_len(g.neighbors(w)), q * common as f64, common, tol);
        }
    }
    for &w in &inner {
        let avail = g.degree_into(w, &outside_set);
        a2.two_sided(r.degree(w), q * avail as f64, avail, tol);
    }
    for (i, &v) in outside.iter().enumerate() {
        let gv = g.neighbors(v).intersection(v1);
        for &u in &outside[i + 1..] {
            let common = gv.intersection_len(g.neighbors(u));
            let got = r.neighbors(v).intersection_len(r.neighbors(u));
            a4.at_least(got, (1.0 - tol) * q * q * common as f64 / 2.0);
        }
    }
    let bound = (1.0 + tol) * 2.0 * q * q * act.len() as f64;
    for (i, &v) in inner.iter().enumerate() {
        for &u in &inner[i + 1..] {
            a5.at_most(r.neighbors(v).intersection_len(r.neighbors(u)), bound);
        }
    }
    PropertyReport {
        checks: vec![a1.finish(), a2.finish(), a3.finish(), a4.finish(), a5.finish()],
    }
}

fn edge_key(n: usize, e: Edge) -> u64 {
    e.0 as u64 * n as u64 + e.1 as u64
}

/// Samples crossing edges at rate `q`, resampling until the five properties hold.
pub fn select_reserve(
    g: &DenseGraph,
    v1: &VertexSet,
    q: f64,
    tolerance: f64,
    seed: &Seed,
    max_resamples: usize,
) -> Result<ReserveGraph, VortexError> {
    let act = active(g);
    if v1.intersection_len(&act) == 0 || act.is_subset(v1) {
        return Err(VortexError::BadLevel);
    }
    let mut last = None;
    for attempt in 0..max_resamples.max(1) {
        let s = seed.child(attempt as u64);
        let mut r = DenseGraph::empty(g.n());
        for e in g.edges() {
            if v1.contains(e.0) != v1.contains(e.1) && s.bernoulli(edge_key(g.n(), e), q) {
                r.add_edge(e.0, e.1);
            }
        }
        let report = reserve_properties(g, v1, &r, q, tolerance);
        if report.all_passed() {
            return Ok(ReserveGraph {
                edges: r,
                q,
                property_report: report,
                attempts: attempt + 1,
            });
        }
        last = Some(report);
    }
    Err(VortexError::ReserveFailed {
        attempts: max_resamples.max(1),
        report: last.expect("at least one attempt"),
    })
}

/// Covers every edge of `l1` by a triangle made of that edge and two edges of
/// `g2 \ l1`, processing edges in order and exposing candidates lazily at rate `p`.
pub fn cover_internal(l1: &DenseGraph, g2: &DenseGraph, p: f64, seed: &Seed) -> Result<TripleSet, VortexError> {
    cover_internal_in(l1, g2, p, &TriplePool::All, InternalOrder::Ascending, seed)
}

/// Order in which the internal cover-down visits the edges of `L₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InternalOrder {
    /// Ascending edge order.
    Ascending,
    /// Always the edge with the fewest surviving candidates next.
    #[default]
    MostConstrained,
}

pub(crate) fn cover_internal_in(
    l1: &DenseGraph,
    g2: &DenseGraph,
    p: f64,
    pool: &TriplePool,
    order: InternalOrder,
    seed: &Seed,
) -> Result<TripleSet, VortexError> {
    let mut avail = g2.minus(l1);
    let mut rng = seed.child(1).rng();
    let expose = seed.child(0);
    let mut out = TripleSet::new(g2.n());
    let candidates = |avail: &DenseGraph, e: Edge| -> Vec<Triple> {
        avail
            .neighbors(e.0)
            .intersection(avail.neighbors(e.1))
            .iter()
            .map(|w| Triple::new(e.0, e.1, w))
            .filter(|t| pool.contains(t) && expose.bernoulli(t.rank(), p))
            .collect()
    };
    let mut pending: Vec<Edge> = l1.edges().collect();
    while !pending.is_empty() {
        let (idx, cands) = match order {
            InternalOrder::Ascending => (0, candidates(&avail, pending[0])),
            InternalOrder::MostConstrained => pending
                .iter()
                .map(|&e| candidates(&avail, e))
                .enumerate()
                .min_by_key(|(_, c)| c.len())
                .expect("pending is nonempty"),
        };
        let e = pending.remove(idx);
        let Some(&t) = cands.choose(&mut rng) else {
            return Err(VortexError::InternalStarved { edge: e });
        };
        let w = t.opposite(e);
        avail.remove_edge(e.0, w);
        avail.remove_edge(e.1, w);
        out.insert(t);
    }
    Ok(out)
}

/// Kuhn's augmenting paths on a bipartite graph given as adjacency lists from
/// the left side; `None` unless every left vertex is matched.
fn perfect_bipartite_matching(adj: &[Vec<usize>], right: usize) -> Option<Vec<usize>> {
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], match_r: &mut [usize]) -> bool {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                if match_r[v] == usize::MAX || augment(match_r[v], adj, seen, match_r) {
                    match_r[v] = u;
                    return true;
                }
            }
        }
        false
    }
    if adj.len() != right {
        return None;
    }
    let mut match_r = vec![usize::MAX; right];
    for u in 0..adj.len() {
        let mut seen = vec![false; right];
        if !augment(u, adj, &mut seen, &mut match_r) {
            return None;
        }
    }
    let mut match_l = vec![0; adj.len()];
    for (v, &u) in match_r.iter().enumerate() {
        match_l[u] = v;
    }
    Some(match_l)
}

/// Perfect matching of `link` in `edges`: bipartition by `parts` when the link
/// spans exactly two parts, otherwise by random equipartitions (retried).
fn link_matching(
    link: &[Vertex],
    edges: &DenseGraph,
    parts: Option<&[u8]>,
    retries: usize,
    rng: &mut impl Rng,
) -> Option<Vec<(Vertex, Vertex)>> {
    if link.is_empty() {
        return Some(Vec::new());
    }
    if link.len() % 2 == 1 {
        return None;
    }
    let try_split = |left: &[Vertex], right: &[Vertex]| {
        let adj: Vec<Vec<usize>> = left
            .iter()
            .map(|&u| {
                right
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| edges.has_edge(u, w))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        perfect_bipartite_matching(&adj, right.len())
            .map(|m| left.iter().zip(m).map(|(&u, j)| (u, right[j])).collect::<Vec<_>>())
    };
    if let Some(parts) = parts {
        let first = parts[link[0] as usize];
        let (a, b): (Vec<Vertex>, Vec<Vertex>) = link.iter().partition(|&&v| parts[v as usize] == first);
        if b.iter().all(|&v| parts[v as usize] == parts[b[0] as usize]) && !b.is_empty() {
            return try_split(&a, &b);
        }
    }
    let mut order = link.to_vec();
    for _ in 0..retries.max(1) {
        order.shuffle(rng);
        let (a, b) = order.split_at(order.len() / 2);
        if let Some(m) = try_split(a, b) {
            return Some(m);
        }
    }
    None
}

/// Covers all of `r3` (crossing edges into `v1`) by triangles `{v, x, y}` with
/// `xy` an edge of `inner`, one perfect link matching per outside vertex.
pub fn cover_crossing(
    r3: &DenseGraph,
    inner: &DenseGraph,
    v1: &VertexSet,
    p: f64,
    seed: &Seed,
    max_retries: usize,
) -> Result<TripleSet, VortexError> {
    cover_crossing_in(r3, inner, v1, p, &TriplePool::All, None, seed, max_retries)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn cover_crossing_in(
    r3: &DenseGraph,
    inner: &DenseGraph,
    v1: &VertexSet,
    p: f64,
    pool: &TriplePool,
    parts: Option<&[u8]>,
    seed: &Seed,
    max_retries: usize,
) -> Result<TripleSet, VortexError> {
    let mut outside: Vec<Vertex> = (0..r3.n() as Vertex)
        .filter(|&v| !v1.contains(v) && r3.degree(v) > 0)
        .collect();
    if let Some(&v) = outside.iter().find(|&&v| r3.degree(v) % 2 == 1) {
        return Err(VortexError::OddDegree {
            vertex: v,
            degree: r3.degree(v),
        });
    }
    // largest links first: they need the most inner edges
    outside.sort_by_key(|&v| (std::cmp::Reverse(r3.degree(v)), v));
    let expose = seed.child(0);
    let mut rng = seed.child(1).rng();
    let mut avail = inner.clone();
    let mut out = TripleSet::new(r3.n());
    for v in outside {
        let link = r3.neighbors(v).to_vec();
        let mut exposed = DenseGraph::empty(r3.n());
        for (i, &x) in link.iter().enumerate() {
            for &y in &link[i + 1..] {
                let t = Triple::new(v, x, y);
                if avail.has_edge(x, y) && pool.contains(&t) && expose.bernoulli(t.rank(), p) {
                    exposed.add_edge(x, y);
                }
            }
        }
        let m = link_matching(&link, &exposed, parts, max_retries, &mut rng)
            .ok_or(VortexError::LinkMatchingFailed { vertex: v })?;
        for (x, y) in m {
            avail.remove_edge(x, y);
            out.insert(Triple::new(v, x, y));
        }
    }
    Ok(out)
}

/// Exact alternative to the internal and crossing steps: covers every edge of
/// `residual` exactly once, each inner edge at most once, with triangles of the
/// pool. Option order is shuffled by `seed`, so the solution found varies.
/// `None` if no cover exists or the node budget runs out.
pub fn cover_down_exact(
    residual: &DenseGraph,
    inner: &DenseGraph,
    pool: &TriplePool,
    seed: &Seed,
    node_budget: u64,
) -> Option<TripleSet> {
    cover_down_exact_in(residual, inner, None, pool, seed, node_budget)
}

/// With `terminal`, inner edges must be covered too, and the only triangles
/// lying wholly inside `inner` that may do so are those of `terminal`.
pub(crate) fn cover_down_exact_in(
    residual: &DenseGraph,
    inner: &DenseGraph,
    terminal: Option<&TripleSet>,
    pool: &TriplePool,
    seed: &Seed,
    node_budget: u64,
) -> Option<TripleSet> {
    let (primary, secondary): (Vec<Edge>, Vec<Edge>) = match terminal {
        None => (residual.edges().collect(), inner.edges().collect()),
        Some(_) => (residual.edges().chain(inner.edges()).collect(), Vec::new()),
    };
    let index: BTreeMap<Edge, usize> = primary
        .iter()
        .chain(&secondary)
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();
    let host = residual.union(inner);
    let mut options: Vec<Triple> = primary
        .iter()
        .flat_map(|&e| {
            host.neighbors(e.0)
                .intersection(host.neighbors(e.1))
                .iter()
                .map(move |w| Triple::new(e.0, e.1, w))
                .collect::<Vec<_>>()
        })
        .filter(|t| pool.contains(t))
        .filter(|t| match terminal {
            Some(term) if t.edges().iter().all(|e| inner.has_edge(e.0, e.1)) => term.contains(t),
            _ => true,
        })
        .collect();
    options.sort_unstable();
    options.dedup();
    options.shuffle(&mut seed.rng());
    let n_primary = primary.len();
    let mut ec = ExactCover::with_secondary(n_primary, secondary.len());
    for t in &options {
        let cols: Vec<usize> = t.edges().iter().map(|e| index[e]).collect();
        ec.add_option(&cols);
    }
    ec.set_node_budget(Some(node_budget));
    let chosen = ec.first_solution()?;
    Some(TripleSet::from_triples(residual.n(), chosen.into_iter().map(|i| options[i])))
}

/// Knobs of a single cover-down level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelParams {
    pub reserve_q: f64,
    pub reserve_tolerance: f64,
    pub reserve_resamples: usize,
    pub weights: WeightConfig,
    /// Triangle sampling rate of the nibble, applied to `p·γ(T)`.
    pub nibble_p: f64,
    pub nibble_tolerance: f64,
    pub nibble_resamples: usize,
    pub nibble_restarts: usize,
    /// Nibble leftover degree target as a fraction of the level's vertex count.
    pub leftover_fraction: f64,
    pub internal_p: f64,
    pub internal_order: InternalOrder,
    pub crossing_p: f64,
    pub link_retries: usize,
    /// Solve the internal and crossing steps exactly when the random versions fail.
    pub exact_fallback: bool,
    pub fallback_node_budget: u64,
}

impl Default for LevelParams {
    fn default() -> Self {
        LevelParams {
            reserve_q: 0.25,
            reserve_tolerance: 0.5,
            reserve_resamples: 20,
            weights: WeightConfig::default(),
            nibble_p: 1.0,
            nibble_tolerance: 4.0,
            nibble_resamples: 5,
            nibble_restarts: 10,
            leftover_fraction: 0.25,
            internal_p: 1.0,
            internal_order: InternalOrder::default(),
            crossing_p: 1.0,
            link_retries: 20,
            exact_fallback: false,
            fallback_node_budget: 200_000,
        }
    }
}

/// Diagnostics of one level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level_size: usize,
    pub next_size: usize,
    pub reserve_attempts: usize,
    pub reserve_report: Option<PropertyReport>,
    pub weight_precondition_ok: bool,
    pub sample_rejections: usize,
    pub nibble_triples: usize,
    pub nibble_leftover_max_degree: usize,
    pub nibble_success: bool,
    pub internal_edges: usize,
    pub crossing_edges: usize,
    pub inner_edges_used: usize,
    pub leftover_inside_edges: usize,
    pub leftover_inside_max_degree: usize,
    pub exact_fallback_used: bool,
    pub failure: Option<String>,
}

/// Triangles covering every level edge outside `v1`, and what is left inside.
#[derive(Debug, Clone)]
pub struct LevelResult {
    pub covered: TripleSet,
    pub leftover_inside: DenseGraph,
    pub stats: LevelStats,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct LevelFailure {
    pub error: VortexError,
    pub stats: LevelStats,
}

/// Where level triangles may come from and how the vertex set is structured.
#[derive(Debug, Clone, Copy)]
pub struct LevelContext<'a> {
    pub pool: &'a TriplePool,
    pub parts: Option<&'a [u8]>,
    /// Triangles inside the last level that its leftover must decompose into.
    /// When set, the last level is solved exactly.
    pub terminal: Option<&'a TripleSet>,
}

impl Default for LevelContext<'static> {
    fn default() -> Self {
        static ALL: TriplePool = TriplePool::All;
        LevelContext {
            pool: &ALL,
            parts: None,
            terminal: None,
        }
    }
}

/// One cover-down: reserve, nibble on the rest, then internal and crossing covers.
pub fn run_level(
    g: &DenseGraph,
    v1: &VertexSet,
    params: &LevelParams,
    ctx: LevelContext<'_>,
    seed: &Seed,
) -> Result<LevelResult, LevelFailure> {
    let act = active(g);
    let mut stats = LevelStats {
        level_size: act.union(v1).len(),
        next_size: v1.len(),
        ..LevelStats::default()
    };
    let fail = |error: VortexError, mut stats: LevelStats| {
        stats.failure = Some(error.to_string());
        LevelFailure { error, stats }
    };
    let outside_set = act.difference(v1);
    if outside_set.is_empty() {
        stats.leftover_inside_edges = g.edge_count();
        stats.leftover_inside_max_degree = g.max_degree();
        return Ok(LevelResult {
            covered: TripleSet::new(g.n()),
            leftover_inside: g.clone(),
            stats,
        });
    }
    if let Some(v) = outside_set.iter().find(|&v| g.degree(v) % 2 == 1) {
        return Err(fail(
            VortexError::OddDegree {
                vertex: v,
                degree: g.degree(v),
            },
            stats,
        ));
    }

    let reserve = match select_reserve(
        g,
        v1,
        params.reserve_q,
        params.reserve_tolerance,
        &seed.child(0),
        params.reserve_resamples,
    ) {
        Ok(r) => r,
        Err(e) => return Err(fail(e, stats)),
    };
    stats.reserve_attempts = reserve.attempts;
    stats.reserve_report = Some(reserve.property_report.clone());
    let inside = g.induced(v1);
    let g1 = g.minus(&reserve.edges).minus(&inside);

    // nibble on g1
    let keep = |t: &Triple| ctx.pool.contains(t);
    let weights = match fractional_weights_with(&g1, Some(&keep), &params.weights) {
        Ok(w) => {
            stats.weight_precondition_ok = true;
            Ok(w)
        }
        Err(_) => fractional_weights_with(
            &g1,
            Some(&keep),
            &WeightConfig {
                eps0: 1.0,
                ..params.weights
            },
        ),
    };
    let target = (params.leftover_fraction * stats.level_size as f64).ceil() as usize;
    let sample = match weights {
        Ok(weights) => {
            let mut sample = None;
            for attempt in 0..params.nibble_resamples.max(1) {
                let s = subsample_weighted(
                    &g1,
                    &weights,
                    params.nibble_p,
                    params.nibble_tolerance,
                    &seed.child(1).child(attempt as u64),
                );
                if !s.rejected {
                    sample = Some(s);
                    break;
                }
                stats.sample_rejections += 1;
            }
            let Some(sample) = sample else {
                return Err(fail(
                    VortexError::SampleRejected {
                        attempts: stats.sample_rejections,
                    },
                    stats,
                ));
            };
            sample
        }
        // no regular weighting exists; the level proceeds without a nibble and
        // relies on the cover-down steps alone
        Err(_) => RegularizedSample {
            triples: TripleSet::new(g.n()),
            per_edge_degree: BTreeMap::new(),
            target_degree: 0.0,
            tolerance: 0.0,
            rejected: false,
        },
    };
    let cover = greedy_cover(&sample, &g1, target, &seed.child(2), params.nibble_restarts);
    stats.nibble_success = cover.success;
    let chosen = cover.chosen;
    stats.nibble_triples = chosen.len();
    let leftover = g1.minus(&chosen.shadow());
    stats.nibble_leftover_max_degree = leftover.max_degree();

    let mut l1 = DenseGraph::empty(g.n());
    let mut r2 = reserve.edges.clone();
    for e in leftover.edges() {
        if v1.contains(e.0) || v1.contains(e.1) {
            r2.add_edge(e.0, e.1);
        } else {
            l1.add_edge(e.0, e.1);
        }
    }
    stats.internal_edges = l1.edge_count();
    let g2 = l1.union(&r2);
    let (crossing_edges, finish) = if let Some(term) = ctx.terminal {
        let all = cover_down_exact_in(&g2, &inside, Some(term), ctx.pool, &seed.child(5), params.fallback_node_budget)
            .ok_or_else(|| fail(VortexError::TerminalInfeasible, stats.clone()))?;
        stats.exact_fallback_used = true;
        (r2.edge_count(), all.filter(|t| !t.is_within(v1)))
    } else {
        let random_steps = cover_internal_in(&l1, &g2, params.internal_p, ctx.pool, params.internal_order, &seed.child(3))
            .and_then(|h4| {
                let r3 = r2.minus(&h4.shadow());
                let h6 = cover_crossing_in(
                    &r3,
                    &inside,
                    v1,
                    params.crossing_p,
                    ctx.pool,
                    ctx.parts,
                    &seed.child(4),
                    params.link_retries,
                )?;
                Ok((r3.edge_count(), h4.union(&h6)))
            });
        match random_steps {
            Ok(ok) => ok,
            Err(e) if !params.exact_fallback => return Err(fail(e, stats)),
            Err(e) => match cover_down_exact(&g2, &inside, ctx.pool, &seed.child(5), params.fallback_node_budget) {
                Some(h) => {
                    stats.exact_fallback_used = true;
                    (r2.edge_count(), h)
                }
                None => return Err(fail(e, stats)),
            },
        }
    };
    stats.crossing_edges = crossing_edges;
    let leftover_inside = inside.minus(&finish.shadow());
    stats.inner_edges_used = inside.edge_count() - leftover_inside.edge_count();
    stats.leftover_inside_edges = leftover_inside.edge_count();
    stats.leftover_inside_max_degree = leftover_inside.max_degree();

    let mut covered = chosen;
    covered.extend(finish.iter().copied());
    debug_assert!(covered.is_edge_disjoint());
    debug_assert_eq!(covered.shadow().union(&leftover_inside), *g);
    Ok(LevelResult {
        covered,
        leftover_inside,
        stats,
    })
}

/// Result of covering everything outside the last vortex level.
#[derive(Debug, Clone)]
pub struct AbsorptionResult {
    pub covered: TripleSet,
    pub leftover: DenseGraph,
    pub levels: Vec<LevelStats>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("level {level}: {failure}")]
pub struct AbsorptionFailure {
    pub level: usize,
    pub failure: LevelFailure,
    pub levels: Vec<LevelStats>,
}

/// Runs the levels of `vortex` on `g`. Before level `i`, edges inside
/// `V_{i+2}` are held back, so an edge inside `V_i` is covered at stage `i − 1`
/// or `i` and never earlier.
pub fn cover_outside(
    g: &DenseGraph,
    vortex: &Vortex,
    params: &LevelParams,
    ctx: LevelContext<'_>,
    seed: &Seed,
) -> Result<AbsorptionResult, AbsorptionFailure> {
    let levels = vortex.levels();
    let depth = vortex.depth();
    let mut current = g.clone();
    let mut covered = TripleSet::new(g.n());
    let mut stats = Vec::with_capacity(depth);
    for i in 0..depth {
        let held = if i + 2 <= depth {
            current.induced(&levels[i + 2])
        } else {
            DenseGraph::empty(g.n())
        };
        let g_curr = current.minus(&held);
        let ctx = LevelContext {
            terminal: if i + 1 == depth { ctx.terminal } else { None },
            ..ctx
        };
        match run_level(&g_curr, &levels[i + 1], params, ctx, &seed.child(i as u64)) {
            Ok(res) => {
                covered.extend(res.covered.iter().copied());
                current = res.leftover_inside.union(&held);
                stats.push(res.stats);
            }
            Err(failure) => {
                stats.push(failure.stats.clone());
                return Err(AbsorptionFailure {
                    level: i,
                    failure,
                    levels: stats,
                });
            }
        }
    }
    Ok(AbsorptionResult {
        covered,
        leftover: current,
        levels: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::verify_triples;
    use proptest::prelude::*;

    #[test]
    fn vortex_size_recurrence() {
        assert_eq!(vortex_sizes(200, 20, 0.33), vec![200, 66, 22, 20]);
        assert_eq!(vortex_sizes(21, 9, 0.4), vec![21, 9]);
        assert_eq!(vortex_sizes(10, 10, 0.5), vec![10]);
    }

    #[test]
    fn vortex_examples() {
        let x = VertexSet::from_iter_in(200, 0..20);
        let v = build_vortex(200, &x, 0.33, &Seed::new(1)).unwrap();
        assert_eq!(v.sizes(), vec![200, 66, 22, 20]);
        for w in v.levels().windows(2) {
            assert!(w[1].is_subset(&w[0]));
            assert!(x.is_subset(&w[1]));
        }
        assert_eq!(v.last(), &x);

        let x = VertexSet::from_iter_in(21, [1, 2, 3]);
        let v = build_vortex(21, &x, 0.1, &Seed::new(2)).unwrap();
        assert_eq!(v.sizes(), vec![21, 3]);

        let all = VertexSet::full(12);
        assert_eq!(build_vortex(12, &all, 0.5, &Seed::new(3)).unwrap().depth(), 0);
        assert!(build_vortex(12, &all, 1.5, &Seed::new(3)).is_err());
    }

    #[test]
    fn balanced_vortex_keeps_parts_equal() {
        let x = VertexSet::from_iter_in(30, [0, 1, 10, 11, 20, 21]);
        let v = build_balanced_vortex(10, &x, 0.5, &Seed::new(4)).unwrap();
        assert_eq!(v.sizes(), vec![30, 15, 6]);
        for level in v.levels() {
            let counts: Vec<usize> = (0..3)
                .map(|j| level.iter().filter(|&u| u as usize / 10 == j).count())
                .collect();
            assert!(counts.iter().all(|&c| c == counts[0]), "{counts:?}");
        }
        let lopsided = VertexSet::from_iter_in(30, [0, 1, 10]);
        assert!(matches!(
            build_balanced_vortex(10, &lopsided, 0.5, &Seed::new(4)),
            Err(VortexError::Unbalanced { .. })
        ));
    }

    #[test]
    fn reserve_saturation_and_zero_rate() {
        let g = DenseGraph::complete(30);
        let v1 = VertexSet::from_iter_in(30, 0..10);
        let r = select_reserve(&g, &v1, 1.0, 0.5, &Seed::new(1), 1).unwrap();
        assert_eq!(r.edges.edge_count(), 200);
        assert!((0..10).all(|v| r.edges.degree(v) == 20));
        assert!((10..30).all(|v| r.edges.degree(v) == 10));

        match select_reserve(&g, &v1, 0.0, 0.5, &Seed::new(1), 3) {
            Err(VortexError::ReserveFailed { report, attempts }) => {
                assert_eq!(attempts, 3);
                assert!(!report.get("A1").unwrap().passed);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reserve_acceptance_at_k60() {
        let g = DenseGraph::complete(60);
        let v1 = VertexSet::from_iter_in(60, 0..20);
        let ok = (0..100)
            .filter(|&s| select_reserve(&g, &v1, 0.5, 1.0, &Seed::new(s), 5).is_ok())
            .count();
        assert!(ok >= 99, "{ok}/100");
        // the codegree lower bound is the binding condition at tolerance 0.5
        let tight = (0..20)
            .filter(|&s| select_reserve(&g, &v1, 0.5, 0.5, &Seed::new(s), 5).is_ok())
            .count();
        assert!(tight <= 2, "{tight}/20");
    }

    #[test]
    fn reserve_edges_cross() {
        let g = DenseGraph::complete(24);
        let v1 = VertexSet::from_iter_in(24, 0..8);
        let r = select_reserve(&g, &v1, 0.5, 10.0, &Seed::new(3), 5).unwrap();
        assert!(r.edges.edges().all(|e| v1.contains(e.0) != v1.contains(e.1)));
    }

    #[test]
    fn internal_examples() {
        let g2 = DenseGraph::complete(12);
        assert!(cover_internal(&DenseGraph::empty(12), &g2, 1.0, &Seed::new(0))
            .unwrap()
            .is_empty());

        // edge 0-1 with ten common neighbours 2..12
        let l1 = DenseGraph::from_edges(12, [(0, 1)]);
        let mut g2 = DenseGraph::from_edges(12, [(0, 1)]);
        for w in 2..12 {
            g2.add_edge(0, w);
            g2.add_edge(1, w);
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in 0..200 {
            let h = cover_internal(&l1, &g2, 1.0, &Seed::new(s)).unwrap();
            assert_eq!(h.len(), 1);
            seen.insert(h.iter().next().unwrap().c());
        }
        assert_eq!(seen.len(), 10);

        let bare = DenseGraph::from_edges(4, [(0, 1)]);
        assert_eq!(
            cover_internal(&bare, &bare, 1.0, &Seed::new(0)),
            Err(VortexError::InternalStarved { edge: Edge::new(0, 1) })
        );
    }

    #[test]
    fn crossing_examples() {
        let v1 = VertexSet::from_iter_in(7, 1..7);
        assert!(
            cover_crossing(&DenseGraph::empty(7), &DenseGraph::complete(7).induced(&v1), &v1, 1.0, &Seed::new(0), 5)
                .unwrap()
                .is_empty()
        );
        // vertex 0 joined to all six inner vertices, complete link
        let r3 = DenseGraph::from_edges(7, (1..7).map(|x| (0, x)));
        let inner = DenseGraph::complete(7).induced(&v1);
        let h = cover_crossing(&r3, &inner, &v1, 1.0, &Seed::new(1), 5).unwrap();
        assert_eq!(h.len(), 3);
        assert!(verify_triples(&r3.union(&h.shadow()), h.iter().copied()).valid);
        assert_eq!(h.shadow().minus(&inner), r3);

        let odd = DenseGraph::from_edges(7, (1..4).map(|x| (0, x)));
        assert!(matches!(
            cover_crossing(&odd, &inner, &v1, 1.0, &Seed::new(1), 5),
            Err(VortexError::OddDegree { vertex: 0, degree: 3 })
        ));
    }

    #[test]
    fn crossing_uses_natural_bipartition() {
        // outside vertex 0 in part 0; link {3, 4} in part 1 and {6, 7} in part 2
        let parts = [0u8, 0, 0, 1, 1, 1, 2, 2, 2];
        let v1 = VertexSet::from_iter_in(9, [3, 4, 6, 7]);
        let r3 = DenseGraph::from_edges(9, [(0, 3), (0, 4), (0, 6), (0, 7)]);
        let inner = DenseGraph::from_edges(9, [(3, 6), (3, 7), (4, 6), (4, 7)]);
        let h = cover_crossing_in(&r3, &inner, &v1, 1.0, &TriplePool::All, Some(&parts), &Seed::new(0), 1).unwrap();
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn level_without_outside_edges_is_identity() {
        let mut g = DenseGraph::empty(10);
        for (u, v) in [(0, 1), (1, 2), (0, 2)] {
            g.add_edge(u, v);
        }
        let v1 = VertexSet::from_iter_in(10, 0..4);
        let r = run_level(&g, &v1, &LevelParams::default(), LevelContext::default(), &Seed::new(0)).unwrap();
        assert!(r.covered.is_empty());
        assert_eq!(r.leftover_inside, g);
    }

    #[test]
    fn level_parity_violation_fails_early() {
        let mut g = DenseGraph::complete(12);
        g.remove_edge(10, 11);
        let v1 = VertexSet::from_iter_in(12, 0..4);
        let err = run_level(&g, &v1, &LevelParams::default(), LevelContext::default(), &Seed::new(0)).unwrap_err();
        assert!(matches!(err.error, VortexError::OddDegree { .. }));
        assert!(err.stats.reserve_report.is_none());
    }

    fn tolerant() -> LevelParams {
        LevelParams {
            reserve_q: 0.6,
            reserve_tolerance: 1.0,
            exact_fallback: true,
            ..LevelParams::default()
        }
    }

    #[test]
    fn level_success_decomposes_outside() {
        let g = DenseGraph::complete(33);
        let v1 = VertexSet::from_iter_in(33, 0..13);
        let mut ok = 0;
        for s in 0..40 {
            if let Ok(r) = run_level(&g, &v1, &tolerant(), LevelContext::default(), &Seed::new(s)) {
                ok += 1;
                assert!(r.covered.is_edge_disjoint());
                assert!(r.leftover_inside.edges().all(|e| v1.contains(e.0) && v1.contains(e.1)));
                assert_eq!(r.covered.shadow().union(&r.leftover_inside), g);
                assert_eq!(
                    r.covered.shadow().edge_count() + r.leftover_inside.edge_count(),
                    g.edge_count()
                );
            }
        }
        assert!(ok >= 30, "{ok}/40");
    }

    #[test]
    fn terminal_level_leaves_terminal_triangles() {
        let g = DenseGraph::complete(21);
        let v1 = VertexSet::from_iter_in(21, 0..9);
        let sts9 = crate::oracle::bose_construction(9).unwrap().into_triples();
        let terminal = TripleSet::from_triples(21, sts9.iter().copied());
        let ctx = LevelContext {
            terminal: Some(&terminal),
            ..LevelContext::default()
        };
        let params = LevelParams {
            reserve_q: 0.5,
            ..tolerant()
        };
        let mut ok = 0;
        for s in 0..20 {
            let Ok(r) = run_level(&g, &v1, &params, ctx, &Seed::new(s)) else {
                continue;
            };
            ok += 1;
            assert_eq!(r.covered.shadow().union(&r.leftover_inside), g);
            assert!(r.covered.iter().all(|t| !t.is_within(&v1)));
            let left = &r.leftover_inside;
            let used: Vec<Triple> = terminal
                .iter()
                .copied()
                .filter(|t| t.edges().iter().all(|e| left.has_edge(e.0, e.1)))
                .collect();
            assert_eq!(used.len() * 3, left.edge_count());
        }
        assert!(ok >= 5, "{ok}/20");
    }

    #[test]
    fn exact_cover_down_covers_residual() {
        let g = DenseGraph::complete(9);
        let v1 = VertexSet::from_iter_in(9, 0..4);
        let inside = g.induced(&v1);
        let residual = g.minus(&inside);
        let h = cover_down_exact(&residual, &inside, &TriplePool::All, &Seed::new(2), 100_000).unwrap();
        assert!(h.is_edge_disjoint());
        let used = h.shadow();
        assert_eq!(used.minus(&inside), residual);
        assert!(h.iter().all(|t| t.count_in(&v1) < 3));
        // a single crossing edge cannot be covered
        let lone = DenseGraph::from_edges(9, [(0, 5)]);
        assert!(cover_down_exact(&lone, &inside, &TriplePool::All, &Seed::new(2), 1000).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn level_outcomes_partition_the_graph(n in 15usize..28, k in 5usize..9, s in any::<u64>()) {
            let g = DenseGraph::complete(if n % 2 == 0 { n + 1 } else { n });
            let v1 = VertexSet::from_iter_in(g.n(), 0..k as Vertex);
            if let Ok(r) = run_level(&g, &v1, &tolerant(), LevelContext::default(), &Seed::new(s)) {
                prop_assert!(r.covered.is_edge_disjoint());
                prop_assert_eq!(r.covered.shadow().union(&r.leftover_inside), g.clone());
                prop_assert_eq!(3 * r.covered.len() + r.leftover_inside.edge_count(), g.edge_count());
                // parity survives triangle removal
                prop_assert!((0..g.n() as Vertex).all(|v| r.leftover_inside.degree(v) % 2 == 0));
            }
        }
    }
}
