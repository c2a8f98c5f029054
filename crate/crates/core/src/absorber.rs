//! The `F_2m` absorber: a cycle `c₀…c_{2m−1}` with two apexes `a`, `b`,
//! triangulated and 2-coloured. One colour class contains the root
//! `{a, c₀, c₁}`; the other (the flip) covers the same `6m` edges without it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{DenseGraph, Edge, Triple, TripleSet, Vertex, VertexSet};
use crate::sampling::Seed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbsorberError {
    #[error("absorber needs m >= 2, got {0}")]
    TooSmall(usize),
    #[error("expected {expected} further vertices, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("absorber vertices must be distinct, {0} repeats")]
    Duplicate(Vertex),
    #[error("absorber selection failed; unsatisfied roots: {}", list(.unsatisfied))]
    SelectionFailed { unsatisfied: Vec<Triple> },
}

fn list(ts: &[Triple]) -> String {
    ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Absorber {
    m: usize,
    cycle: Vec<Vertex>,
    apex_a: Vertex,
    apex_b: Vertex,
    root: Triple,
    triangles: TripleSet,
}

fn class(m: usize, a: Vertex, b: Vertex, cycle: &[Vertex]) -> TripleSet {
    let k = 2 * m;
    let mut out = Vec::with_capacity(k);
    for j in 0..m {
        out.push(Triple::new(a, cycle[2 * j], cycle[2 * j + 1]));
        out.push(Triple::new(b, cycle[2 * j + 1], cycle[(2 * j + 2) % k]));
    }
    let n = out.iter().map(|t| t.max_vertex() as usize + 1).max().unwrap_or(0);
    TripleSet::from_triples(n, out)
}

impl Absorber {
    /// Absorber with root `{a, c₀, c₁}` on the given apexes and cycle.
    pub fn from_parts(m: usize, apex_a: Vertex, apex_b: Vertex, cycle: Vec<Vertex>) -> Result<Self, AbsorberError> {
        if m < 2 {
            return Err(AbsorberError::TooSmall(m));
        }
        if cycle.len() != 2 * m {
            return Err(AbsorberError::WrongLength {
                expected: 2 * m,
                got: cycle.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for &v in [apex_a, apex_b].iter().chain(&cycle) {
            if !seen.insert(v) {
                return Err(AbsorberError::Duplicate(v));
            }
        }
        let triangles = class(m, apex_a, apex_b, &cycle);
        Ok(Absorber {
            m,
            root: Triple::new(apex_a, cycle[0], cycle[1]),
            cycle,
            apex_a,
            apex_b,
            triangles,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cycle(&self) -> &[Vertex] {
        &self.cycle
    }

    pub fn apexes(&self) -> (Vertex, Vertex) {
        (self.apex_a, self.apex_b)
    }

    pub fn root(&self) -> Triple {
        self.root
    }

    /// The colour class containing the root.
    pub fn triangles(&self) -> &TripleSet {
        &self.triangles
    }

    /// The `2m − 1` triangles other than the root.
    pub fn completion(&self) -> Vec<Triple> {
        self.triangles.iter().copied().filter(|t| *t != self.root).collect()
    }

    pub fn vertices(&self) -> Vec<Vertex> {
        let mut vs = vec![self.apex_a, self.apex_b];
        vs.extend(&self.cycle);
        vs
    }

    /// Edges of the absorber (the same for both colour classes).
    pub fn edges(&self) -> BTreeSet<Edge> {
        self.triangles.iter().flat_map(|t| t.edges()).collect()
    }

    /// A proper 3-colouring making every triangle of both classes rainbow:
    /// both apexes get colour 0, the cycle alternates 1 and 2.
    pub fn part_coloring(&self) -> BTreeMap<Vertex, u8> {
        let mut c = BTreeMap::new();
        c.insert(self.apex_a, 0);
        c.insert(self.apex_b, 0);
        for (i, &v) in self.cycle.iter().enumerate() {
            c.insert(v, 1 + (i % 2) as u8);
        }
        c
    }
}

/// `F_2m` with `root = {a, c₀, c₁}` read in the triple's sorted order and
/// `others = [b, c₂, …, c_{2m−1}]`.
pub fn build_absorber(m: usize, root: Triple, others: &[Vertex]) -> Result<Absorber, AbsorberError> {
    if m < 2 {
        return Err(AbsorberError::TooSmall(m));
    }
    if others.len() != 2 * m - 1 {
        return Err(AbsorberError::WrongLength {
            expected: 2 * m - 1,
            got: others.len(),
        });
    }
    let [a, c0, c1] = root.vertices();
    let mut cycle = vec![c0, c1];
    cycle.extend(&others[1..]);
    Absorber::from_parts(m, a, others[0], cycle)
}

/// The opposite colour class: `{b, c_{2j}, c_{2j+1}}` and `{a, c_{2j+1}, c_{2j+2}}`.
pub fn flip(f: &Absorber) -> TripleSet {
    class(f.m, f.apex_b, f.apex_a, &f.cycle)
}

/// The flip viewed as an absorber in its own right (rooted at `{b, c₀, c₁}`).
pub fn flipped(f: &Absorber) -> Absorber {
    Absorber::from_parts(f.m, f.apex_b, f.apex_a, f.cycle.clone()).expect("same vertices")
}

struct Bank<'a> {
    by_edge: BTreeMap<Edge, Triple>,
    by_vertex: BTreeMap<Vertex, Vec<Triple>>,
    x: &'a VertexSet,
}

impl<'a> Bank<'a> {
    fn new(h: &TripleSet, x: &'a VertexSet) -> Self {
        let mut by_edge = BTreeMap::new();
        let mut by_vertex: BTreeMap<Vertex, Vec<Triple>> = BTreeMap::new();
        for &t in h.iter() {
            for e in t.edges() {
                by_edge.insert(e, t);
            }
            for v in t.vertices() {
                by_vertex.entry(v).or_default().push(t);
            }
        }
        Bank { by_edge, by_vertex, x }
    }

    /// All completions of `root` along the forced chain. With `h` edge-disjoint,
    /// each triangle after the first is determined by an edge lookup.
    fn absorbers(&self, root: Triple, m: usize, out: &mut Vec<Absorber>) {
        let rv = root.vertices();
        let fresh = |v: Vertex, used: &[Vertex]| !self.x.contains(v) && !used.contains(&v);
        for (a, c0, c1) in [
            (rv[0], rv[1], rv[2]),
            (rv[0], rv[2], rv[1]),
            (rv[1], rv[0], rv[2]),
            (rv[1], rv[2], rv[0]),
            (rv[2], rv[0], rv[1]),
            (rv[2], rv[1], rv[0]),
        ] {
            let Some(first) = self.by_vertex.get(&c1) else {
                continue;
            };
            for t1 in first {
                if *t1 == root {
                    continue;
                }
                let others: Vec<Vertex> = t1.vertices().into_iter().filter(|&v| v != c1).collect();
                if others.len() != 2 {
                    continue;
                }
                for (b, c2) in [(others[0], others[1]), (others[1], others[0])] {
                    if !fresh(b, &[a, c0, c1]) || !fresh(c2, &[a, c0, c1, b]) {
                        continue;
                    }
                    let mut cycle = vec![c0, c1, c2];
                    let mut ok = true;
                    // triangle k (k ≥ 2) is {apex, c_k, c_{k+1}} with apex alternating a, b
                    for k in 2..2 * m {
                        let apex = if k % 2 == 0 { a } else { b };
                        let ck = cycle[k];
                        let Some(t) = self.by_edge.get(&Edge::new(apex, ck)) else {
                            ok = false;
                            break;
                        };
                        let next = t.opposite(Edge::new(apex, ck));
                        if k == 2 * m - 1 {
                            ok = next == c0;
                        } else {
                            let mut used = vec![a, b];
                            used.extend(&cycle);
                            if !fresh(next, &used) {
                                ok = false;
                                break;
                            }
                            cycle.push(next);
                        }
                    }
                    if ok {
                        let f = Absorber::from_parts(m, a, b, cycle).expect("distinct by construction");
                        out.push(f);
                    }
                }
            }
        }
    }
}

/// Every absorber rooted at `root` whose other triangles lie in `h` and whose
/// other vertices avoid `x`, deduplicated by triangle set.
pub fn rooted_absorbers(h: &TripleSet, root: Triple, m: usize, x: &VertexSet) -> Vec<Absorber> {
    if m < 2 {
        return Vec::new();
    }
    let mut found = Vec::new();
    Bank::new(h, x).absorbers(root, m, &mut found);
    let mut seen = BTreeSet::new();
    found.retain(|f| seen.insert(f.triangles().to_vec()));
    found
}

pub fn find_rooted_absorber(h: &TripleSet, root: Triple, m: usize, x: &VertexSet) -> Option<Absorber> {
    rooted_absorbers(h, root, m, x).into_iter().next()
}

/// Number of triples `T′` inside `x`, sharing no edge with `root`, such that
/// some absorber of `root` and some absorber of `T′` in `h` share a triangle.
pub fn count_conflicting_roots(h: &TripleSet, root: Triple, m: usize, x: &VertexSet) -> usize {
    let mine: BTreeSet<Triple> = rooted_absorbers(h, root, m, x)
        .iter()
        .flat_map(|f| f.completion())
        .collect();
    if mine.is_empty() {
        return 0;
    }
    let xs = x.to_vec();
    let mut count = 0;
    for (i, &u) in xs.iter().enumerate() {
        for (j, &v) in xs.iter().enumerate().skip(i + 1) {
            for &w in &xs[j + 1..] {
                let t = Triple::new(u, v, w);
                if t == root || t.shares_edge(&root) {
                    continue;
                }
                let hit = rooted_absorbers(h, t, m, x)
                    .iter()
                    .any(|f| f.completion().iter().any(|c| mine.contains(c)));
                if hit {
                    count += 1;
                }
            }
        }
    }
    count
}

/// One absorber per root, pairwise edge-disjoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AbsorberAssignment {
    pub entries: Vec<AssignedAbsorber>,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedAbsorber {
    pub root: Triple,
    pub bank: usize,
    pub absorber: Absorber,
}

impl AbsorberAssignment {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_edge_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.entries
            .iter()
            .flat_map(|e| e.absorber.edges())
            .all(|e| seen.insert(e))
    }

    /// Non-root triangles of every absorber.
    pub fn absorbed(&self, n: usize) -> TripleSet {
        TripleSet::from_triples(n, self.entries.iter().flat_map(|e| e.absorber.completion()))
    }

    pub fn flips(&self, n: usize) -> TripleSet {
        TripleSet::from_triples(n, self.entries.iter().flat_map(|e| flip(&e.absorber).to_vec()))
    }
}

/// Picks a bank uniformly among those where the root has an absorber, then an
/// absorber uniformly within it; roots involved in an edge conflict are
/// re-drawn (Moser–Tardos) until the choice is edge-disjoint.
pub fn select_disjoint_absorbers(
    roots: &TripleSet,
    banks: &[(usize, TripleSet)],
    m: usize,
    x: &VertexSet,
    seed: &Seed,
    max_restarts: usize,
) -> Result<AbsorberAssignment, AbsorberError> {
    let roots: Vec<Triple> = roots.to_vec();
    let options: Vec<Vec<(usize, Vec<Absorber>)>> = roots
        .iter()
        .map(|&r| {
            banks
                .iter()
                .map(|(i, h)| (*i, rooted_absorbers(h, r, m, x)))
                .filter(|(_, fs)| !fs.is_empty())
                .collect()
        })
        .collect();
    let hopeless: Vec<Triple> = roots
        .iter()
        .zip(&options)
        .filter(|(_, o)| o.is_empty())
        .map(|(r, _)| *r)
        .collect();
    if !hopeless.is_empty() {
        return Err(AbsorberError::SelectionFailed { unsatisfied: hopeless });
    }
    let mut rng = seed.rng();
    let mut draw = |k: usize| {
        let (bank, fs) = options[k].choose(&mut rng).expect("nonempty");
        (*bank, fs.choose(&mut rng).expect("nonempty").clone())
    };
    let mut choice: Vec<(usize, Absorber)> = (0..roots.len()).map(&mut draw).collect();
    for round in 0..=max_restarts {
        let mut owner: BTreeMap<Edge, usize> = BTreeMap::new();
        let mut bad = BTreeSet::new();
        for (k, (_, f)) in choice.iter().enumerate() {
            for e in f.edges() {
                if let Some(&j) = owner.get(&e) {
                    bad.insert(j);
                    bad.insert(k);
                } else {
                    owner.insert(e, k);
                }
            }
        }
        if bad.is_empty() {
            return Ok(AbsorberAssignment {
                entries: roots
                    .iter()
                    .zip(choice)
                    .map(|(&root, (bank, absorber))| AssignedAbsorber { root, bank, absorber })
                    .collect(),
                resamples: round,
            });
        }
        if round == max_restarts {
            return Err(AbsorberError::SelectionFailed {
                unsatisfied: bad.into_iter().map(|k| roots[k]).collect(),
            });
        }
        for k in bad {
            choice[k] = draw(k);
        }
    }
    unreachable!("loop returns on its last round")
}

/// Whether every triangle of both classes takes one vertex from each part.
pub fn is_tripartite_absorber(f: &Absorber, parts: &[u8]) -> bool {
    f.triangles()
        .iter()
        .chain(flip(f).iter())
        .all(|t| {
            let p: BTreeSet<u8> = t.vertices().iter().map(|&v| parts[v as usize]).collect();
            p.len() == 3
        })
}

/// The graph covered by an absorber.
pub fn absorber_graph(f: &Absorber, n: usize) -> DenseGraph {
    DenseGraph::from_edges(n, f.edges().into_iter().map(|e| (e.0, e.1)))
}
