//! Random models: the binomial triple model, the Latin support model, the
//! isolated-triangle ("linear") sampler used for absorber banks, and uniform
//! vertex subsets.
//!
//! All randomness is keyed on a [`Seed`]. Per-object Bernoulli draws use a
//! counter-based hash of `(seed, object index)`, so a triple's fate does not
//! depend on enumeration order or on which thread evaluates it, and two calls
//! with the same seed but different densities see the same uniforms (the
//! standard monotone coupling).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{triangle_list, DenseGraph, Triple, TripleSet, Vertex, VertexSet};
use crate::latin::LatinSupport;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A master seed plus a derivation path. Identical `(master, path)` always
/// yields identical streams.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "SeedRepr", into = "SeedRepr")]
pub struct Seed {
    master: u64,
    path: Vec<u64>,
    key: u64,
}

#[derive(Serialize, Deserialize)]
struct SeedRepr {
    master: u64,
    path: Vec<u64>,
}

impl From<SeedRepr> for Seed {
    fn from(r: SeedRepr) -> Seed {
        Seed::with_path(r.master, r.path)
    }
}

impl From<Seed> for SeedRepr {
    fn from(s: Seed) -> SeedRepr {
        SeedRepr {
            master: s.master,
            path: s.path,
        }
    }
}

impl std::fmt::Debug for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Seed({}:{:?})", self.master, self.path)
    }
}

impl Seed {
    pub fn new(master: u64) -> Seed {
        Seed::with_path(master, Vec::new())
    }

    pub fn with_path(master: u64, path: Vec<u64>) -> Seed {
        let key = path
            .iter()
            .fold(splitmix64(master), |k, &p| splitmix64(k ^ splitmix64(p)));
        Seed { master, path, key }
    }

    /// The seed at `path ++ [index]`.
    pub fn child(&self, index: u64) -> Seed {
        let mut path = self.path.clone();
        path.push(index);
        Seed {
            master: self.master,
            key: splitmix64(self.key ^ splitmix64(index)),
            path,
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Counter-based uniform in `[0, 1)` for object `index`.
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        let h = splitmix64(self.key() ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)));
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli(p) for object `index`; `p >= 1` is always true, `p <= 0` always false.
    #[inline]
    pub fn bernoulli(&self, index: u64, p: f64) -> bool {
        self.uniform(index) < p
    }

    /// A sequential stream generator for shuffles and choices.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key())
    }
}

/// Binomial random 3-graph on `0..n`: each triple kept independently with probability `p`.
pub fn sample_g3(n: usize, p: f64, seed: &Seed) -> TripleSet {
    let mut out = TripleSet::new(n);
    if p <= 0.0 {
        return out;
    }
    for c in 2..n as Vertex {
        for b in 1..c {
            for a in 0..b {
                let t = Triple::new(a, b, c);
                if seed.bernoulli(t.rank(), p) {
                    out.insert(t);
                }
            }
        }
    }
    out
}

/// A binomial triple set evaluated lazily: membership of a triple is its
/// rank-keyed Bernoulli draw, so it agrees with [`sample_g3`] on the same seed.
#[derive(Debug, Clone, PartialEq)]
pub enum TriplePool {
    All,
    Binomial { seed: Seed, p: f64 },
    Set(TripleSet),
    Both(Box<TriplePool>, Box<TriplePool>),
}

impl TriplePool {
    pub fn binomial(p: f64, seed: Seed) -> Self {
        if p >= 1.0 {
            TriplePool::All
        } else {
            TriplePool::Binomial { seed, p }
        }
    }

    /// Triples in both pools.
    pub fn and(self, other: TriplePool) -> TriplePool {
        match (self, other) {
            (TriplePool::All, q) | (q, TriplePool::All) => q,
            (a, b) => TriplePool::Both(Box::new(a), Box::new(b)),
        }
    }

    pub fn contains(&self, t: &Triple) -> bool {
        match self {
            TriplePool::All => true,
            TriplePool::Binomial { seed, p } => seed.bernoulli(t.rank(), *p),
            TriplePool::Set(s) => s.contains(t),
            TriplePool::Both(a, b) => a.contains(t) && b.contains(t),
        }
    }

    pub fn materialize(&self, n: usize) -> TripleSet {
        match self {
            TriplePool::All => TripleSet::complete(n),
            TriplePool::Binomial { seed, p } => sample_g3(n, *p, seed),
            TriplePool::Set(s) => s.filter(|t| (t.max_vertex() as usize) < n),
            TriplePool::Both(a, b) => a.materialize(n).filter(|t| b.contains(t)),
        }
    }
}

/// A raw binomial triangle sample together with its isolated members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSamplePair {
    pub h_prime: TripleSet,
    pub h: TripleSet,
}

/// Keeps the members of `h_prime` that share no vertex pair with any other member.
pub fn isolated_triangles(h_prime: &TripleSet) -> TripleSet {
    let index = h_prime.edge_index();
    h_prime.filter(|t| t.edges().iter().all(|e| index[e].len() == 1))
}

/// Samples each triangle of `g \ g[x]` with probability `p`, then keeps the
/// triangles edge-disjoint from every other sampled triangle.
///
/// Triangles with two or more vertices in `x` use an edge of `g[x]` and are
/// never candidates.
pub fn sample_linear(g: &DenseGraph, x: &VertexSet, p: f64, seed: &Seed) -> LinearSamplePair {
    let mut h_prime = TripleSet::new(g.n());
    if p > 0.0 {
        for t in triangle_list(g, None) {
            if t.count_in(x) <= 1 && seed.bernoulli(t.rank(), p) {
                h_prime.insert(t);
            }
        }
    }
    let h = isolated_triangles(&h_prime);
    LinearSamplePair { h_prime, h }
}

/// Each of the `n³` (row, column, symbol) memberships drawn independently with probability `p`.
pub fn sample_latin_support(n: usize, p: f64, seed: &Seed) -> LatinSupport {
    let mut s = LatinSupport::empty(n);
    if p <= 0.0 {
        return s;
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if seed.bernoulli(LatinSupport::cell_index(n, i, j, k), p) {
                    s.allow(i, j, k);
                }
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("subset size exceeds universe: requested {requested}, universe has {available}")]
    SubsetTooLarge { requested: usize, available: usize },
}

/// A uniformly random `k`-subset of `universe`.
pub fn sample_vertex_subset(
    universe: &VertexSet,
    k: usize,
    seed: &Seed,
) -> Result<VertexSet, SamplingError> {
    let mut pool = universe.to_vec();
    if k > pool.len() {
        return Err(SamplingError::SubsetTooLarge {
            requested: k,
            available: pool.len(),
        });
    }
    let mut rng = seed.rng();
    let (chosen, _) = pool.partial_shuffle(&mut rng, k);
    Ok(VertexSet::from_iter_in(
        universe.universe(),
        chosen.iter().copied(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_path_sensitive_and_reproducible() {
        let s = Seed::new(7);
        assert_eq!(s.child(3).key(), Seed::with_path(7, vec![3]).key());
        assert_ne!(s.child(3).key(), s.child(4).key());
        assert_ne!(s.child(1).child(2).key(), s.child(2).child(1).key());
        let json = serde_json::to_string(&s.child(5)).unwrap();
        let back: Seed = serde_json::from_str(&json).unwrap();
        assert_eq!(back.uniform(11), s.child(5).uniform(11));
    }

    #[test]
    fn g3_extremes() {
        let s = Seed::new(1);
        assert!(sample_g3(9, 0.0, &s).is_empty());
        assert_eq!(sample_g3(9, 1.0, &s).len(), 84);
    }

    #[test]
    fn g3_mean_count_matches_binomial() {
        // mean 42, standard error sqrt(21/10000) ≈ 0.046
        let trials = 10_000u64;
        let total: usize = (0..trials)
            .map(|i| sample_g3(9, 0.5, &Seed::new(99).child(i)).len())
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 42.0).abs() < 1.0, "mean {mean}");
        assert!((mean - 42.0).abs() < 3.0 * (21.0f64 / trials as f64).sqrt() + 1e-9);
    }

    #[test]
    fn g3_is_coupled_across_densities() {
        let s = Seed::new(5);
        let lo = sample_g3(11, 0.2, &s);
        let hi = sample_g3(11, 0.6, &s);
        assert!(lo.is_subset(&hi));
    }

    #[test]
    fn pool_agrees_with_materialized_sample() {
        let seed = Seed::new(9);
        let pool = TriplePool::binomial(0.3, seed.clone());
        let ts = sample_g3(10, 0.3, &seed);
        assert_eq!(pool.materialize(10), ts);
        for t in TripleSet::complete(10).iter() {
            assert_eq!(pool.contains(t), ts.contains(t));
        }
        assert_eq!(TriplePool::binomial(1.0, seed), TriplePool::All);
    }

    #[test]
    fn linear_sampler_examples() {
        let k4 = DenseGraph::complete(4);
        let none = VertexSet::new(4);
        let s = Seed::new(3);
        let pair = sample_linear(&k4, &none, 0.0, &s);
        assert!(pair.h.is_empty() && pair.h_prime.is_empty());
        let pair = sample_linear(&k4, &none, 1.0, &s);
        assert_eq!(pair.h_prime.len(), 4);
        assert!(pair.h.is_empty());

        let tri = DenseGraph::from_edges(6, [(0, 1), (0, 2), (1, 2)]);
        let pair = sample_linear(&tri, &VertexSet::new(6), 1.0, &s);
        assert_eq!(pair.h.to_vec(), vec![Triple::new(0, 1, 2)]);
    }

    #[test]
    fn linear_sampler_skips_triangles_touching_x_twice() {
        let g = DenseGraph::complete(5);
        let x = VertexSet::from_iter_in(5, [0, 1]);
        let pair = sample_linear(&g, &x, 1.0, &Seed::new(0));
        assert!(pair.h_prime.iter().all(|t| t.count_in(&x) <= 1));
        assert_eq!(pair.h_prime.len(), 10 - 3);
    }

    #[test]
    fn latin_support_extremes_and_mean() {
        let s = Seed::new(8);
        let full = sample_latin_support(4, 1.0, &s);
        assert!((0..4).all(|i| (0..4).all(|j| full.symbols(i, j).len() == 4)));
        let empty = sample_latin_support(4, 0.0, &s);
        assert_eq!(empty.total(), 0);

        let trials = 10_000u64;
        let total: usize = (0..trials)
            .map(|i| sample_latin_support(6, 0.5, &Seed::new(21).child(i)).total())
            .sum();
        let mean = total as f64 / trials as f64;
        let se = (216.0 * 0.25 / trials as f64).sqrt();
        assert!((mean - 108.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn vertex_subset_examples() {
        let u = VertexSet::full(10);
        let s = Seed::new(4);
        assert_eq!(sample_vertex_subset(&u, 10, &s).unwrap(), u);
        assert!(sample_vertex_subset(&u, 0, &s).unwrap().is_empty());
        assert_eq!(
            sample_vertex_subset(&u, 11, &s),
            Err(SamplingError::SubsetTooLarge {
                requested: 11,
                available: 10
            })
        );
        let sub = VertexSet::from_iter_in(10, [2, 4, 6]);
        let pick = sample_vertex_subset(&sub, 2, &s).unwrap();
        assert!(pick.is_subset(&sub) && pick.len() == 2);
    }

    #[test]
    fn vertex_subset_inclusion_is_uniform() {
        let u = VertexSet::full(10);
        let trials = 20_000u64;
        let mut hits = [0usize; 10];
        for i in 0..trials {
            for v in sample_vertex_subset(&u, 5, &Seed::new(12).child(i)).unwrap().iter() {
                hits[v as usize] += 1;
            }
        }
        // ten simultaneous checks, so a four-sigma band
        let se = (0.25 / trials as f64).sqrt();
        for h in hits {
            let f = h as f64 / trials as f64;
            assert!((f - 0.5).abs() < 4.0 * se, "frequency {f}");
        }
    }
}
