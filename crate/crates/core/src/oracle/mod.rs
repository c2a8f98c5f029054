//! Exact ground truth at small orders: triangle decompositions restricted to
//! a candidate triple set, solved and counted as exact cover problems, plus
//! the two classical direct Steiner triple system constructions.

mod dlx;
mod direct;

use std::collections::BTreeMap;
use std::ops::ControlFlow;

pub use dlx::ExactCover;
pub use direct::{bose_construction, skolem_construction, ConstructionError};

use crate::graph::{Decomposition, DenseGraph, Edge, Triple, TripleSet};

/// The reduction of "decompose `g` using only candidate triples" to exact cover:
/// items are the edges of `g`, options the candidates whose three edges lie in `g`.
#[derive(Debug, Clone)]
pub struct ExactCoverInstance {
    pub items: Vec<Edge>,
    pub options: Vec<Triple>,
    pub cap: Option<u64>,
}

impl ExactCoverInstance {
    /// Candidates using a non-edge of `g` can never appear in a decomposition and are dropped.
    pub fn new(g: &DenseGraph, candidates: &TripleSet) -> Self {
        assert_eq!(
            g.n(),
            candidates.n(),
            "candidate triples must live on the graph's vertex set"
        );
        ExactCoverInstance {
            items: g.edges().collect(),
            options: candidates
                .iter()
                .copied()
                .filter(|t| g.has_triangle(t))
                .collect(),
            cap: None,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = Some(cap);
        self
    }

    fn engine(&self) -> ExactCover {
        let index: BTreeMap<Edge, usize> =
            self.items.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut ec = ExactCover::new(self.items.len());
        for t in &self.options {
            let cols = t.edges().map(|e| index[&e]);
            ec.add_option(&cols);
        }
        ec
    }

    fn to_triples(&self, n: usize, chosen: &[usize]) -> TripleSet {
        TripleSet::from_triples(n, chosen.iter().map(|&i| self.options[i]))
    }
}

/// Some decomposition of `g` built from `candidates`, or `None` if none exists.
pub fn solve(g: &DenseGraph, candidates: &TripleSet) -> Option<Decomposition> {
    if !crate::graph::is_triangle_divisible(g) {
        return None;
    }
    let inst = ExactCoverInstance::new(g, candidates);
    let chosen = inst.engine().first_solution()?;
    let ts = inst.to_triples(g.n(), &chosen);
    Some(Decomposition::new(g.clone(), ts).expect("exact cover yields a decomposition"))
}

/// Number of distinct decompositions of `g` within `candidates`, saturating at `cap`.
///
/// Labeled count: decompositions differing only by a relabeling are distinct.
/// Algorithm X branches on disjoint option sets, so no solution is reported twice.
pub fn count(g: &DenseGraph, candidates: &TripleSet, cap: u64) -> u64 {
    if !crate::graph::is_triangle_divisible(g) {
        return 0;
    }
    ExactCoverInstance::new(g, candidates)
        .with_cap(cap)
        .engine()
        .count(cap)
}

/// Materializes up to `cap` decompositions, in search order.
pub fn enumerate_all(g: &DenseGraph, candidates: &TripleSet, cap: usize) -> Vec<Decomposition> {
    let mut out: Vec<TripleSet> = Vec::new();
    if cap == 0 || !crate::graph::is_triangle_divisible(g) {
        return Vec::new();
    }
    let inst = ExactCoverInstance::new(g, candidates);
    let mut seen = std::collections::BTreeSet::new();
    inst.engine().for_each_solution(|chosen| {
        let ts = inst.to_triples(g.n(), chosen);
        if seen.insert(ts.to_vec()) {
            out.push(ts);
        }
        if out.len() >= cap {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    out.into_iter()
        .map(|ts| Decomposition::new(g.clone(), ts).expect("exact cover yields a decomposition"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{tests::fano, verify_decomposition};
    use crate::sampling::{sample_g3, Seed};
    use proptest::prelude::*;

    fn k(n: usize) -> (DenseGraph, TripleSet) {
        (DenseGraph::complete(n), TripleSet::complete(n))
    }

    #[test]
    fn solve_examples() {
        let (g, all) = k(5);
        assert!(solve(&g, &all).is_none());
        let (g, all) = k(7);
        let d = solve(&g, &all).unwrap();
        assert!(verify_decomposition(&g, d.triples()).valid);
        assert_eq!(d.triples().len(), 7);
        let d = solve(&g, &fano()).unwrap();
        assert_eq!(d.triples(), &fano());
        assert_eq!(count(&g, &fano(), 100), 1);
    }

    #[test]
    fn trivial_counts() {
        let (g, all) = k(3);
        assert_eq!(count(&g, &all, 10), 1);
        let sols = enumerate_all(&g, &all, 10);
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].triples().to_vec(), vec![Triple::new(0, 1, 2)]);
        let (g, all) = k(5);
        assert!(enumerate_all(&g, &all, 10).is_empty());
        assert_eq!(count(&DenseGraph::empty(4), &TripleSet::new(4), 5), 1);
    }

    #[test]
    fn sts7_enumeration() {
        let (g, all) = k(7);
        assert_eq!(count(&g, &all, 1_000_000), 30);
        let sols = enumerate_all(&g, &all, 100);
        assert_eq!(sols.len(), 30);
        let distinct: std::collections::BTreeSet<Vec<Triple>> =
            sols.iter().map(|d| d.triples().to_vec()).collect();
        assert_eq!(distinct.len(), 30);
        assert_eq!(count(&g, &all, 7), 7);
    }

    #[test]
    fn candidates_using_non_edges_are_ignored() {
        let mut g = DenseGraph::complete(7);
        g.remove_triangle(&Triple::new(0, 1, 2));
        // 18 edges, degrees 4/4/4/6/6/6/6: divisible
        let all = TripleSet::complete(7);
        if let Some(d) = solve(&g, &all) {
            assert!(verify_decomposition(&g, d.triples()).valid);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solutions_verify_and_enlarging_candidates_preserves_solvability(
            n in prop::sample::select(vec![7usize, 9]),
            p in 0.3f64..0.9,
            extra in 0.0f64..0.3,
            s in any::<u64>(),
        ) {
            let g = DenseGraph::complete(n);
            let seed = Seed::new(s);
            let small = sample_g3(n, p, &seed);
            let large = sample_g3(n, (p + extra).min(1.0), &seed);
            prop_assert!(small.is_subset(&large));
            let a = solve(&g, &small);
            if let Some(d) = &a {
                prop_assert!(verify_decomposition(&g, d.triples()).valid);
                prop_assert!(d.triples().is_subset(&small));
                prop_assert!(solve(&g, &large).is_some());
            }
        }

        #[test]
        fn solve_on_subgraph_verifies(n in 6usize..10, s in any::<u64>()) {
            // decomposable target built from a random edge-disjoint family
            let seed = Seed::new(s);
            let pool = sample_g3(n, 0.5, &seed);
            let mut used = DenseGraph::empty(n);
            let mut fam = TripleSet::new(n);
            for t in pool.iter() {
                if t.edges().iter().all(|e| !used.has_edge(e.0, e.1)) {
                    for e in t.edges() { used.add_edge(e.0, e.1); }
                    fam.insert(*t);
                }
            }
            let d = solve(&used, &pool).expect("planted family is a decomposition");
            prop_assert!(verify_decomposition(&used, d.triples()).valid);
        }
    }
}
