//! Bose (n ≡ 3 mod 6) and Skolem (n ≡ 1 mod 6) Steiner triple systems.
//!
//! Both place the points on `Q × Z_3` for a commutative quasigroup `Q`;
//! point `(x, i)` gets label `i·|Q| + x` (Skolem adds the point `∞ = n − 1`).

use thiserror::Error;

use crate::graph::{Decomposition, DenseGraph, Triple, TripleSet, Vertex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructionError {
    #[error("Bose requires n ≡ 3 (mod 6), got n = {0}")]
    BoseResidue(usize),
    #[error("Skolem requires n ≡ 1 (mod 6), got n = {0}")]
    SkolemResidue(usize),
}

fn finish(n: usize, triples: Vec<Triple>) -> Decomposition {
    Decomposition::new(DenseGraph::complete(n), TripleSet::from_triples(n, triples))
        .expect("direct construction yields a Steiner triple system")
}

/// STS(n) for `n = 6t + 3` from the idempotent commutative quasigroup
/// `x ∘ y = (t + 1)(x + y) mod (2t + 1)`.
pub fn bose_construction(n: usize) -> Result<Decomposition, ConstructionError> {
    if n % 6 != 3 {
        return Err(ConstructionError::BoseResidue(n));
    }
    let q = n / 3;
    let half = q.div_ceil(2);
    let op = |x: usize, y: usize| (half * (x + y)) % q;
    let pt = |x: usize, i: usize| (i % 3 * q + x) as Vertex;
    let mut out = Vec::with_capacity(n * (n - 1) / 6);
    for x in 0..q {
        out.push(Triple::new(pt(x, 0), pt(x, 1), pt(x, 2)));
    }
    for x in 0..q {
        for y in x + 1..q {
            for i in 0..3 {
                out.push(Triple::new(pt(x, i), pt(y, i), pt(op(x, y), i + 1)));
            }
        }
    }
    Ok(finish(n, out))
}

/// STS(n) for `n = 6t + 1` from the half-idempotent commutative quasigroup of
/// order `2t` obtained by relabeling the symbols of `Z_2t`:
/// `x ∘ y = σ((x + y) mod 2t)` with `σ(2k) = k`, `σ(2k + 1) = t + k`.
pub fn skolem_construction(n: usize) -> Result<Decomposition, ConstructionError> {
    if n % 6 != 1 {
        return Err(ConstructionError::SkolemResidue(n));
    }
    let t = n / 6;
    let q = 2 * t;
    let op = |x: usize, y: usize| {
        let s = (x + y) % q;
        if s.is_multiple_of(2) {
            s / 2
        } else {
            t + s / 2
        }
    };
    let pt = |x: usize, i: usize| (i % 3 * q + x) as Vertex;
    let inf = (n - 1) as Vertex;
    let mut out = Vec::with_capacity(n * (n - 1) / 6);
    for x in 0..t {
        out.push(Triple::new(pt(x, 0), pt(x, 1), pt(x, 2)));
        for i in 0..3 {
            out.push(Triple::new(inf, pt(t + x, i), pt(x, i + 1)));
        }
    }
    for x in 0..q {
        for y in x + 1..q {
            for i in 0..3 {
                out.push(Triple::new(pt(x, i), pt(y, i), pt(op(x, y), i + 1)));
            }
        }
    }
    Ok(finish(n, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::verify_decomposition;

    #[test]
    fn bose_small_orders() {
        assert_eq!(
            bose_construction(3).unwrap().triples().to_vec(),
            vec![Triple::new(0, 1, 2)]
        );
        for (n, m) in [(9, 12), (15, 35)] {
            let d = bose_construction(n).unwrap();
            assert_eq!(d.triples().len(), m);
            assert!(verify_decomposition(&DenseGraph::complete(n), d.triples()).valid);
        }
        assert_eq!(
            bose_construction(7).unwrap_err(),
            ConstructionError::BoseResidue(7)
        );
    }

    #[test]
    fn skolem_small_orders() {
        for (n, m) in [(7, 7), (13, 26), (19, 57)] {
            let d = skolem_construction(n).unwrap();
            assert_eq!(d.triples().len(), m);
            assert!(verify_decomposition(&DenseGraph::complete(n), d.triples()).valid);
        }
        assert!(skolem_construction(9).is_err());
        assert!(skolem_construction(1).unwrap().triples().is_empty());
    }
}
