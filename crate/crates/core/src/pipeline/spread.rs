use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{construct_recursive, PipelineParams};
use crate::graph::{DenseGraph, Triple, TripleSet};
use crate::sampling::Seed;

/// A distribution over decompositions that can be sampled from a seed.
/// `None` is a failed draw.
pub trait DecompositionSampler: Sync {
    fn sample(&self, seed: &Seed) -> Option<TripleSet>;
}

/// Uniform over a fixed list (e.g. all decompositions found by the oracle).
#[derive(Debug, Clone)]
pub struct UniformOver(pub Vec<TripleSet>);

impl DecompositionSampler for UniformOver {
    fn sample(&self, seed: &Seed) -> Option<TripleSet> {
        if self.0.is_empty() {
            return None;
        }
        let i = (seed.uniform(0) * self.0.len() as f64) as usize;
        Some(self.0[i.min(self.0.len() - 1)].clone())
    }
}

#[derive(Debug, Clone)]
pub struct PointMass(pub TripleSet);

impl DecompositionSampler for PointMass {
    fn sample(&self, _: &Seed) -> Option<TripleSet> {
        Some(self.0.clone())
    }
}

/// The output distribution of the construction on a fixed target.
#[derive(Debug, Clone)]
pub struct PipelineSampler {
    pub g: DenseGraph,
    pub params: PipelineParams,
    pub depth: usize,
}

impl DecompositionSampler for PipelineSampler {
    fn sample(&self, seed: &Seed) -> Option<TripleSet> {
        construct_recursive(&self.g, &self.params, self.depth, seed).decomposition
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpreadError {
    #[error("spread estimation needs at least 100 trials, got {0}")]
    TooFewTrials(usize),
}

/// Empirical spread at `|S| = 1` and `|S| = 2`. Frequencies are over successful
/// draws; radii are 95% normal-approximation half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub trials: usize,
    pub successes: usize,
    pub q1: f64,
    pub q1_se: f64,
    pub q1_radius: f64,
    pub q1_triple: Option<Triple>,
    pub q2: f64,
    pub q2_radius: f64,
    pub q2_pair: Option<(Triple, Triple)>,
    pub pairs_checked: usize,
    /// Largest inclusion count divided by all trials, failures included.
    pub per_triple_max: f64,
}

const Z95: f64 = 1.959_963_984_540_054;

pub fn estimate_spread(
    sampler: &dyn DecompositionSampler,
    trials: usize,
    pair_sample: usize,
    seed: &Seed,
) -> Result<SpreadReport, SpreadError> {
    if trials < 100 {
        return Err(SpreadError::TooFewTrials(trials));
    }
    let draws: Vec<Option<TripleSet>> = (0..trials)
        .into_par_iter()
        .map(|t| sampler.sample(&seed.child(t as u64)))
        .collect();
    let samples: Vec<BTreeSet<Triple>> = draws
        .into_iter()
        .flatten()
        .map(|ts| ts.iter().copied().collect())
        .collect();
    let s = samples.len();
    let mut counts: BTreeMap<Triple, usize> = BTreeMap::new();
    for smp in &samples {
        for t in smp {
            *counts.entry(*t).or_default() += 1;
        }
    }
    let (q1_triple, top) = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(t, &c)| (Some(*t), c))
        .unwrap_or((None, 0));
    let freq = |c: usize| if s == 0 { 0.0 } else { c as f64 / s as f64 };
    let q1 = freq(top);
    let q1_se = if s == 0 { 0.0 } else { (q1 * (1.0 - q1) / s as f64).sqrt() };

    // candidate pairs: observed triples that could co-occur (no shared pair)
    let observed: Vec<Triple> = counts.keys().copied().collect();
    let mut pairs = Vec::new();
    for (i, a) in observed.iter().enumerate() {
        for b in &observed[i + 1..] {
            if !a.shares_edge(b) {
                pairs.push((*a, *b));
            }
        }
    }
    if pairs.len() > pair_sample {
        let mut rng = seed.child(u64::MAX).rng();
        let keep = index::sample(&mut rng, pairs.len(), pair_sample).into_vec();
        pairs = keep.into_iter().map(|i| pairs[i]).collect();
        pairs.sort_unstable();
    }
    let mut q2 = 0.0;
    let mut q2_pair = None;
    let mut joint_best = 0.0;
    for &(a, b) in &pairs {
        let joint = freq(samples.iter().filter(|smp| smp.contains(&a) && smp.contains(&b)).count());
        let r = joint.sqrt();
        if r > q2 {
            q2 = r;
            q2_pair = Some((a, b));
            joint_best = joint;
        }
    }
    let q2_radius = if q2 > 0.0 {
        Z95 * (joint_best * (1.0 - joint_best) / s as f64).sqrt() / (2.0 * q2)
    } else {
        0.0
    };
    Ok(SpreadReport {
        trials,
        successes: s,
        q1,
        q1_se,
        q1_radius: Z95 * q1_se,
        q1_triple,
        q2,
        q2_radius,
        q2_pair,
        pairs_checked: pairs.len(),
        per_triple_max: top as f64 / trials as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::enumerate_all;

    fn sts7_all() -> Vec<TripleSet> {
        enumerate_all(&DenseGraph::complete(7), &TripleSet::complete(7), 100)
            .into_iter()
            .map(|d| d.into_triples())
            .collect()
    }

    #[test]
    fn point_mass_is_fully_concentrated() {
        let d = sts7_all().remove(0);
        let r = estimate_spread(&PointMass(d), 100, 50, &Seed::new(0)).unwrap();
        assert_eq!(r.q1, 1.0);
        assert_eq!(r.q2, 1.0);
        assert_eq!(r.per_triple_max, 1.0);
        assert!(estimate_spread(&PointMass(TripleSet::new(7)), 10, 5, &Seed::new(0)).is_err());
    }

    #[test]
    fn uniform_sts7_matches_enumeration() {
        let all = sts7_all();
        // each triple lies in exactly 6 of the 30 systems
        let mut inclusion: BTreeMap<Triple, usize> = BTreeMap::new();
        for d in &all {
            for t in d.iter() {
                *inclusion.entry(*t).or_default() += 1;
            }
        }
        assert_eq!(inclusion.len(), 35);
        assert!(inclusion.values().all(|&c| c == 6));
        // exact q2 over edge-disjoint pairs
        let triples: Vec<Triple> = inclusion.keys().copied().collect();
        let mut best = 0usize;
        for (i, a) in triples.iter().enumerate() {
            for b in &triples[i + 1..] {
                if !a.shares_edge(b) {
                    best = best.max(all.iter().filter(|d| d.contains(a) && d.contains(b)).count());
                }
            }
        }
        let exact_q2 = (best as f64 / 30.0).sqrt();

        let r = estimate_spread(&UniformOver(all), 30_000, 10_000, &Seed::new(5)).unwrap();
        assert_eq!(r.successes, 30_000);
        let se = (0.2f64 * 0.8 / 30_000.0).sqrt();
        // the maximum of 35 frequencies sits slightly above 1/5
        assert!((r.q1 - 0.2).abs() <= 3.0 * se + 0.01, "{}", r.q1);
        assert!((r.q2 - exact_q2).abs() < 0.03, "{} vs {exact_q2}", r.q2);
    }
}
