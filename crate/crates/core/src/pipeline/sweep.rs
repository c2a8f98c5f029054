use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{construct_in, PipelineParams};
use crate::graph::{DenseGraph, TripleSet};
use crate::oracle;
use crate::sampling::{sample_g3, Seed, TriplePool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    /// Exact cover of `K_n` by the sampled triples.
    Oracle,
    /// The one-level construction restricted to the sampled triples.
    Pipeline,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("K_{0} has no triangle decomposition (need n = 1 or 3 mod 6)")]
    NotAdmissible(usize),
    #[error("density {0} outside [0, 1]")]
    BadDensity(f64),
    #[error("at least one trial is required")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub p: f64,
    pub trials: usize,
    pub successes: usize,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Number of vertex pairs of `K_n` lying in no triple of `ts`.
pub fn uncovered_pair_check(ts: &TripleSet, n: usize) -> usize {
    let mut covered = DenseGraph::empty(n);
    for t in ts.iter() {
        for e in t.edges() {
            covered.add_edge(e.0, e.1);
        }
    }
    n * n.saturating_sub(1) / 2 - covered.edge_count()
}

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let ph = k as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (ph + z * z / (2.0 * nf)) / denom;
    let half = z * (ph * (1.0 - ph) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    // the exact endpoints at k = 0 and k = n are lost to rounding otherwise
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Success frequency of decomposing `K_n` inside `G^(3)(n, p)` over a grid of
/// densities. Trial `t` uses the same uniforms at every `p`, so the sampled
/// hypergraphs are nested as `p` grows.
pub fn threshold_sweep(
    n: usize,
    p_grid: &[f64],
    trials: usize,
    method: SweepMethod,
    params: &PipelineParams,
    seed: &Seed,
) -> Result<Vec<SweepRow>, SweepError> {
    if n % 6 != 1 && n % 6 != 3 {
        return Err(SweepError::NotAdmissible(n));
    }
    if trials == 0 {
        return Err(SweepError::NoTrials);
    }
    if let Some(&p) = p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SweepError::BadDensity(p));
    }
    let kn = DenseGraph::complete(n);
    let jobs: Vec<(usize, usize)> = (0..p_grid.len()).flat_map(|i| (0..trials).map(move |t| (i, t))).collect();
    let wins: Vec<bool> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let p = p_grid[i];
            let s = seed.child(t as u64);
            match method {
                SweepMethod::Oracle => {
                    let h = sample_g3(n, p, &s);
                    uncovered_pair_check(&h, n) == 0 && oracle::solve(&kn, &h).is_some()
                }
                SweepMethod::Pipeline => {
                    let pool = TriplePool::binomial(p, s.clone());
                    construct_in(&kn, params, 1, &pool, &s.child(1)).success()
                }
            }
        })
        .collect();
    Ok(tally(n, p_grid, trials, &wins))
}

/// Rows from per-job outcomes laid out density-major.
pub(crate) fn tally(n: usize, p_grid: &[f64], trials: usize, wins: &[bool]) -> Vec<SweepRow> {
    p_grid
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let k = wins[i * trials..(i + 1) * trials].iter().filter(|&&w| w).count();
            let (lo, hi) = wilson_interval(k, trials);
            SweepRow {
                n,
                p,
                trials,
                successes: k,
                frequency: k as f64 / trials as f64,
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n,p,trials,successes,frequency,ci_low,ci_high\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.n, r.p, r.trials, r.successes, r.frequency, r.ci_low, r.ci_high
        );
    }
    out
}
