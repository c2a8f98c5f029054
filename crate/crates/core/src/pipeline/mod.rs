//! The bootstrapping construction. Absorber banks are sampled first, iterative
//! absorption covers everything outside a small set `X`, the leftover inside
//! `X` is decomposed (by the exact oracle or recursively), and every triangle
//! of that inner decomposition is exchanged for the flip of an absorber.

mod spread;
mod sweep;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::absorber::{rooted_absorbers, select_disjoint_absorbers, Absorber};
use crate::graph::{
    complement_max_degree, is_triangle_divisible, triangles_of, Decomposition, DenseGraph, Triple, TripleSet, Vertex,
    VertexSet,
};
use crate::oracle;
use crate::sampling::{isolated_triangles, sample_linear, Seed, TriplePool};
use crate::vortex::{build_balanced_vortex, build_vortex_in, cover_outside, LevelContext, LevelParams, LevelStats};

pub use spread::{estimate_spread, DecompositionSampler, PipelineSampler, PointMass, SpreadError, SpreadReport, UniformOver};
pub(crate) use sweep::tally;
pub use sweep::{sweep_csv, threshold_sweep, uncovered_pair_check, wilson_interval, SweepError, SweepMethod, SweepRow};

/// How a bank keeps triangles from its binomial sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankPacking {
    /// Only triangles sharing no pair with another sampled triangle.
    #[default]
    Isolated,
    /// A random greedy edge-disjoint subfamily.
    Greedy,
    /// Ignore the binomial sample and place random edge-disjoint absorbers,
    /// one per triangle of `G[X_i]` while room remains.
    Planted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    /// `|X|`; defaults to about 0.43 of the vertex count.
    pub x_size: Option<usize>,
    pub bank_count: usize,
    /// `|X_i|`; defaults to `|X|`.
    pub bank_inner_size: Option<usize>,
    /// `|Y_i|`; defaults to an even split of the vertices outside `X`.
    pub bank_outer_size: Option<usize>,
    /// Banks that must contain each triangle of `G[X]`; defaults to `max(1, bank_count / 4)`.
    pub bank_coverage: Option<usize>,
    pub bank_retries: usize,
    /// Defaults to `1 / |V(G_i')|`.
    pub bank_triple_density: Option<f64>,
    pub bank_packing: BankPacking,
    pub absorber_m: usize,
    pub absorber_restarts: usize,
    pub vortex_ratio: f64,
    /// Density of the triangle sample inside `X` used for the inner decomposition.
    pub inner_density: f64,
    /// Density of the triangle pool for iterative absorption.
    pub ia_density: f64,
    pub base_case_n: usize,
    /// Defaults to `⌈n / ln n⌉`.
    pub max_complement_degree: Option<usize>,
    /// Only offer the inner decomposition triangles that have an absorber in some bank.
    pub ind_absorbable_only: bool,
    /// Inner decompositions tried before giving up on absorbers.
    pub ind_attempts: usize,
    /// Solve the last absorption level exactly so that its leftover inside `X`
    /// splits into triangles that have an absorber.
    pub absorbable_terminal: bool,
    /// Cap on planted absorbers per bank.
    pub bank_absorbers: Option<usize>,
    pub level: LevelParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            x_size: None,
            bank_count: 2,
            bank_inner_size: None,
            bank_outer_size: None,
            bank_coverage: None,
            bank_retries: 20,
            bank_triple_density: None,
            bank_packing: BankPacking::Isolated,
            absorber_m: 2,
            absorber_restarts: 200,
            vortex_ratio: 0.45,
            inner_density: 1.0,
            ia_density: 1.0,
            base_case_n: 9,
            max_complement_degree: None,
            ind_absorbable_only: false,
            ind_attempts: 1,
            absorbable_terminal: false,
            bank_absorbers: None,
            level: LevelParams::default(),
        }
    }
}

impl PipelineParams {
    /// Settings under which K_21 with `|X| = 9` succeeds regularly.
    pub fn calibrated_k21() -> Self {
        PipelineParams {
            x_size: Some(9),
            vortex_ratio: 0.4,
            bank_count: 1,
            bank_packing: BankPacking::Planted,
            bank_absorbers: Some(6),
            absorbable_terminal: true,
            ind_absorbable_only: true,
            ind_attempts: 20,
            level: LevelParams {
                reserve_q: 0.5,
                reserve_tolerance: 1.0,
                exact_fallback: true,
                ..LevelParams::default()
            },
            ..PipelineParams::default()
        }
    }

    /// Settings for `K_{7,7,7}`: three vertices of each part in `X`.
    pub fn calibrated_latin() -> Self {
        PipelineParams {
            bank_absorbers: Some(3),
            ..PipelineParams::calibrated_k21()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let probs = [
            ("inner_density", self.inner_density),
            ("ia_density", self.ia_density),
            ("bank_triple_density", self.bank_triple_density.unwrap_or(0.5)),
            ("reserve_q", self.level.reserve_q),
            ("nibble_p", self.level.nibble_p),
            ("internal_p", self.level.internal_p),
            ("crossing_p", self.level.crossing_p),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.base_case_n < 7 {
            return Err(format!("base_case_n must be at least 7, got {}", self.base_case_n));
        }
        if self.absorber_m < 2 {
            return Err(format!("absorber_m must be at least 2, got {}", self.absorber_m));
        }
        if !(self.vortex_ratio > 0.0 && self.vortex_ratio < 1.0) {
            return Err(format!("vortex_ratio must lie in (0, 1), got {}", self.vortex_ratio));
        }
        if self.bank_count == 0 {
            return Err("bank_count must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Precondition,
    Banks,
    IterativeAbsorption,
    InnerDecomposition,
    Absorbers,
    Verification,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Precondition => "precondition",
            Stage::Banks => "banks",
            Stage::IterativeAbsorption => "iterative absorption",
            Stage::InnerDecomposition => "inner decomposition",
            Stage::Absorbers => "absorbers",
            Stage::Verification => "verification",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Exact oracle on the whole target.
    Oracle,
    Pipeline,
}

/// Sizes of the pieces of a pipeline run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub x: Vec<Vertex>,
    pub bank_sampled: Vec<usize>,
    pub bank_kept: Vec<usize>,
    pub dec: usize,
    pub leftover_edges: usize,
    pub ind: usize,
    pub absorbable_leftover_triangles: usize,
    pub abs: usize,
    pub flip: usize,
    pub bank_unused: usize,
}

/// One run of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: Seed,
    pub n: usize,
    pub depth: usize,
    pub route: Route,
    pub params: PipelineParams,
    pub e_ia: Option<bool>,
    pub e_ind: Option<bool>,
    pub e_abs: Option<bool>,
    pub failure_stage: Option<Stage>,
    pub failure: Option<String>,
    pub warnings: Vec<String>,
    pub counts: StageCounts,
    pub levels: Vec<LevelStats>,
    pub inner: Option<Box<TrialRecord>>,
    /// Stage wall-clock times in milliseconds; not reproducible, so writers may drop them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
    pub decomposition: Option<TripleSet>,
}

impl TrialRecord {
    fn new(seed: &Seed, n: usize, depth: usize, params: &PipelineParams) -> Self {
        TrialRecord {
            seed: seed.clone(),
            n,
            depth,
            route: Route::Pipeline,
            params: params.clone(),
            e_ia: None,
            e_ind: None,
            e_abs: None,
            failure_stage: None,
            failure: None,
            warnings: Vec::new(),
            counts: StageCounts::default(),
            levels: Vec::new(),
            inner: None,
            timings: Some(BTreeMap::new()),
            decomposition: None,
        }
    }

    pub fn success(&self) -> bool {
        self.decomposition.is_some()
    }

    fn fail(mut self, stage: Stage, msg: impl Into<String>) -> Self {
        self.failure_stage = Some(stage);
        self.failure = Some(msg.into());
        self
    }

    fn time(&mut self, stage: &str, since: Instant) {
        if let Some(t) = self.timings.as_mut() {
            t.insert(stage.to_string(), since.elapsed().as_secs_f64() * 1e3);
        }
    }

    pub fn without_timings(mut self) -> Self {
        self.timings = None;
        if let Some(inner) = self.inner.take() {
            self.inner = Some(Box::new(inner.without_timings()));
        }
        self
    }
}

/// Part structure for the tripartite variant: vertex `v` lies in part `parts[v]`.
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    pub parts: Vec<u8>,
    pub part_size: usize,
}

/// The construction with the exact oracle for the inner decomposition.
pub fn construct(g: &DenseGraph, params: &PipelineParams, seed: &Seed) -> TrialRecord {
    construct_recursive(g, params, 1, seed)
}

/// Depth 0 is the oracle on sampled triples; depth `d` runs the construction
/// and decomposes the leftover inside `X` at depth `d − 1`, bottoming out at
/// the oracle once `|X| ≤ base_case_n`.
pub fn construct_recursive(g: &DenseGraph, params: &PipelineParams, depth: usize, seed: &Seed) -> TrialRecord {
    construct_in(g, params, depth, &TriplePool::All, seed)
}

/// As [`construct_recursive`], using only triples of `ambient`.
pub fn construct_in(
    g: &DenseGraph,
    params: &PipelineParams,
    depth: usize,
    ambient: &TriplePool,
    seed: &Seed,
) -> TrialRecord {
    let rec = TrialRecord::new(seed, g.n(), depth, params);
    if let Err(e) = params.validate() {
        return rec.fail(Stage::Precondition, e);
    }
    if !is_triangle_divisible(g) {
        return rec.fail(Stage::Precondition, "target graph is not triangle-divisible");
    }
    let active = VertexSet::from_iter_in(g.n(), (0..g.n() as Vertex).filter(|&v| g.degree(v) > 0));
    let bound = params
        .max_complement_degree
        .unwrap_or_else(|| (g.n() as f64 / (g.n().max(2) as f64).ln()).ceil() as usize);
    let cd = complement_max_degree(g, Some(&active));
    if cd > bound {
        return rec.fail(
            Stage::Precondition,
            format!("complement max degree {cd} exceeds bound {bound}"),
        );
    }
    run(g, &active, None, params, depth, ambient, seed, true)
}

/// Tripartite entry point: `parts[v]` is the part of `v`, each part has
/// `part_size` vertices, and divisibility has been checked by the caller.
pub(crate) fn construct_parts(
    g: &DenseGraph,
    parts: Vec<u8>,
    part_size: usize,
    params: &PipelineParams,
    depth: usize,
    ambient: &TriplePool,
    seed: &Seed,
) -> TrialRecord {
    let rec = TrialRecord::new(seed, g.n(), depth, params);
    if let Err(e) = params.validate() {
        return rec.fail(Stage::Precondition, e);
    }
    let active = VertexSet::from_iter_in(g.n(), (0..g.n() as Vertex).filter(|&v| g.degree(v) > 0));
    let geom = Geometry { parts, part_size };
    run(g, &active, Some(&geom), params, depth, ambient, seed, true)
}

pub(crate) fn precondition_failure(seed: &Seed, n: usize, depth: usize, params: &PipelineParams, msg: &str) -> TrialRecord {
    TrialRecord::new(seed, n, depth, params).fail(Stage::Precondition, msg)
}

fn oracle_route(
    g: &DenseGraph,
    params: &PipelineParams,
    ambient: &TriplePool,
    seed: &Seed,
    top: bool,
    mut rec: TrialRecord,
) -> TrialRecord {
    rec.route = Route::Oracle;
    let t0 = Instant::now();
    let sampled = if top {
        TriplePool::binomial(params.inner_density, seed.child(7))
    } else {
        TriplePool::All
    };
    let cands = triangles_of(g, None).filter(|t| ambient.contains(t) && sampled.contains(t));
    let found = oracle::solve(g, &cands);
    rec.time("oracle", t0);
    rec.e_ind = Some(found.is_some());
    match found {
        Some(d) => {
            rec.decomposition = Some(d.into_triples());
            rec
        }
        None => rec.fail(Stage::InnerDecomposition, "no decomposition within the sampled triples"),
    }
}

fn pick_in(pool: &[Vertex], k: usize, rng: &mut impl rand::Rng) -> Vec<Vertex> {
    let mut v = pool.to_vec();
    v.shuffle(rng);
    v.truncate(k);
    v
}

/// Per-part (or whole) random subset of `from` with `k` vertices in total.
fn choose(from: &VertexSet, k: usize, geom: Option<&Geometry>, rng: &mut impl rand::Rng) -> VertexSet {
    let n = from.universe();
    match geom {
        None => VertexSet::from_iter_in(n, pick_in(&from.to_vec(), k, rng)),
        Some(geo) => {
            let mut out = VertexSet::new(n);
            for p in 0..3u8 {
                let part: Vec<Vertex> = from.iter().filter(|&v| geo.parts[v as usize] == p).collect();
                for v in pick_in(&part, k / 3, rng) {
                    out.insert(v);
                }
            }
            out
        }
    }
}

/// Disjoint random subsets of `from`, each of size `k` (balanced across parts when tripartite).
fn disjoint_chunks(
    from: &VertexSet,
    count: usize,
    k: usize,
    geom: Option<&Geometry>,
    rng: &mut impl rand::Rng,
) -> Option<Vec<VertexSet>> {
    let n = from.universe();
    match geom {
        None => {
            let mut v = from.to_vec();
            if count * k > v.len() {
                return None;
            }
            v.shuffle(rng);
            Some(v.chunks(k.max(1)).take(count).map(|c| VertexSet::from_iter_in(n, c.iter().copied())).collect())
        }
        Some(geo) => {
            let per = k / 3;
            let mut out = vec![VertexSet::new(n); count];
            for p in 0..3u8 {
                let mut part: Vec<Vertex> = from.iter().filter(|&v| geo.parts[v as usize] == p).collect();
                if count * per > part.len() {
                    return None;
                }
                part.shuffle(rng);
                for (i, c) in part.chunks(per.max(1)).take(count).enumerate() {
                    for &v in c {
                        out[i].insert(v);
                    }
                }
            }
            Some(out)
        }
    }
}

/// Random absorbers rooted at the triangles of `g[xi]`, completions inside `g`
/// and `ambient`, pairwise edge-disjoint. Returns the union of the completions
/// and the roots that received one.
#[allow(clippy::too_many_arguments)]
fn plant_absorbers(
    g: &DenseGraph,
    xi: &VertexSet,
    yi: &VertexSet,
    m: usize,
    parts: Option<&[u8]>,
    ambient: &TriplePool,
    seed: &Seed,
    tries: usize,
    cap: usize,
) -> (TripleSet, Vec<Triple>) {
    let mut rng = seed.rng();
    let mut roots = triangles_of(g, Some(xi)).to_vec();
    roots.shuffle(&mut rng);
    let ys = yi.to_vec();
    let of_part = |p: Option<u8>| -> Vec<Vertex> {
        match (parts, p) {
            (Some(pt), Some(p)) => ys.iter().copied().filter(|&v| pt[v as usize] == p).collect(),
            _ => ys.clone(),
        }
    };
    let part = |v: Vertex| parts.map(|pt| pt[v as usize]);
    let mut used = DenseGraph::empty(g.n());
    let mut out = TripleSet::new(g.n());
    let mut placed = Vec::new();
    for root in roots {
        if placed.len() == cap {
            break;
        }
        let [u, v, w] = root.vertices();
        for _ in 0..tries {
            let mut r = [u, v, w];
            r.shuffle(&mut rng);
            let (a, c0, c1) = (r[0], r[1], r[2]);
            let (Some(&b), evens, odds) = (of_part(part(a)).choose(&mut rng), of_part(part(c0)), of_part(part(c1))) else {
                break;
            };
            let mut cycle = vec![c0, c1];
            let mut ok = true;
            for j in 2..2 * m {
                let pool = if j % 2 == 0 { &evens } else { &odds };
                let free: Vec<Vertex> = pool.iter().copied().filter(|x| *x != b && !cycle.contains(x)).collect();
                match free.choose(&mut rng) {
                    Some(&x) => cycle.push(x),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                break;
            }
            let Ok(f) = Absorber::from_parts(m, a, b, cycle) else {
                continue;
            };
            let comp = f.completion();
            let fits = comp.iter().all(|t| {
                g.has_triangle(t) && ambient.contains(t) && t.edges().iter().all(|e| !used.has_edge(e.0, e.1))
            });
            if fits {
                for t in comp {
                    for e in t.edges() {
                        used.add_edge(e.0, e.1);
                    }
                    out.insert(t);
                }
                placed.push(root);
                break;
            }
        }
    }
    (out, placed)
}

fn greedy_pack(cands: &TripleSet, seed: &Seed) -> TripleSet {
    let mut order = cands.to_vec();
    order.shuffle(&mut seed.rng());
    let mut used = DenseGraph::empty(cands.n());
    let mut out = TripleSet::new(cands.n());
    for t in order {
        if t.edges().iter().all(|e| !used.has_edge(e.0, e.1)) {
            for e in t.edges() {
                used.add_edge(e.0, e.1);
            }
            out.insert(t);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run(
    g: &DenseGraph,
    universe: &VertexSet,
    geom: Option<&Geometry>,
    params: &PipelineParams,
    depth: usize,
    ambient: &TriplePool,
    seed: &Seed,
    top: bool,
) -> TrialRecord {
    let mut rec = TrialRecord::new(seed, g.n(), depth, params);
    if depth == 0 || universe.len() <= params.base_case_n {
        return oracle_route(g, params, ambient, seed, top, rec);
    }
    let n = g.n();
    let mut rng = seed.child(0).rng();

    // banks
    let t0 = Instant::now();
    let x_size = match (params.x_size, geom) {
        (Some(k), _) => k,
        (None, None) => ((0.43 * universe.len() as f64).round() as usize).max(3),
        (None, Some(geo)) => 3 * ((0.43 * geo.part_size as f64).round() as usize).max(1),
    };
    if x_size >= universe.len() {
        return rec.fail(Stage::Precondition, format!("|X| = {x_size} leaves no vertex outside X"));
    }
    let x = choose(universe, x_size, geom, &mut rng);
    rec.counts.x = x.to_vec();
    let rest = universe.difference(&x);
    let l1 = params.bank_count;
    let l2 = params.bank_outer_size.unwrap_or(match geom {
        None => rest.len() / l1,
        Some(_) => 3 * (rest.len() / 3 / l1),
    });
    let xi_size = params.bank_inner_size.unwrap_or(x.len()).min(x.len());
    let coverage = params.bank_coverage.unwrap_or((l1 / 4).max(1));
    let x_triangles = triangles_of(g, Some(&x)).to_vec();
    let mut layout = None;
    for _ in 0..params.bank_retries.max(1) {
        let Some(ys) = disjoint_chunks(&rest, l1, l2, geom, &mut rng) else {
            return rec.fail(
                Stage::Precondition,
                format!("{l1} banks of {l2} outside vertices do not fit in {}", rest.len()),
            );
        };
        let xs: Vec<VertexSet> = (0..l1).map(|_| choose(&x, xi_size, geom, &mut rng)).collect();
        let covered = x_triangles
            .iter()
            .all(|t| xs.iter().filter(|xi| t.is_within(xi)).count() >= coverage);
        if covered {
            layout = Some((xs, ys));
            break;
        }
    }
    let Some((xs, ys)) = layout else {
        return rec.fail(Stage::Banks, format!("no bank layout covers every triangle of G[X] {coverage} times"));
    };
    let mut banks: Vec<(usize, TripleSet)> = Vec::with_capacity(l1);
    let mut planted = TripleSet::new(n);
    for i in 0..l1 {
        let vi = xs[i].union(&ys[i]);
        let gi = g.induced(&vi);
        let density = params.bank_triple_density.unwrap_or(1.0 / vi.len().max(1) as f64);
        let bank_seed = seed.child(1).child(i as u64);
        let (h_prime, h) = match params.bank_packing {
            BankPacking::Planted => {
                let (h, roots) = plant_absorbers(
                    &gi,
                    &xs[i],
                    &ys[i],
                    params.absorber_m,
                    geom.map(|geo| geo.parts.as_slice()),
                    ambient,
                    &bank_seed,
                    params.bank_retries.max(1) * 5,
                    params.bank_absorbers.unwrap_or(usize::MAX),
                );
                planted.extend(roots);
                (h.clone(), h)
            }
            packing => {
                let pair = sample_linear(&gi, &xs[i], density, &bank_seed);
                let h_prime = pair.h_prime.filter(|t| ambient.contains(t));
                let h = match packing {
                    BankPacking::Greedy => greedy_pack(&h_prime, &bank_seed.child(1)),
                    _ => isolated_triangles(&h_prime),
                };
                (h_prime, h)
            }
        };
        rec.counts.bank_sampled.push(h_prime.len());
        rec.counts.bank_kept.push(h.len());
        banks.push((i, h));
    }
    let mut g_prime = g.clone();
    for (_, h) in &banks {
        for t in h.iter() {
            g_prime.remove_triangle(t);
        }
    }
    rec.time("banks", t0);

    // iterative absorption
    let t0 = Instant::now();
    let vortex = match geom {
        None => build_vortex_in(universe, &x, params.vortex_ratio, &seed.child(2)),
        Some(geo) => build_balanced_vortex(geo.part_size, &x, params.vortex_ratio, &seed.child(2)),
    };
    let vortex = match vortex {
        Ok(v) => v,
        Err(e) => return rec.fail(Stage::Precondition, e.to_string()),
    };
    let ia_pool = ambient.clone().and(TriplePool::binomial(params.ia_density, seed.child(3)));
    let rand_pool = ambient.clone().and(TriplePool::binomial(params.inner_density, seed.child(5)));
    let m = params.absorber_m;
    let absorbable = |t: &Triple| banks.iter().any(|(_, h)| !rooted_absorbers(h, *t, m, &x).is_empty());
    // planted roots have edge-disjoint absorbers; other absorbable roots may not
    let terminal = params.absorbable_terminal.then(|| match params.bank_packing {
        BankPacking::Planted => planted.filter(|t| rand_pool.contains(t)),
        _ => triangles_of(g, Some(&x)).filter(|t| rand_pool.contains(t) && absorbable(t)),
    });
    let ctx = LevelContext {
        pool: &ia_pool,
        parts: geom.map(|geo| geo.parts.as_slice()),
        terminal: terminal.as_ref(),
    };
    let ia = cover_outside(&g_prime, &vortex, &params.level, ctx, &seed.child(4));
    rec.time("iterative_absorption", t0);
    let (h_dec, leftover) = match ia {
        Ok(r) => {
            rec.levels = r.levels;
            (r.covered, r.leftover)
        }
        Err(e) => {
            rec.levels = e.levels.clone();
            rec.e_ia = Some(false);
            return rec.fail(Stage::IterativeAbsorption, e.to_string());
        }
    };
    rec.e_ia = Some(true);
    rec.counts.dec = h_dec.len();
    rec.counts.leftover_edges = leftover.edge_count();

    // inner decomposition
    let t0 = Instant::now();
    let cands = triangles_of(&leftover, None).filter(|t| {
        rand_pool.contains(t) && (!params.ind_absorbable_only || absorbable(t))
    });
    rec.counts.absorbable_leftover_triangles = triangles_of(&leftover, None).iter().filter(|t| absorbable(t)).count();
    let recurse = depth > 1 && x.len() > params.base_case_n;
    let inner_options: Vec<TripleSet> = if recurse {
        let inner = run(
            &leftover,
            &x,
            geom,
            params,
            depth - 1,
            &TriplePool::Set(cands.clone()),
            &seed.child(6),
            false,
        );
        let found = inner.decomposition.clone();
        rec.inner = Some(Box::new(inner));
        found.into_iter().collect()
    } else {
        oracle::enumerate_all(&leftover, &cands, params.ind_attempts.max(1))
            .into_iter()
            .map(Decomposition::into_triples)
            .collect()
    };
    rec.time("inner_decomposition", t0);
    if inner_options.is_empty() {
        rec.e_ind = Some(false);
        return rec.fail(Stage::InnerDecomposition, "leftover inside X has no decomposition in the inner sample");
    }
    rec.e_ind = Some(true);

    // absorbers
    let t0 = Instant::now();
    let mut last_err = String::new();
    let mut chosen = None;
    for (k, h_ind) in inner_options.iter().enumerate() {
        match select_disjoint_absorbers(h_ind, &banks, m, &x, &seed.child(8).child(k as u64), params.absorber_restarts) {
            Ok(a) => {
                chosen = Some((h_ind, a));
                break;
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    rec.time("absorbers", t0);
    let Some((h_ind, assignment)) = chosen else {
        rec.counts.ind = inner_options[0].len();
        rec.e_abs = Some(false);
        return rec.fail(Stage::Absorbers, last_err);
    };
    rec.e_abs = Some(true);
    rec.counts.ind = h_ind.len();

    // exchange
    let h_abs = assignment.absorbed(n);
    let h_flip = assignment.flips(n);
    let mut all_banks = TripleSet::new(n);
    for (_, h) in &banks {
        all_banks.extend(h.iter().copied());
    }
    let unused = all_banks.difference(&h_abs);
    rec.counts.abs = h_abs.len();
    rec.counts.flip = h_flip.len();
    rec.counts.bank_unused = unused.len();
    let mut out = h_dec;
    out.extend(h_flip.iter().copied());
    out.extend(unused.iter().copied());
    if h_flip.iter().any(|t| t.is_within(&x)) || !out.is_disjoint(h_ind) {
        return rec.fail(Stage::Verification, "flip accounting violated");
    }
    match Decomposition::new(g.clone(), out) {
        Ok(d) => {
            rec.decomposition = Some(d.into_triples());
            rec
        }
        Err(report) => rec.fail(
            Stage::Verification,
            report.description().unwrap_or_else(|| "invalid decomposition".into()),
        ),
    }
}
