//! Command-line front end: construct, sweep, spread, verify and oracle runs.
//!
//! Every trial seed is derived from the master seed and the trial index, so
//! outputs do not depend on the worker count.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::graph::{parse_triple_list, verify_decomposition, verify_triples, DenseGraph, TripleSet};
use crate::latin::{complete_tripartite, construct_latin_in, latin_threshold_sweep, LatinError, LatinSquare};
use crate::oracle;
use crate::pipeline::{
    construct_in, estimate_spread, sweep_csv, threshold_sweep, DecompositionSampler, PipelineParams,
    PipelineSampler, PointMass, SweepMethod, UniformOver,
};
use crate::sampling::{sample_latin_support, Seed, TriplePool};

#[derive(Debug, Parser)]
#[command(name = "triple-spread", version, about = "Steiner triple systems and Latin squares in random triple sets")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "TRIPLE_SPREAD_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build one decomposition and write it with its trial record.
    Construct(ConstructArgs),
    /// Success frequency over a grid of densities, as CSV.
    Sweep(SweepArgs),
    /// Empirical spread of a decomposition distribution, as JSON.
    Spread(SpreadArgs),
    /// Check a decomposition or Latin square file.
    Verify(VerifyArgs),
    /// Count decompositions of K_n inside one random triple set.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Steiner triple systems (decompositions of K_n).
    Sts,
    /// Latin squares (decompositions of K_{n,n,n}).
    Latin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    Pipeline,
}

impl From<Method> for SweepMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Oracle => SweepMethod::Oracle,
            Method::Pipeline => SweepMethod::Pipeline,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ConstructArgs {
    #[arg(long)]
    pub n: usize,
    /// Triple density of the random host; 1 means every triple is available.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value = "pipeline")]
    pub method: Method,
    #[arg(long, value_enum, default_value = "sts")]
    pub target: Target,
    /// Recursion depth of the pipeline.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file with pipeline parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: usize,
    /// Comma-separated densities, or `start:stop:count`.
    #[arg(long)]
    pub p_grid: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_enum, default_value = "oracle")]
    pub method: Method,
    #[arg(long, value_enum, default_value = "sts")]
    pub target: Target,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform over all Steiner triple systems on `n` points (small `n`).
    Uniform,
    /// The first system found by the oracle, with probability one.
    Point,
    /// The output of the pipeline on K_n.
    Pipeline,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpreadArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    pub method: Distribution,
    /// Pairs of triples examined for the two-set bound.
    #[arg(long, default_value_t = 2000)]
    pub pair_sample: usize,
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value = "sts")]
    pub target: Target,
    /// Target graph file (`n=` header, one edge per line); K_n when absent.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop counting here.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: u64,
}

/// Everything needed to repeat a run; written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Construct {
        args: ConstructArgs,
        params: PipelineParams,
    },
    Sweep {
        args: SweepArgs,
        params: PipelineParams,
    },
    Spread {
        args: SpreadArgs,
        params: PipelineParams,
    },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn usage(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

fn load_params(path: Option<&Path>, target: Target) -> Result<PipelineParams, String> {
    let Some(path) = path else {
        return Ok(match target {
            Target::Sts => PipelineParams::calibrated_k21(),
            Target::Latin => PipelineParams::calibrated_latin(),
        });
    };
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let p: PipelineParams = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    p.validate()?;
    Ok(p)
}

/// `0,0.5,1` or `0:1:11` (inclusive, evenly spaced).
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("bad density grid {s:?}");
    if let [a, b, k] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        let k: usize = k.trim().parse().map_err(|_| bad())?;
        return match k {
            0 => Err(bad()),
            1 => Ok(vec![a]),
            _ => Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()),
        };
    }
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect()
}

fn write_out(path: &Path, text: &str) -> Result<(), String> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Writes `text` to `out` (and the run config beside it), or to stdout.
fn emit(out: Option<&Path>, text: &str, config: &RunConfig) -> Result<(), String> {
    match out {
        Some(p) => {
            write_out(p, text)?;
            write_out(&p.with_extension("config.json"), &to_json(config))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return usage("--workers must be positive");
        }
        builder = builder.num_threads(w);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => return usage(e),
    };
    pool.install(|| match cli.command {
        Command::Construct(a) => cmd_construct(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Spread(a) => cmd_spread(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
    })
}

fn check_density(p: f64) -> Result<(), String> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(format!("density {p} outside [0, 1]"))
    }
}

pub fn cmd_construct(args: ConstructArgs) -> i32 {
    if let Err(e) = check_density(args.p) {
        return usage(e);
    }
    let params = match load_params(args.params.as_deref(), args.target) {
        Ok(p) => p,
        Err(e) => return usage(e),
    };
    let seed = Seed::new(args.seed);
    let depth = match args.method {
        Method::Oracle => 0,
        Method::Pipeline => args.depth,
    };
    let (record, text, valid) = match args.target {
        Target::Sts => {
            if args.n % 6 != 1 && args.n % 6 != 3 {
                return usage(format!("n = {} is not 1 or 3 mod 6; K_n has no triangle decomposition", args.n));
            }
            let g = DenseGraph::complete(args.n);
            let ambient = TriplePool::binomial(args.p, seed.clone());
            let rec = construct_in(&g, &params, depth, &ambient, &seed.child(1));
            let out = rec.decomposition.as_ref().map(|d| {
                let ok = verify_decomposition(&g, d).valid && d.iter().all(|t| ambient.contains(t));
                (d.to_text(), ok)
            });
            (rec, out.as_ref().map(|o| o.0.clone()), out.is_some_and(|o| o.1))
        }
        Target::Latin => {
            if args.n == 0 {
                return usage("n must be positive");
            }
            let g = complete_tripartite(args.n);
            let support = sample_latin_support(args.n, args.p, &seed);
            let ambient = TriplePool::Set(support.to_triples());
            let rec = construct_latin_in(&g, &params, depth, &ambient, &seed.child(1));
            let out = rec.decomposition.as_ref().map(|d| {
                let sq = LatinSquare::from_decomposition(args.n, d);
                let ok = verify_decomposition(g.graph(), d).valid
                    && sq.as_ref().is_ok_and(|s| s.is_supported_by(&support));
                (sq.map(|s| s.to_text()).unwrap_or_default(), ok)
            });
            (rec, out.as_ref().map(|o| o.0.clone()), out.is_some_and(|o| o.1))
        }
    };
    let record = record.without_timings();
    let config = RunConfig::Construct {
        args: args.clone(),
        params,
    };
    let mut writes = vec![
        (args.out.join("record.json"), to_json(&record)),
        (args.out.join("config.json"), to_json(&config)),
    ];
    if let Some(text) = &text {
        writes.push((args.out.join("decomposition.txt"), text.clone()));
    }
    for (path, body) in &writes {
        if let Err(e) = write_out(path, body) {
            return usage(e);
        }
    }
    match (&record.failure_stage, valid) {
        (None, true) => {
            println!("ok: {} triples", record.decomposition.as_ref().map_or(0, TripleSet::len));
            EXIT_OK
        }
        (Some(stage), _) => {
            eprintln!(
                "failed at {stage}: {}",
                record.failure.as_deref().unwrap_or("no detail")
            );
            EXIT_FAILED
        }
        (None, false) => {
            eprintln!("failed at verification: output does not decompose the target inside the host");
            EXIT_FAILED
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn cmd_sweep(args: SweepArgs) -> i32 {
    let grid = match parse_grid(&args.p_grid) {
        Ok(g) => g,
        Err(e) => return usage(e),
    };
    let params = match load_params(args.params.as_deref(), args.target) {
        Ok(p) => p,
        Err(e) => return usage(e),
    };
    let seed = Seed::new(args.seed);
    let rows = match args.target {
        Target::Sts => threshold_sweep(args.n, &grid, args.trials, args.method.into(), &params, &seed),
        Target::Latin => latin_threshold_sweep(args.n, &grid, args.trials, args.method.into(), &params, &seed),
    };
    let rows = match rows {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let config = RunConfig::Sweep {
        args: args.clone(),
        params,
    };
    match emit(args.out.as_deref(), &sweep_csv(&rows), &config) {
        Ok(()) => EXIT_OK,
        Err(e) => usage(e),
    }
}

pub fn cmd_spread(args: SpreadArgs) -> i32 {
    if args.n % 6 != 1 && args.n % 6 != 3 {
        return usage(format!("n = {} is not 1 or 3 mod 6", args.n));
    }
    let params = match load_params(args.params.as_deref(), Target::Sts) {
        Ok(p) => p,
        Err(e) => return usage(e),
    };
    let g = DenseGraph::complete(args.n);
    let sampler: Box<dyn DecompositionSampler> = match args.method {
        Distribution::Uniform => {
            if args.n > 9 {
                return usage("uniform spread enumerates every system; use n <= 9");
            }
            let all = oracle::enumerate_all(&g, &TripleSet::complete(args.n), usize::MAX);
            Box::new(UniformOver(all.into_iter().map(|d| d.into_triples()).collect()))
        }
        Distribution::Point => match oracle::solve(&g, &TripleSet::complete(args.n)) {
            Some(d) => Box::new(PointMass(d.into_triples())),
            None => return usage("no system found"),
        },
        Distribution::Pipeline => Box::new(PipelineSampler {
            g,
            params: params.clone(),
            depth: args.depth,
        }),
    };
    let report = match estimate_spread(sampler.as_ref(), args.trials, args.pair_sample, &Seed::new(args.seed)) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let config = RunConfig::Spread {
        args: args.clone(),
        params,
    };
    match emit(args.out.as_deref(), &to_json(&report), &config) {
        Ok(()) => EXIT_OK,
        Err(e) => usage(e),
    }
}

pub fn cmd_verify(args: VerifyArgs) -> i32 {
    let text = match fs::read_to_string(&args.file) {
        Ok(t) => t,
        Err(e) => return usage(format!("{}: {e}", args.file.display())),
    };
    match args.target {
        Target::Sts => {
            let (n, list) = match parse_triple_list(&text) {
                Ok(x) => x,
                Err(e) => return usage(e),
            };
            let g = match &args.graph {
                None => DenseGraph::complete(n),
                Some(path) => match fs::read_to_string(path).map_err(|e| e.to_string()).and_then(|t| {
                    crate::graph::parse_graph(&t).map_err(|e| e.to_string())
                }) {
                    Ok(g) if g.n() == n => g,
                    Ok(g) => return usage(format!("graph has {} vertices, triples have {n}", g.n())),
                    Err(e) => return usage(e),
                },
            };
            let report = verify_triples(&g, list);
            if report.valid {
                println!("valid");
                EXIT_OK
            } else {
                println!("invalid: {}", report.description().unwrap_or_default());
                EXIT_FAILED
            }
        }
        Target::Latin => match LatinSquare::parse(&text) {
            Ok(_) => {
                println!("valid");
                EXIT_OK
            }
            Err(e @ (LatinError::Parse { .. } | LatinError::Shape { .. })) => usage(e),
            Err(e) => {
                println!("invalid: {e}");
                EXIT_FAILED
            }
        },
    }
}

pub fn cmd_oracle(args: OracleArgs) -> i32 {
    if let Err(e) = check_density(args.p) {
        return usage(e);
    }
    let host = TriplePool::binomial(args.p, Seed::new(args.seed)).materialize(args.n);
    let count = oracle::count(&DenseGraph::complete(args.n), &host, args.cap);
    println!("{count}");
    EXIT_OK
}
