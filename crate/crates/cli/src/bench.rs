//! Benchmark harness: runs a grid of solver configurations on generated
//! instances and emits one CSV row per run.
//!
//! ```toml
//! repetitions = 3
//! seed = 1
//!
//! [[runs]]
//! solver = "match-approx"      # match-exact | match-approx | transport
//! kind = "uniform"
//! sizes = [[1024, 4096]]        # [r, n] pairs
//! k_frac = 0.25                 # or: k = [16, 64]
//! eps = [0.1, 0.01]
//! ```

use std::time::Instant;

use gpm_core::{solve_approx, solve_exact_with, solve_transport, GpmError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::generate::{generate, GenSpec, Kind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    MatchExact,
    MatchApprox,
    Transport,
}

impl Solver {
    fn name(self) -> &'static str {
        match self {
            Solver::MatchExact => "match-exact",
            Solver::MatchApprox => "match-approx",
            Solver::Transport => "transport",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub solver: Solver,
    #[serde(default)]
    pub kind: Kind,
    pub sizes: Vec<(usize, usize)>,
    #[serde(default)]
    pub k: Vec<usize>,
    pub k_frac: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_u")]
    pub u: i64,
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default = "default_q")]
    pub q: u32,
}

fn default_eps() -> Vec<f64> {
    vec![0.1]
}

fn default_u() -> i64 {
    5
}

fn default_p() -> u32 {
    2
}

fn default_q() -> u32 {
    1
}

fn default_reps() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sequential: bool,
    pub runs: Vec<RunSpec>,
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<BenchConfig> {
        toml::from_str(text).map_err(|e| GpmError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub solver: String,
    pub instance: String,
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub eps: f64,
    pub cost: f64,
    pub scales: usize,
    pub iterations: usize,
    pub relaxations: usize,
    pub bcp_ops: u64,
    pub millis: f64,
}

#[derive(Debug, Clone)]
struct Job {
    solver: Solver,
    spec: GenSpec,
    k: usize,
    eps: f64,
}

fn jobs(cfg: &BenchConfig) -> Vec<Job> {
    let mut out = Vec::new();
    for run in &cfg.runs {
        for &(r, n) in &run.sizes {
            let ks: Vec<usize> = match (run.solver, run.k_frac) {
                (Solver::Transport, _) => vec![0],
                (_, Some(f)) => vec![((f * r.min(n) as f64).round() as usize).max(1)],
                (_, None) if run.k.is_empty() => vec![r.min(n)],
                _ => run.k.clone(),
            };
            let epss = match run.solver {
                Solver::MatchApprox => run.eps.clone(),
                _ => vec![0.0],
            };
            for &k in &ks {
                for &eps in &epss {
                    for rep in 0..cfg.repetitions {
                        out.push(Job {
                            solver: run.solver,
                            spec: GenSpec {
                                kind: run.kind,
                                r,
                                n,
                                seed: cfg.seed + rep as u64,
                                u: (run.solver == Solver::Transport).then_some(run.u),
                                p: run.p,
                                q: run.q,
                            },
                            k,
                            eps,
                        });
                    }
                }
            }
        }
    }
    out
}

fn run_job(job: &Job) -> Result<ResultRecord> {
    let inst = generate(&job.spec)?;
    let params = inst.params()?;
    let s = &job.spec;
    let mut rec = ResultRecord {
        solver: job.solver.name().into(),
        instance: format!("{}-r{}-n{}-s{}", s.kind, s.r, s.n, s.seed),
        n: s.n,
        r: s.r,
        k: job.k,
        eps: job.eps,
        cost: 0.0,
        scales: 0,
        iterations: 0,
        relaxations: 0,
        bcp_ops: 0,
        millis: 0.0,
    };
    let start = Instant::now();
    match job.solver {
        Solver::MatchExact => {
            let sol = solve_exact_with(&inst.a, &inst.b, job.k, params, Default::default())?;
            rec.cost = sol.matching.cost;
            rec.iterations = sol.stats.searches;
            rec.relaxations = sol.stats.relaxations;
            rec.bcp_ops = sol.stats.bcp_ops;
        }
        Solver::MatchApprox => {
            let sol = solve_approx(&inst.a, &inst.b, job.k, params, job.eps)?;
            rec.cost = sol.matching.cost;
            rec.scales = sol.stats.scales.len();
            rec.iterations = sol.stats.iterations;
            rec.relaxations = sol.stats.relaxations;
            rec.bcp_ops = sol.stats.bcp_ops;
        }
        Solver::Transport => {
            let supply = inst.supply.as_deref().expect("transport instance");
            let demand = inst.demand.as_deref().expect("transport instance");
            let sol = solve_transport(&inst.a, &inst.b, supply, demand, params)?;
            rec.k = supply.iter().sum::<i64>() as usize;
            rec.cost = sol.plan.cost;
            rec.scales = sol.stats.scales;
            rec.iterations = sol.stats.augmentations;
            rec.relaxations = sol.stats.relaxations;
            rec.bcp_ops = sol.stats.bcp_ops;
        }
    }
    rec.millis = start.elapsed().as_secs_f64() * 1e3;
    Ok(rec)
}

/// All runs of `cfg` in configuration order.
pub fn run(cfg: &BenchConfig) -> Result<Vec<ResultRecord>> {
    let jobs = jobs(cfg);
    if cfg.sequential {
        jobs.iter().map(run_job).collect()
    } else {
        jobs.par_iter().map(run_job).collect()
    }
}

pub fn to_csv(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| GpmError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| GpmError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| GpmError::Io(e.to_string()))
}
