use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use gpm_cli::bench::{self, BenchConfig, ResultRecord};
use gpm_cli::format::{real, Format, Instance, Solution};
use gpm_cli::generate::{generate, GenSpec, Kind};
use gpm_cli::plot;
use gpm_cli::verify::{verify, VerifyOptions};
use gpm_core::hungarian::BcpMode;
use gpm_core::{solve_approx, solve_exact_with, solve_transport, GpmError, Result};

#[derive(Parser)]
#[command(name = "gpm", version, about = "Geometric partial matching and transportation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// L_p norm of the edge cost (overrides the instance header).
    #[arg(long, global = true)]
    p: Option<u32>,
    /// Power applied to the distance (overrides the instance header).
    #[arg(long, global = true)]
    q: Option<u32>,
    /// Output format: text or structured (JSON).
    #[arg(long, global = true, default_value = "text")]
    format: Format,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen {
        #[arg(long, default_value = "uniform")]
        kind: Kind,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit supplies and demands up to U (transport mode).
        #[arg(long)]
        u: Option<i64>,
    },
    /// Minimum-cost matching of size k.
    MatchExact {
        instance: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Matching of size k within a factor (1+eps) of optimal.
    MatchApprox {
        instance: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Optimal transportation plan.
    Transport { instance: PathBuf },
    /// Check a solution file against its instance.
    Verify {
        instance: PathBuf,
        solution: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Accept any cost within (1+eps) of optimal.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Run a benchmark grid described by a TOML file and print CSV.
    Bench { config: PathBuf },
    /// Render an instance and solution as SVG.
    Plot { instance: PathBuf, solution: PathBuf },
}

fn load(path: &Path, cli: &Cli) -> Result<Instance> {
    let mut inst = Instance::load(path)?;
    inst.p = cli.p.unwrap_or(inst.p);
    inst.q = cli.q.unwrap_or(inst.q);
    inst.validate()?;
    Ok(inst)
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn record(rec: &ResultRecord) {
    eprintln!(
        "RESULT solver={} instance={} n={} r={} k={} eps={} cost={} scales={} iterations={} relaxations={} bcp_ops={} millis={:.3}",
        rec.solver,
        rec.instance,
        rec.n,
        rec.r,
        rec.k,
        rec.eps,
        real(rec.cost),
        rec.scales,
        rec.iterations,
        rec.relaxations,
        rec.bcp_ops,
        rec.millis
    );
}

fn base_record(solver: &str, path: &Path, inst: &Instance, k: usize, eps: f64) -> ResultRecord {
    ResultRecord {
        solver: solver.into(),
        instance: path.display().to_string(),
        n: inst.b.len(),
        r: inst.a.len(),
        k,
        eps,
        cost: 0.0,
        scales: 0,
        iterations: 0,
        relaxations: 0,
        bcp_ops: 0,
        millis: 0.0,
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Gen { kind, r, n, seed, u } => {
            let spec = GenSpec {
                kind: *kind,
                r: *r,
                n: *n,
                seed: *seed,
                u: *u,
                p: cli.p.unwrap_or(2),
                q: cli.q.unwrap_or(1),
            };
            emit(cli, &generate(&spec)?.serialize(cli.format))?;
        }
        Command::MatchExact { instance, k } => {
            let inst = load(instance, cli)?;
            let start = Instant::now();
            let sol = solve_exact_with(&inst.a, &inst.b, *k, inst.params()?, BcpMode::Rewind)?;
            let mut rec = base_record("match-exact", instance, &inst, *k, 0.0);
            rec.millis = start.elapsed().as_secs_f64() * 1e3;
            rec.cost = sol.matching.cost;
            rec.iterations = sol.stats.searches;
            rec.relaxations = sol.stats.relaxations;
            rec.bcp_ops = sol.stats.bcp_ops;
            emit(cli, &Solution::from(&sol.matching).serialize(cli.format))?;
            record(&rec);
        }
        Command::MatchApprox { instance, k, eps } => {
            let inst = load(instance, cli)?;
            let start = Instant::now();
            let sol = solve_approx(&inst.a, &inst.b, *k, inst.params()?, *eps)?;
            let mut rec = base_record("match-approx", instance, &inst, *k, *eps);
            rec.millis = start.elapsed().as_secs_f64() * 1e3;
            rec.cost = sol.matching.cost;
            rec.scales = sol.stats.scales.len();
            rec.iterations = sol.stats.iterations;
            rec.relaxations = sol.stats.relaxations;
            rec.bcp_ops = sol.stats.bcp_ops;
            emit(cli, &Solution::from(&sol.matching).serialize(cli.format))?;
            record(&rec);
        }
        Command::Transport { instance } => {
            let inst = load(instance, cli)?;
            let (Some(supply), Some(demand)) = (&inst.supply, &inst.demand) else {
                return Err(GpmError::Config(
                    "transport needs supplies and demands on every record".into(),
                ));
            };
            let start = Instant::now();
            let sol = solve_transport(&inst.a, &inst.b, supply, demand, inst.params()?)?;
            let mut rec = base_record("transport", instance, &inst, supply.iter().sum::<i64>() as usize, 0.0);
            rec.millis = start.elapsed().as_secs_f64() * 1e3;
            rec.cost = sol.plan.cost;
            rec.scales = sol.stats.scales;
            rec.iterations = sol.stats.augmentations;
            rec.relaxations = sol.stats.relaxations;
            rec.bcp_ops = sol.stats.bcp_ops;
            emit(cli, &Solution::from(&sol.plan).serialize(cli.format))?;
            record(&rec);
        }
        Command::Verify {
            instance,
            solution,
            k,
            eps,
        } => {
            let inst = load(instance, cli)?;
            let sol = Solution::load(solution)?;
            let opts = VerifyOptions {
                k: *k,
                eps: *eps,
                ..Default::default()
            };
            let report = verify(&inst, &sol, opts)?;
            emit(cli, &report.render())?;
            return Ok(report.passed());
        }
        Command::Bench { config } => {
            let cfg = BenchConfig::parse(&std::fs::read_to_string(config)?)?;
            let records = bench::run(&cfg)?;
            emit(cli, &bench::to_csv(&records)?)?;
        }
        Command::Plot { instance, solution } => {
            let inst = load(instance, cli)?;
            let sol = Solution::load(solution)?;
            emit(cli, &plot::render(&inst, &sol))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                GpmError::InfeasibleK { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
