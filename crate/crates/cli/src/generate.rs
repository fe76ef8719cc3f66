//! Seeded instance generators.

use std::str::FromStr;

use gpm_core::{GpmError, Point, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::format::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Uniform in `[0, 1)²`.
    #[default]
    Uniform,
    /// Gaussian blobs (σ = 0.05) around `⌈√r⌉` uniform centres.
    Clustered,
    /// Regular lattices covering `[0, 1)²`; the seed only affects amounts.
    Grid,
}

impl FromStr for Kind {
    type Err = GpmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Kind::Uniform),
            "clustered" => Ok(Kind::Clustered),
            "grid" => Ok(Kind::Grid),
            other => Err(GpmError::Config(format!("unknown instance kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Uniform => "uniform",
            Kind::Clustered => "clustered",
            Kind::Grid => "grid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub kind: Kind,
    pub r: usize,
    pub n: usize,
    pub seed: u64,
    /// Transport mode with amounts up to `u`.
    pub u: Option<i64>,
    pub p: u32,
    pub q: u32,
}

/// Deterministic for a fixed spec.
///
/// In transport mode demands are drawn from `1..=u`. Supplies are drawn
/// from `1..=u` and rescaled to roughly the total demand; the last demand
/// then absorbs the rounding difference (supplies are raised round-robin
/// if it would drop below 1).
pub fn generate(spec: &GenSpec) -> Result<Instance> {
    if spec.r == 0 || spec.n == 0 {
        return Err(GpmError::Config("r and n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (a, b) = match spec.kind {
        Kind::Uniform => (uniform(&mut rng, spec.r), uniform(&mut rng, spec.n)),
        Kind::Clustered => {
            let k = (spec.r as f64).sqrt().ceil() as usize;
            let centres: Vec<(f64, f64)> = (0..k).map(|_| (rng.gen(), rng.gen())).collect();
            (
                clustered(&mut rng, &centres, spec.r),
                clustered(&mut rng, &centres, spec.n),
            )
        }
        Kind::Grid => (grid(spec.r, 0.0), grid(spec.n, 0.5)),
    };
    let (supply, demand) = match spec.u {
        None => (None, None),
        Some(u) if u < 1 => return Err(GpmError::Config(format!("U = {u} must be at least 1"))),
        Some(u) => {
            let (s, d) = amounts(&mut rng, spec.r, spec.n, u);
            (Some(s), Some(d))
        }
    };
    let inst = Instance {
        p: spec.p,
        q: spec.q,
        a,
        b,
        supply,
        demand,
    };
    inst.validate()?;
    Ok(inst)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| Point::new(rng.gen(), rng.gen(), i as u32))
        .collect()
}

fn clustered(rng: &mut ChaCha8Rng, centres: &[(f64, f64)], n: usize) -> Vec<Point> {
    let noise = Normal::new(0.0, 0.05).expect("valid deviation");
    (0..n)
        .map(|i| {
            let (cx, cy) = centres[rng.gen_range(0..centres.len())];
            Point::new(cx + noise.sample(rng), cy + noise.sample(rng), i as u32)
        })
        .collect()
}

// Row-major lattice of the smallest square side holding n points, shifted
// by `offset` cells.
fn grid(n: usize, offset: f64) -> Vec<Point> {
    let side = (n as f64).sqrt().ceil().max(1.0) as usize;
    let h = 1.0 / side as f64;
    (0..n)
        .map(|i| {
            let (col, row) = (i % side, i / side);
            Point::new((col as f64 + offset) * h, (row as f64 + offset) * h, i as u32)
        })
        .collect()
}

fn amounts(rng: &mut ChaCha8Rng, r: usize, n: usize, u: i64) -> (Vec<i64>, Vec<i64>) {
    let mut demand: Vec<i64> = (0..n).map(|_| rng.gen_range(1..=u)).collect();
    let total: i64 = demand.iter().sum();
    let raw: Vec<i64> = (0..r).map(|_| rng.gen_range(1..=u)).collect();
    let raw_total: i64 = raw.iter().sum();
    let mut supply: Vec<i64> = raw
        .iter()
        .map(|&s| ((s as i128 * total as i128 + raw_total as i128 / 2) / raw_total as i128).max(1) as i64)
        .collect();
    let others: i64 = demand[..n - 1].iter().sum();
    let short = 1 - (supply.iter().sum::<i64>() - others);
    for i in 0..short.max(0) as usize {
        supply[i % r] += 1;
    }
    demand[n - 1] = supply.iter().sum::<i64>() - others;
    (supply, demand)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_stay_in_the_unit_square() {
        for n in [1, 2, 7, 100] {
            for p in grid(n, 0.5) {
                assert!((0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y));
            }
        }
    }
}
