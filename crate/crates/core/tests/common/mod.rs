#![allow(dead_code)]

use gpm_core::{CostParams, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, span: f64) -> Vec<Point> {
    (0..n)
        .map(|i| Point::new(rng.gen::<f64>() * span, rng.gen::<f64>() * span, i as u32))
        .collect()
}

/// Points on a coarse lattice so that duplicates and cost ties are common.
pub fn lattice_points(rng: &mut ChaCha8Rng, n: usize, side: i32) -> Vec<Point> {
    (0..n)
        .map(|i| {
            Point::new(
                rng.gen_range(0..side) as f64,
                rng.gen_range(0..side) as f64,
                i as u32,
            )
        })
        .collect()
}

pub fn all_params() -> Vec<CostParams> {
    let mut out = Vec::new();
    for p in [1, 2, 8] {
        for q in [1, 2, 3] {
            out.push(CostParams::new(p, q).unwrap());
        }
    }
    out
}

pub fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(1e-300)
}

/// Full scan: `c_π ≥ 0` on every edge and `c_π = 0` on matched edges,
/// with exact float comparisons.
pub fn certificate_violations(
    a: &[Point],
    b: &[Point],
    params: CostParams,
    pairs: &[(u32, u32)],
    pa: &[f64],
    pb: &[f64],
) -> usize {
    let mut bad = 0;
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let rc = (gpm_core::cost(x, y, params) - pa[i]) + pb[j];
            let matched = pairs.contains(&(x.id, y.id));
            if rc < 0.0 || (matched && rc != 0.0) {
                bad += 1;
            }
        }
    }
    bad
}
