//! Exact planar transportation between weighted point sets.
//!
//! Small supply sides (`r² ≤ n`) go through excess scaling with contracted
//! arcs, star partitioning of degree-one `B` nodes, and BCP-driven searches
//! (see [`excess`]). Otherwise a dense successive-shortest-path solver is
//! used (see [`dense`]).

pub mod dense;
pub mod excess;

use serde::{Deserialize, Serialize};

use crate::error::{GpmError, Result};
use crate::geometry::{cost, exact_sum, validate_set, CostParams, Point};

pub use excess::ExcessScaling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportMethod {
    /// Excess scaling when `r² ≤ n`, dense otherwise.
    Auto,
    ExcessScaling,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    /// Activity threshold `α = num / den`, strictly between 1/2 and 1.
    pub alpha: (i64, i64),
    pub method: TransportMethod,
    /// Run the acyclicity and contraction scans after every push.
    pub check_invariants: bool,
    /// Split stars into heavy and light; with `false` every star is pooled.
    pub classify_stars: bool,
    /// Record the sequence of relaxed arcs.
    pub trace: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            alpha: (2, 3),
            method: TransportMethod::Auto,
            check_invariants: false,
            classify_stars: true,
            trace: false,
        }
    }
}

impl TransportConfig {
    fn validate(&self) -> Result<()> {
        let (num, den) = self.alpha;
        if !(den > 0 && 2 * num > den && num < den) {
            return Err(GpmError::Config(format!(
                "alpha {num}/{den} must lie strictly between 1/2 and 1"
            )));
        }
        Ok(())
    }
}

/// Nonzero flows `(a_id, b_id, amount)` sorted by ids, and their cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub flows: Vec<(u32, u32, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn from_flows(mut flows: Vec<(u32, u32, f64)>, a: &[Point], b: &[Point], params: CostParams) -> Self {
        flows.retain(|f| f.2 != 0.0);
        flows.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let cost = exact_sum(flows.iter().map(|&(i, j, f)| f * cost(&a[i as usize], &b[j as usize], params)));
        TransportPlan { flows, cost }
    }

    /// Largest violation of a row or column sum.
    pub fn marginal_error(&self, supply: &[i64], demand: &[i64]) -> f64 {
        let mut row: Vec<f64> = supply.iter().map(|&s| -(s as f64)).collect();
        let mut col: Vec<f64> = demand.iter().map(|&d| -(d as f64)).collect();
        for &(i, j, f) in &self.flows {
            row[i as usize] += f;
            col[j as usize] += f;
        }
        row.iter().chain(&col).fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransportStats {
    pub method: String,
    /// Whether `A` and `B` were exchanged so that the supply side is smaller.
    pub swapped: bool,
    pub scales: usize,
    pub augmentations: usize,
    pub relaxations: usize,
    pub max_relaxations: usize,
    pub contractions: usize,
    pub delta_resets: usize,
    pub reclassifications: usize,
    /// Star updates between consecutive reclassifications of the same node.
    pub reclass_gaps: Vec<usize>,
    pub max_heavy: usize,
    pub max_support: usize,
    /// Largest number of alive `B` nodes outside stars.
    pub max_alive_nonstar: usize,
    pub acyclicity_checks: usize,
    pub contraction_scans: usize,
    pub bcp_ops: u64,
    /// `(a, b)` slice indices of relaxed arcs, when tracing.
    pub trace: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSolution {
    pub plan: TransportPlan,
    pub stats: TransportStats,
}

/// Checks sizes, signs and balance of a supply/demand instance.
pub fn validate_instance(a: &[Point], b: &[Point], supply: &[i64], demand: &[i64]) -> Result<()> {
    validate_set(a)?;
    validate_set(b)?;
    if supply.len() != a.len() || demand.len() != b.len() {
        return Err(GpmError::BadIds(format!(
            "{} supplies for {} points and {} demands for {} points",
            supply.len(),
            a.len(),
            demand.len(),
            b.len()
        )));
    }
    for (i, &s) in supply.iter().enumerate() {
        if s < 0 {
            return Err(GpmError::BadSupply {
                id: i as u32,
                msg: format!("supply {s} is negative"),
            });
        }
    }
    for (j, &d) in demand.iter().enumerate() {
        if d < 0 {
            return Err(GpmError::BadSupply {
                id: j as u32,
                msg: format!("demand {d} is negative"),
            });
        }
    }
    let total_s: i64 = supply.iter().sum();
    let total_d: i64 = demand.iter().sum();
    if total_s != total_d {
        return Err(GpmError::Unbalanced {
            supply: total_s,
            demand: total_d,
        });
    }
    if total_s > 1 << 40 {
        return Err(GpmError::BadSupply {
            id: 0,
            msg: format!("total supply {total_s} exceeds 2^40"),
        });
    }
    Ok(())
}

/// Optimal transportation from `A` (supplies) to `B` (demands, given as
/// nonnegative amounts).
pub fn solve_transport(
    a: &[Point],
    b: &[Point],
    supply: &[i64],
    demand: &[i64],
    params: CostParams,
) -> Result<TransportSolution> {
    solve_transport_with(a, b, supply, demand, params, TransportConfig::default())
}

pub fn solve_transport_with(
    a: &[Point],
    b: &[Point],
    supply: &[i64],
    demand: &[i64],
    params: CostParams,
    config: TransportConfig,
) -> Result<TransportSolution> {
    config.validate()?;
    validate_instance(a, b, supply, demand)?;
    if a.len() > b.len() {
        let mut sol = solve_transport_with(b, a, demand, supply, params, config)?;
        let flows = sol.plan.flows.iter().map(|&(j, i, f)| (i, j, f)).collect();
        sol.plan = TransportPlan::from_flows(flows, a, b, params);
        sol.stats.swapped = true;
        return Ok(sol);
    }
    let (r, n) = (a.len(), b.len());
    let method = match config.method {
        TransportMethod::Auto if r * r <= n => TransportMethod::ExcessScaling,
        TransportMethod::Auto => TransportMethod::Dense,
        m => m,
    };
    match method {
        TransportMethod::Dense => dense::solve(a, b, supply, demand, params),
        _ => ExcessScaling::new(a, b, supply, demand, params, config)?.run(),
    }
}
