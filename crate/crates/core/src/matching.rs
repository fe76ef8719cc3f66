use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{GpmError, Result};
use crate::geometry::{cost, exact_sum, CostParams, Point};

/// A set of vertex-disjoint `(a_id, b_id)` pairs and their total cost.
///
/// Pairs are kept sorted by `a_id`. The cost is the correctly rounded sum of
/// the pair costs, so matchings with equal exact cost report identical floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(u32, u32)>,
    pub cost: f64,
}

impl Matching {
    pub fn empty() -> Self {
        Matching {
            pairs: Vec::new(),
            cost: 0.0,
        }
    }

    pub fn from_pairs(
        mut pairs: Vec<(u32, u32)>,
        a: &[Point],
        b: &[Point],
        params: CostParams,
    ) -> Result<Self> {
        pairs.sort_unstable();
        let mut seen_a = HashSet::new();
        let mut seen_b = HashSet::new();
        for &(x, y) in &pairs {
            if !seen_a.insert(x) {
                return Err(GpmError::DuplicateId { side: "A", id: x });
            }
            if !seen_b.insert(y) {
                return Err(GpmError::DuplicateId { side: "B", id: y });
            }
        }
        let cost = canonical_cost(&pairs, a, b, params)?;
        Ok(Matching { pairs, cost })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Correctly rounded sum of `c(a, b)` over `pairs`.
pub fn canonical_cost(
    pairs: &[(u32, u32)],
    a: &[Point],
    b: &[Point],
    params: CostParams,
) -> Result<f64> {
    let a_map: HashMap<u32, &Point> = a.iter().map(|p| (p.id, p)).collect();
    let b_map: HashMap<u32, &Point> = b.iter().map(|p| (p.id, p)).collect();
    let mut costs = Vec::with_capacity(pairs.len());
    for &(x, y) in pairs {
        let pa = a_map.get(&x).ok_or(GpmError::MissingId { side: "A", id: x })?;
        let pb = b_map.get(&y).ok_or(GpmError::MissingId { side: "B", id: y })?;
        costs.push(cost(pa, pb, params));
    }
    Ok(exact_sum(costs))
}
