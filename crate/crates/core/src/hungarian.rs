//! Exact minimum-cost partial matching.
//!
//! Each Hungarian search grows the reachable set `X` from the unmatched
//! `A`-nodes, relaxing the frontier edge of minimum reduced cost found by a
//! weighted BCP query between `A ∩ X` and `B \ X`. Potentials of `X` are
//! raised lazily through a single offset `δ`, and the BCP is rewound to its
//! pre-search contents afterwards so that only the handful of nodes whose
//! stored potential changed need to be updated.

use serde::{Deserialize, Serialize};

use crate::bcp::{BcpStructure, CheckpointToken, Side, WeightedPoint};
use crate::error::{GpmError, Result};
use crate::geometry::{cost, validate_set, CostParams, Point};
pub use crate::matching::Matching;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BcpMode {
    /// Rewind the BCP after every search.
    #[default]
    Rewind,
    /// Rebuild the BCP from scratch before every search.
    Rebuild,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExactStats {
    pub searches: usize,
    pub relaxations: usize,
    pub max_relaxations_per_search: usize,
    pub bcp_ops: u64,
    pub bcp_ops_per_search: Vec<u64>,
    /// Rounds of ulp-level adjustment needed to make the float certificate
    /// exact.
    pub polish_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub matching: Matching,
    /// Final potentials `π`, indexed like the input slices.
    pub potential_a: Vec<f64>,
    pub potential_b: Vec<f64>,
    pub stats: ExactStats,
}

/// Alternating path `a0, b1, a1, b2, ..., a_{m-1}, b_m` as slice indices;
/// `a0` and `b_m` are unmatched and each `(b_i, a_i)` is a matched edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentingPath {
    pub a_nodes: Vec<usize>,
    pub b_nodes: Vec<usize>,
}

/// `c(a, b) − π(a) + π(b)` in the evaluation order used by the certificate.
#[inline]
pub fn reduced_cost(c: f64, pi_a: f64, pi_b: f64) -> f64 {
    (c - pi_a) + pi_b
}

#[derive(Debug, Clone)]
pub struct MatchingState {
    a: Vec<Point>,
    b: Vec<Point>,
    params: CostParams,
    mode: BcpMode,
    /// Stored potentials: `π(v) = γ(v) + δ` inside `X`, `γ(v)` outside.
    gamma_a: Vec<f64>,
    gamma_b: Vec<f64>,
    delta: f64,
    in_x_a: Vec<bool>,
    in_x_b: Vec<bool>,
    mate_a: Vec<Option<usize>>,
    mate_b: Vec<Option<usize>>,
    parent_b: Vec<usize>,
    entered_a: Vec<usize>,
    entered_b: Vec<usize>,
    bcp: BcpStructure,
    search_token: Option<CheckpointToken>,
    ops_at_search_start: u64,
    matched: usize,
    stats: ExactStats,
}

impl MatchingState {
    pub fn new(a: &[Point], b: &[Point], params: CostParams, mode: BcpMode) -> Result<Self> {
        validate_set(a)?;
        validate_set(b)?;
        let (r, n) = (a.len(), b.len());
        let p_side: Vec<WeightedPoint> = (0..r).map(|i| wp(&a[i], i, 0.0)).collect();
        let q_side: Vec<WeightedPoint> = (0..n).map(|j| wp(&b[j], j, 0.0)).collect();
        let bcp = BcpStructure::from_points(params, &p_side, &q_side)?;
        Ok(MatchingState {
            a: a.to_vec(),
            b: b.to_vec(),
            params,
            mode,
            gamma_a: vec![0.0; r],
            gamma_b: vec![0.0; n],
            delta: 0.0,
            in_x_a: vec![true; r],
            in_x_b: vec![false; n],
            mate_a: vec![None; r],
            mate_b: vec![None; n],
            parent_b: vec![usize::MAX; n],
            entered_a: Vec::new(),
            entered_b: Vec::new(),
            bcp,
            search_token: None,
            ops_at_search_start: 0,
            matched: 0,
            stats: ExactStats::default(),
        })
    }

    pub fn matched(&self) -> usize {
        self.matched
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn stats(&self) -> &ExactStats {
        &self.stats
    }

    pub fn mate_of_a(&self, i: usize) -> Option<usize> {
        self.mate_a[i]
    }

    pub fn in_x_a(&self, i: usize) -> bool {
        self.in_x_a[i]
    }

    pub fn in_x_b(&self, j: usize) -> bool {
        self.in_x_b[j]
    }

    pub fn potential_a(&self, i: usize) -> f64 {
        if self.in_x_a[i] {
            self.gamma_a[i] + self.delta
        } else {
            self.gamma_a[i]
        }
    }

    pub fn potential_b(&self, j: usize) -> f64 {
        if self.in_x_b[j] {
            self.gamma_b[j] + self.delta
        } else {
            self.gamma_b[j]
        }
    }

    /// Grows `X` until an unmatched `B`-node is reached.
    pub fn search(&mut self) -> Result<AugmentingPath> {
        if self.matched >= self.a.len().min(self.b.len()) {
            return Err(GpmError::InfeasibleK {
                k: self.matched + 1,
                max: self.a.len().min(self.b.len()),
            });
        }
        if self.mode == BcpMode::Rebuild {
            self.rebuild_bcp()?;
        }
        self.ops_at_search_start = self.bcp.op_count();
        self.search_token = Some(self.bcp.checkpoint());
        let mut relaxations = 0;
        let end = loop {
            let pair = self
                .bcp
                .query_min()
                .expect("an unmatched B-node is always outside X");
            let (i, j) = (pair.p_id as usize, pair.q_id as usize);
            // Never lower δ: rounding may yield a tiny negative frontier value.
            let slack = (pair.cost - self.delta).max(0.0);
            self.delta += slack;
            relaxations += 1;
            self.parent_b[j] = i;
            self.bcp.delete(Side::Q, j as u32)?;
            self.in_x_b[j] = true;
            // Entering X: γ ← π − δ with π the value just before entry.
            self.gamma_b[j] -= self.delta;
            self.entered_b.push(j);
            match self.mate_b[j] {
                None => break j,
                Some(i2) => {
                    self.in_x_a[i2] = true;
                    self.gamma_a[i2] -= self.delta;
                    self.entered_a.push(i2);
                    self.bcp.insert(Side::P, wp(&self.a[i2], i2, self.gamma_a[i2]))?;
                }
            }
        };
        self.stats.searches += 1;
        self.stats.relaxations += relaxations;
        self.stats.max_relaxations_per_search = self.stats.max_relaxations_per_search.max(relaxations);
        let mut a_nodes = Vec::new();
        let mut b_nodes = Vec::new();
        let mut j = end;
        loop {
            let i = self.parent_b[j];
            b_nodes.push(j);
            a_nodes.push(i);
            match self.mate_a[i] {
                Some(prev) => j = prev,
                None => break,
            }
        }
        a_nodes.reverse();
        b_nodes.reverse();
        Ok(AugmentingPath { a_nodes, b_nodes })
    }

    /// `M ← M ⊕ path`.
    pub fn augment(&mut self, path: &AugmentingPath) -> Result<()> {
        let m = path.a_nodes.len();
        if m == 0 || path.b_nodes.len() != m {
            return Err(GpmError::MalformedPath("unequal or empty sides".into()));
        }
        let (r, n) = (self.a.len(), self.b.len());
        if path.a_nodes.iter().any(|&i| i >= r) || path.b_nodes.iter().any(|&j| j >= n) {
            return Err(GpmError::MalformedPath("index out of range".into()));
        }
        if self.mate_a[path.a_nodes[0]].is_some() {
            return Err(GpmError::MalformedPath("first A-node is matched".into()));
        }
        if self.mate_b[path.b_nodes[m - 1]].is_some() {
            return Err(GpmError::MalformedPath("last B-node is matched".into()));
        }
        for t in 1..m {
            if self.mate_b[path.b_nodes[t - 1]] != Some(path.a_nodes[t]) {
                return Err(GpmError::MalformedPath("interior edge not in M".into()));
            }
        }
        for t in 0..m {
            let (i, j) = (path.a_nodes[t], path.b_nodes[t]);
            self.mate_a[i] = Some(j);
            self.mate_b[j] = Some(i);
        }
        self.matched += 1;
        Ok(())
    }

    /// Restores the BCP to its pre-search contents, then applies the net
    /// changes: reweighted `B`-nodes and the deletion of the newly matched
    /// `A`-node. Every node leaves `X` with `γ ← γ + δ`, except unmatched
    /// `A`-nodes, which re-enter immediately and keep `γ`.
    pub fn rewind_search(&mut self, newly_matched: usize) -> Result<()> {
        let token = self
            .search_token
            .take()
            .ok_or(GpmError::StaleCheckpoint)?;
        let rewinding = self.mode == BcpMode::Rewind;
        if rewinding {
            self.bcp.rewind(token)?;
        }
        for j in std::mem::take(&mut self.entered_b) {
            self.in_x_b[j] = false;
            self.gamma_b[j] += self.delta;
            if rewinding {
                self.bcp.delete(Side::Q, j as u32)?;
                self.bcp.insert(Side::Q, wp(&self.b[j], j, self.gamma_b[j]))?;
            }
        }
        for i in std::mem::take(&mut self.entered_a) {
            self.in_x_a[i] = false;
            self.gamma_a[i] += self.delta;
        }
        self.in_x_a[newly_matched] = false;
        self.gamma_a[newly_matched] += self.delta;
        if rewinding {
            self.bcp.delete(Side::P, newly_matched as u32)?;
        }
        self.bcp.commit();
        self.stats
            .bcp_ops_per_search
            .push(self.bcp.op_count() - self.ops_at_search_start);
        Ok(())
    }

    fn rebuild_bcp(&mut self) -> Result<()> {
        let p_side: Vec<WeightedPoint> = (0..self.a.len())
            .filter(|&i| self.mate_a[i].is_none())
            .map(|i| wp(&self.a[i], i, self.gamma_a[i]))
            .collect();
        let q_side: Vec<WeightedPoint> = (0..self.b.len())
            .map(|j| wp(&self.b[j], j, self.gamma_b[j]))
            .collect();
        self.bcp = BcpStructure::from_points(self.params, &p_side, &q_side)?;
        Ok(())
    }

    /// BCP contents as `(side, index, weight)` sorted; for differential tests.
    pub fn bcp_snapshot(&self) -> (Vec<WeightedPoint>, Vec<WeightedPoint>) {
        (self.bcp.contents(Side::P), self.bcp.contents(Side::Q))
    }

    fn matching(&self) -> Result<Matching> {
        let pairs = (0..self.a.len())
            .filter_map(|i| self.mate_a[i].map(|j| (self.a[i].id, self.b[j].id)))
            .collect();
        Matching::from_pairs(pairs, &self.a, &self.b, self.params)
    }

    /// Final potentials adjusted at the ulp level so that, in floating point,
    /// every matched edge has reduced cost exactly 0 and every edge has
    /// reduced cost at least 0. Returns the number of adjustment rounds, or
    /// `usize::MAX` if no exact certificate was found.
    fn polished_potentials(&self) -> (Vec<f64>, Vec<f64>, usize) {
        let (r, n) = (self.a.len(), self.b.len());
        let pa: Vec<f64> = (0..r).map(|i| self.potential_a(i)).collect();
        let pb: Vec<f64> = (0..n).map(|j| self.potential_b(j)).collect();
        if r.saturating_mul(n) > POLISH_SCAN_LIMIT {
            let mut pb = pb;
            self.tighten_matched(&pa, &mut pb);
            return (pa, pb, 0);
        }
        // Rounding depends on the absolute level of the potentials; a
        // uniform shift changes nothing in exact arithmetic but can break a
        // cycle of ulp-level violations.
        let mut shifts = vec![0.0];
        if let Some(&m) = pa.iter().max_by(|x, y| x.total_cmp(y)) {
            shifts.push(-m);
        }
        if let Some(&m) = pa.iter().min_by(|x, y| x.total_cmp(y)) {
            shifts.push(-m);
        }
        for shift in shifts {
            let mut qa: Vec<f64> = pa.iter().map(|v| v + shift).collect();
            let mut qb: Vec<f64> = pb.iter().map(|v| v + shift).collect();
            if let Some(rounds) = self.polish(&mut qa, &mut qb, 200) {
                return (qa, qb, rounds);
            }
        }
        let mut pb = pb;
        self.tighten_matched(&pa, &mut pb);
        (pa, pb, usize::MAX)
    }

    fn tighten_matched(&self, pa: &[f64], pb: &mut [f64]) {
        for (i, mate) in self.mate_a.iter().enumerate() {
            if let Some(j) = *mate {
                pb[j] = -(cost(&self.a[i], &self.b[j], self.params) - pa[i]);
            }
        }
    }

    fn polish(&self, pa: &mut [f64], pb: &mut [f64], max_rounds: usize) -> Option<usize> {
        let (r, n) = (self.a.len(), self.b.len());
        let c = |i: usize, j: usize| cost(&self.a[i], &self.b[j], self.params);
        for round in 0..max_rounds {
            self.tighten_matched(pa, pb);
            let mut clean = true;
            for i in 0..r {
                for j in 0..n {
                    let rc = reduced_cost(c(i, j), pa[i], pb[j]);
                    if rc >= 0.0 {
                        continue;
                    }
                    clean = false;
                    if self.mate_b[j].is_none() {
                        pb[j] = (pb[j] - rc).next_up();
                    } else {
                        pa[i] = (pa[i] + rc).next_down();
                    }
                }
            }
            if clean {
                return Some(round);
            }
        }
        None
    }
}

/// Above this many edges only matched edges are made exactly tight.
const POLISH_SCAN_LIMIT: usize = 1 << 24;

fn wp(p: &Point, idx: usize, weight: f64) -> WeightedPoint {
    WeightedPoint::new(Point::new(p.x, p.y, idx as u32), weight)
}

/// Minimum-cost matching of size exactly `k`.
pub fn solve_exact(a: &[Point], b: &[Point], k: usize, params: CostParams) -> Result<Matching> {
    Ok(solve_exact_with(a, b, k, params, BcpMode::Rewind)?.matching)
}

/// [`solve_exact`] returning the optimality certificate and counters.
pub fn solve_exact_with(
    a: &[Point],
    b: &[Point],
    k: usize,
    params: CostParams,
    mode: BcpMode,
) -> Result<ExactSolution> {
    let max = a.len().min(b.len());
    if k > max {
        return Err(GpmError::InfeasibleK { k, max });
    }
    let mut state = MatchingState::new(a, b, params, mode)?;
    while state.matched() < k {
        let path = state.search()?;
        state.augment(&path)?;
        state.rewind_search(path.a_nodes[0])?;
    }
    let (potential_a, potential_b, rounds) = state.polished_potentials();
    let mut stats = state.stats.clone();
    stats.polish_rounds = rounds;
    stats.bcp_ops = stats.bcp_ops_per_search.iter().sum();
    Ok(ExactSolution {
        matching: state.matching()?,
        potential_a,
        potential_b,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_set;

    fn l2() -> CostParams {
        CostParams::new(2, 1).unwrap()
    }

    #[test]
    fn forced_pair() {
        let m = solve_exact(&point_set(&[(0.0, 0.0)]), &point_set(&[(5.0, 0.0)]), 1, l2()).unwrap();
        assert_eq!(m.pairs, vec![(0, 0)]);
        assert_eq!(m.cost, 5.0);
    }

    #[test]
    fn parallel_pairs() {
        let a = point_set(&[(0.0, 0.0), (10.0, 0.0)]);
        let b = point_set(&[(1.0, 0.0), (11.0, 0.0)]);
        let m = solve_exact(&a, &b, 2, l2()).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(m.cost, 2.0);
    }

    #[test]
    fn empty_and_infeasible() {
        let a = point_set(&[(0.0, 0.0)]);
        assert_eq!(solve_exact(&a, &a, 0, l2()).unwrap(), Matching::empty());
        assert!(matches!(
            solve_exact(&a, &a, 2, l2()),
            Err(GpmError::InfeasibleK { k: 2, max: 1 })
        ));
    }

    #[test]
    fn first_search_is_global_minimum() {
        let a = point_set(&[(0.0, 0.0), (4.0, 4.0), (9.0, 1.0)]);
        let b = point_set(&[(2.0, 0.0), (4.0, 5.5), (20.0, 0.0)]);
        let mut st = MatchingState::new(&a, &b, l2(), BcpMode::Rewind).unwrap();
        let path = st.search().unwrap();
        assert_eq!(path.a_nodes, vec![1]);
        assert_eq!(path.b_nodes, vec![1]);
        assert_eq!(st.delta(), 1.5);
    }

    #[test]
    fn forced_alternation() {
        // a0 and a1 both prefer b0; a1 has no cheap alternative, so the
        // second search must reroute a0 to b1 through the matched edge.
        let a = point_set(&[(0.0, 0.0), (1.0, 0.0)]);
        let b = point_set(&[(0.9, 0.0), (-2.0, 0.0)]);
        let mut st = MatchingState::new(&a, &b, l2(), BcpMode::Rewind).unwrap();
        let p1 = st.search().unwrap();
        assert_eq!((p1.a_nodes.clone(), p1.b_nodes.clone()), (vec![1], vec![0]));
        st.augment(&p1).unwrap();
        st.rewind_search(1).unwrap();
        let p2 = st.search().unwrap();
        assert_eq!(p2.a_nodes.len(), 1);
        st.augment(&p2).unwrap();
        st.rewind_search(p2.a_nodes[0]).unwrap();
        assert_eq!(st.matched(), 2);
    }

    #[test]
    fn malformed_paths_rejected() {
        let a = point_set(&[(0.0, 0.0), (1.0, 0.0)]);
        let b = point_set(&[(0.0, 1.0), (1.0, 1.0)]);
        let mut st = MatchingState::new(&a, &b, l2(), BcpMode::Rewind).unwrap();
        let bad = AugmentingPath { a_nodes: vec![0, 1], b_nodes: vec![0] };
        assert!(matches!(st.augment(&bad), Err(GpmError::MalformedPath(_))));
        let bad = AugmentingPath { a_nodes: vec![0, 1], b_nodes: vec![0, 1] };
        assert!(matches!(st.augment(&bad), Err(GpmError::MalformedPath(_))));
        let ok = AugmentingPath { a_nodes: vec![0], b_nodes: vec![0] };
        st.augment(&ok).unwrap();
        assert!(matches!(st.augment(&ok), Err(GpmError::MalformedPath(_))));
    }
}
