//! Unit-capacity network for size-`k` matching: `s → a → b → t`.
//!
//! Bipartite arcs are implicit. A pseudoflow is stored as its set of
//! saturated arcs together with an imbalance cache.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{GpmError, Result};
use crate::geometry::{cost, exact_sum, CostParams, Point};
use crate::matching::Matching;

static SUPPORT_CHECKS: AtomicU64 = AtomicU64::new(0);

/// Number of support-size assertions evaluated by this process so far.
pub fn support_checks() -> u64 {
    SUPPORT_CHECKS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    S,
    T,
    A(usize),
    B(usize),
}

/// A residual arc `tail → head`. Forward arcs are idle arcs of the network;
/// backward arcs reverse a saturated arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResidualArc {
    pub tail: Node,
    pub head: Node,
    pub backward: bool,
}

impl ResidualArc {
    pub fn forward(tail: Node, head: Node) -> Self {
        ResidualArc {
            tail,
            head,
            backward: false,
        }
    }

    pub fn backward(tail: Node, head: Node) -> Self {
        ResidualArc {
            tail,
            head,
            backward: true,
        }
    }

    /// The underlying network arc as `(from, to)`.
    pub fn underlying(&self) -> (Node, Node) {
        if self.backward {
            (self.head, self.tail)
        } else {
            (self.tail, self.head)
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    a: Vec<Point>,
    b: Vec<Point>,
    params: CostParams,
    k: usize,
    sat_sa: Vec<bool>,
    sat_bt: Vec<bool>,
    sat_ab: BTreeSet<(usize, usize)>,
    ab_out: Vec<Vec<usize>>,
    ab_in: Vec<Vec<usize>>,
    imb_a: Vec<i64>,
    imb_b: Vec<i64>,
    imb_s: i64,
    imb_t: i64,
    excess: i64,
    support: usize,
}

impl FlowNetwork {
    pub fn new(a: &[Point], b: &[Point], k: usize, params: CostParams) -> Result<Self> {
        let max = a.len().min(b.len());
        if k == 0 || k > max {
            return Err(GpmError::InfeasibleK { k, max });
        }
        Ok(FlowNetwork {
            a: a.to_vec(),
            b: b.to_vec(),
            params,
            k,
            sat_sa: vec![false; a.len()],
            sat_bt: vec![false; b.len()],
            sat_ab: BTreeSet::new(),
            ab_out: vec![Vec::new(); a.len()],
            ab_in: vec![Vec::new(); b.len()],
            imb_a: vec![0; a.len()],
            imb_b: vec![0; b.len()],
            imb_s: k as i64,
            imb_t: -(k as i64),
            excess: k as i64,
            support: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn params(&self) -> CostParams {
        self.params
    }

    pub fn a_points(&self) -> &[Point] {
        &self.a
    }

    pub fn b_points(&self) -> &[Point] {
        &self.b
    }

    pub fn node_count(&self) -> usize {
        self.a.len() + self.b.len() + 2
    }

    /// Supply `φ(v)`: `k` at `s`, `−k` at `t`, zero elsewhere.
    pub fn supply(&self, v: Node) -> i64 {
        match v {
            Node::S => self.k as i64,
            Node::T => -(self.k as i64),
            _ => 0,
        }
    }

    pub fn arc_cost(&self, from: Node, to: Node) -> f64 {
        match (from, to) {
            (Node::A(i), Node::B(j)) => cost(&self.a[i], &self.b[j], self.params),
            _ => 0.0,
        }
    }

    pub fn is_arc(&self, from: Node, to: Node) -> bool {
        match (from, to) {
            (Node::S, Node::A(i)) => i < self.a.len(),
            (Node::A(i), Node::B(j)) => i < self.a.len() && j < self.b.len(),
            (Node::B(j), Node::T) => j < self.b.len(),
            _ => false,
        }
    }

    pub fn is_saturated(&self, from: Node, to: Node) -> bool {
        match (from, to) {
            (Node::S, Node::A(i)) => self.sat_sa[i],
            (Node::A(i), Node::B(j)) => self.sat_ab.contains(&(i, j)),
            (Node::B(j), Node::T) => self.sat_bt[j],
            _ => false,
        }
    }

    pub fn is_residual(&self, arc: &ResidualArc) -> bool {
        let (from, to) = arc.underlying();
        self.is_arc(from, to) && self.is_saturated(from, to) == arc.backward
    }

    /// `c_π` of a residual arc: `c(v, w) − π(v) + π(w)` for a forward arc,
    /// its negation for a backward one.
    pub fn reduced_cost(&self, arc: &ResidualArc, pi: impl Fn(Node) -> f64) -> f64 {
        let (from, to) = arc.underlying();
        let c = self.arc_cost(from, to);
        let forward = (c - pi(from)) + pi(to);
        if arc.backward {
            -forward
        } else {
            forward
        }
    }

    pub fn imbalance(&self, v: Node) -> i64 {
        match v {
            Node::S => self.imb_s,
            Node::T => self.imb_t,
            Node::A(i) => self.imb_a[i],
            Node::B(j) => self.imb_b[j],
        }
    }

    fn imbalance_mut(&mut self, v: Node) -> &mut i64 {
        match v {
            Node::S => &mut self.imb_s,
            Node::T => &mut self.imb_t,
            Node::A(i) => &mut self.imb_a[i],
            Node::B(j) => &mut self.imb_b[j],
        }
    }

    pub fn total_excess(&self) -> i64 {
        self.excess
    }

    fn shift_imbalance(&mut self, v: Node, by: i64) {
        let slot = self.imbalance_mut(v);
        let old = *slot;
        *slot += by;
        let new = *slot;
        self.excess += new.max(0) - old.max(0);
    }

    pub fn excess_nodes(&self) -> Vec<Node> {
        self.nodes().filter(|&v| self.imbalance(v) > 0).collect()
    }

    pub fn deficit_nodes(&self) -> Vec<Node> {
        self.nodes().filter(|&v| self.imbalance(v) < 0).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        [Node::S, Node::T]
            .into_iter()
            .chain((0..self.a.len()).map(Node::A))
            .chain((0..self.b.len()).map(Node::B))
    }

    /// `|supp(f)|`.
    pub fn support_size(&self) -> usize {
        self.support
    }

    pub fn saturated_arcs(&self) -> Vec<(Node, Node)> {
        let mut out = Vec::with_capacity(self.support);
        for (i, &s) in self.sat_sa.iter().enumerate() {
            if s {
                out.push((Node::S, Node::A(i)));
            }
        }
        for &(i, j) in &self.sat_ab {
            out.push((Node::A(i), Node::B(j)));
        }
        for (j, &s) in self.sat_bt.iter().enumerate() {
            if s {
                out.push((Node::B(j), Node::T));
            }
        }
        out
    }

    pub fn saturated_out_of_a(&self, i: usize) -> &[usize] {
        &self.ab_out[i]
    }

    pub fn saturated_into_b(&self, j: usize) -> &[usize] {
        &self.ab_in[j]
    }

    pub fn sa_saturated(&self, i: usize) -> bool {
        self.sat_sa[i]
    }

    pub fn bt_saturated(&self, j: usize) -> bool {
        self.sat_bt[j]
    }

    /// Dead: zero imbalance and no incident saturated arc. `s` and `t` are
    /// always alive.
    pub fn is_alive(&self, v: Node) -> bool {
        match v {
            Node::S | Node::T => true,
            Node::A(i) => self.imb_a[i] != 0 || self.sat_sa[i] || !self.ab_out[i].is_empty(),
            Node::B(j) => self.imb_b[j] != 0 || self.sat_bt[j] || !self.ab_in[j].is_empty(),
        }
    }

    fn set(&mut self, from: Node, to: Node, on: bool) {
        match (from, to) {
            (Node::S, Node::A(i)) => self.sat_sa[i] = on,
            (Node::B(j), Node::T) => self.sat_bt[j] = on,
            (Node::A(i), Node::B(j)) => {
                if on {
                    self.sat_ab.insert((i, j));
                    self.ab_out[i].push(j);
                    self.ab_in[j].push(i);
                } else {
                    self.sat_ab.remove(&(i, j));
                    self.ab_out[i].retain(|&x| x != j);
                    self.ab_in[j].retain(|&x| x != i);
                }
            }
            _ => unreachable!("not an arc"),
        }
        if on {
            self.support += 1;
            self.shift_imbalance(from, -1);
            self.shift_imbalance(to, 1);
        } else {
            self.support -= 1;
            self.shift_imbalance(from, 1);
            self.shift_imbalance(to, -1);
        }
    }

    /// Sets a saturated arc idle (used by scale initialisation).
    pub fn desaturate(&mut self, from: Node, to: Node) -> Result<()> {
        if !self.is_arc(from, to) || !self.is_saturated(from, to) {
            return Err(GpmError::NotResidual(format!("{from:?}→{to:?} is not saturated")));
        }
        self.set(from, to, false);
        Ok(())
    }

    /// Augments by a unit residual pseudoflow given as a list of distinct
    /// residual arcs: backward arcs make their arc idle, forward arcs
    /// saturate theirs, everything else is unchanged.
    pub fn augment_by(&mut self, g: &[ResidualArc]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for arc in g {
            if !self.is_residual(arc) {
                return Err(GpmError::NotResidual(format!("{arc:?}")));
            }
            if !seen.insert(arc.underlying()) {
                return Err(GpmError::NotResidual(format!("{arc:?} used twice")));
            }
        }
        for arc in g {
            let (from, to) = arc.underlying();
            self.set(from, to, !arc.backward);
        }
        self.check_support();
        Ok(())
    }

    /// `|supp(f)| ≤ 3k` for circulations and `≤ 3(k + excess)` otherwise.
    pub fn check_support(&self) {
        SUPPORT_CHECKS.fetch_add(1, Ordering::Relaxed);
        let excess = self.total_excess() as usize;
        assert!(
            self.support <= 3 * (self.k + excess),
            "support {} exceeds 3(k + excess) = {}",
            self.support,
            3 * (self.k + excess)
        );
    }

    /// Imbalances recomputed from the saturated set.
    pub fn recompute_imbalances(&self) -> Vec<(Node, i64)> {
        let mut out: Vec<(Node, i64)> = self.nodes().map(|v| (v, self.supply(v))).collect();
        let idx = |v: Node| match v {
            Node::S => 0,
            Node::T => 1,
            Node::A(i) => 2 + i,
            Node::B(j) => 2 + self.a.len() + j,
        };
        for (from, to) in self.saturated_arcs() {
            out[idx(from)].1 -= 1;
            out[idx(to)].1 += 1;
        }
        out
    }

    pub fn is_circulation(&self) -> bool {
        self.nodes().all(|v| self.imbalance(v) == 0)
    }

    /// Circulation `s → a → b → t` along each pair of a size-`k` matching
    /// given as slice indices.
    pub fn from_matching(
        a: &[Point],
        b: &[Point],
        pairs: &[(usize, usize)],
        params: CostParams,
    ) -> Result<Self> {
        let mut net = FlowNetwork::new(a, b, pairs.len(), params)?;
        for &(i, j) in pairs {
            net.augment_by(&[
                ResidualArc::forward(Node::S, Node::A(i)),
                ResidualArc::forward(Node::A(i), Node::B(j)),
                ResidualArc::forward(Node::B(j), Node::T),
            ])?;
        }
        net.check_support();
        Ok(net)
    }

    /// Matching read off an integral circulation.
    pub fn to_matching(&self) -> Result<Matching> {
        if !self.is_circulation() {
            return Err(GpmError::Conservation("pseudoflow is not a circulation".into()));
        }
        let pairs = self
            .sat_ab
            .iter()
            .map(|&(i, j)| (self.a[i].id, self.b[j].id))
            .collect();
        Matching::from_pairs(pairs, &self.a, &self.b, self.params)
    }

    /// `Σ c(a, b)` over saturated bipartite arcs, correctly rounded.
    pub fn flow_cost(&self) -> f64 {
        exact_sum(self.sat_ab.iter().map(|&(i, j)| cost(&self.a[i], &self.b[j], self.params)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_set;

    fn unit() -> FlowNetwork {
        FlowNetwork::new(
            &point_set(&[(0.0, 0.0)]),
            &point_set(&[(3.0, 4.0)]),
            1,
            CostParams::default(),
        )
        .unwrap()
    }

    #[test]
    fn construction() {
        let net = unit();
        assert_eq!(net.node_count(), 4);
        assert!(net.is_arc(Node::S, Node::A(0)));
        assert!(net.is_arc(Node::A(0), Node::B(0)));
        assert!(net.is_arc(Node::B(0), Node::T));
        assert!(!net.is_arc(Node::B(0), Node::A(0)));
        let total: i64 = net.nodes().map(|v| net.supply(v)).sum();
        assert_eq!(total, 0);
        assert_eq!(net.total_excess(), 1);
        assert!(matches!(
            FlowNetwork::new(&point_set(&[(0.0, 0.0)]), &[], 1, CostParams::default()),
            Err(GpmError::InfeasibleK { .. })
        ));
    }

    #[test]
    fn single_path_and_reversal() {
        let mut net = unit();
        net.augment_by(&[]).unwrap();
        assert_eq!(net.support_size(), 0);
        let path = [
            ResidualArc::forward(Node::S, Node::A(0)),
            ResidualArc::forward(Node::A(0), Node::B(0)),
            ResidualArc::forward(Node::B(0), Node::T),
        ];
        net.augment_by(&path).unwrap();
        assert!(net.is_circulation());
        assert_eq!(net.imbalance(Node::S), 0);
        assert_eq!(net.flow_cost(), 5.0);
        assert!(net.augment_by(&path[..1]).is_err());
        net.augment_by(&[ResidualArc::backward(Node::T, Node::B(0))]).unwrap();
        assert_eq!(net.imbalance(Node::B(0)), 1);
        assert_eq!(net.imbalance(Node::T), -1);
    }

    #[test]
    fn alive_dead() {
        let mut net = unit();
        assert!(!net.is_alive(Node::A(0)));
        assert!(net.is_alive(Node::S));
        net.augment_by(&[ResidualArc::forward(Node::S, Node::A(0))]).unwrap();
        assert!(net.is_alive(Node::A(0)));
        assert_eq!(net.imbalance(Node::A(0)), 1);
    }
}
