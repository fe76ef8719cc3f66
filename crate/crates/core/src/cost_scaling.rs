//! `(1+ε)`-approximate size-`k` matching by cost scaling.
//!
//! Each scale turns a `2θ`-optimal circulation into a `θ`-optimal one:
//! potentials are shifted, badly priced saturated arcs are made idle, and the
//! resulting excess is routed by alternating Hungarian searches and blocking
//! flows. Only nodes touched by the flow ("alive") carry potentials; the dead
//! majority is reached through closest-pair structures that skip over them.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::bcp::{BcpStructure, Side, WeightedPoint};
use crate::error::{GpmError, Result};
use crate::flow_network::{FlowNetwork, Node, ResidualArc};
use crate::geometry::{cost, intra_cluster_matching, starting_scale_index, validate_set, CostParams, Point};
use crate::matching::Matching;

/// Fraction of `θ` tolerated as rounding noise when rounding a raise up to
/// whole quanta and when testing admissibility.
const SLACK: f64 = 1e-6;

/// Potentials are stored as integer multiples of the final scale; this caps
/// the number of halvings so that they fit comfortably in an `i128`.
const MAX_SCALES: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord {
    pub theta: f64,
    pub desaturated: usize,
    pub excess_after_init: i64,
    pub iterations: usize,
    pub passes: usize,
    pub paths: usize,
    pub max_explored: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproxStats {
    pub theta_hi: f64,
    pub theta_lo: f64,
    pub edge_cost: f64,
    pub expected_scales: usize,
    pub scales: Vec<ScaleRecord>,
    pub iterations: usize,
    pub relaxations: usize,
    pub passes: usize,
    pub bcp_ops: u64,
    pub max_alive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSolution {
    pub matching: Matching,
    pub stats: ApproxStats,
}

/// `⌈log₂(θ̄/θ̲)⌉ + 1`, the number of scales run for the given thresholds.
/// Evaluated by exact halving rather than through `log2`.
pub fn expected_scale_count(theta_hi: f64, theta_lo: f64) -> usize {
    let mut theta = theta_hi;
    let mut count = 1;
    while theta > theta_lo && count <= 4096 {
        theta /= 2.0;
        count += 1;
    }
    count
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    key: f64,
    seq: u64,
    target: Node,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then(other.seq.cmp(&self.seq))
    }
}

/// One cost-scaling run; the step methods are public so that tests can
/// audit every scale boundary.
#[derive(Debug, Clone)]
pub struct CostScalingSolver {
    net: FlowNetwork,
    params: CostParams,
    // Potentials of alive nodes in units of `unit`; during a search these
    // hold γ with π = γ + δ on X.
    pi_a: Vec<i128>,
    pi_b: Vec<i128>,
    pi_s: i128,
    pi_t: i128,
    unit: f64,
    theta_units: i128,
    alive_a: Vec<bool>,
    alive_b: Vec<bool>,
    alive_a_set: BTreeSet<usize>,
    alive_b_set: BTreeSet<usize>,
    theta: f64,
    first_scale: bool,
    // dead A × alive B weighted by π(b)
    s2: BcpStructure,
    // (alive A ∩ X during a search) × dead B
    s3: BcpStructure,
    // dead A × dead B
    s4: BcpStructure,
    in_x_a: Vec<bool>,
    in_x_b: Vec<bool>,
    in_x_s: bool,
    in_x_t: bool,
    visited_a: Vec<bool>,
    visited_b: Vec<bool>,
    stats: ApproxStats,
    current: ScaleRecord,
}

fn wp(p: &Point, idx: usize, w: f64) -> WeightedPoint {
    WeightedPoint::new(Point::new(p.x, p.y, idx as u32), w)
}

impl CostScalingSolver {
    /// Requires a positive starting edge cost; see [`solve_approx_with`] for
    /// the zero-cost shortcut.
    pub fn new(a: &[Point], b: &[Point], k: usize, params: CostParams, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(GpmError::InvalidEpsilon(eps));
        }
        validate_set(a)?;
        validate_set(b)?;
        let scale = starting_scale_index(a, b, k, params)?;
        let c = scale.edge_cost;
        let n_total = (a.len() + b.len()) as f64;
        let theta_hi = n_total.powi(params.q() as i32) * c;
        let theta_lo = eps / (6.0 * k as f64) * c;
        let net = FlowNetwork::new(a, b, k, params)?;
        let (r, n) = (a.len(), b.len());
        let scales = expected_scale_count(theta_hi, theta_lo);
        if scales > MAX_SCALES {
            return Err(GpmError::TooManyScales(scales));
        }
        let mut unit = theta_hi;
        for _ in 1..scales {
            unit /= 2.0;
        }
        let stats = ApproxStats {
            theta_hi,
            theta_lo,
            edge_cost: c,
            expected_scales: scales,
            ..ApproxStats::default()
        };
        let mut solver = CostScalingSolver {
            net,
            params,
            pi_a: vec![0; r],
            pi_b: vec![0; n],
            pi_s: 0,
            pi_t: 0,
            unit,
            theta_units: 1i128 << (scales - 1),
            alive_a: vec![false; r],
            alive_b: vec![false; n],
            alive_a_set: BTreeSet::new(),
            alive_b_set: BTreeSet::new(),
            theta: theta_hi,
            first_scale: true,
            s2: BcpStructure::new(params),
            s3: BcpStructure::new(params),
            s4: BcpStructure::new(params),
            in_x_a: vec![false; r],
            in_x_b: vec![false; n],
            in_x_s: false,
            in_x_t: false,
            visited_a: vec![false; r],
            visited_b: vec![false; n],
            stats,
            current: ScaleRecord::default(),
        };
        solver.rebuild_structures()?;
        Ok(solver)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_lo(&self) -> f64 {
        self.stats.theta_lo
    }

    pub fn network(&self) -> &FlowNetwork {
        &self.net
    }

    pub fn stats(&self) -> &ApproxStats {
        &self.stats
    }

    pub fn is_alive(&self, v: Node) -> bool {
        match v {
            Node::S | Node::T => true,
            Node::A(i) => self.alive_a[i],
            Node::B(j) => self.alive_b[j],
        }
    }

    pub fn alive_count(&self) -> usize {
        self.alive_a_set.len() + self.alive_b_set.len() + 2
    }

    /// Potential with dead nodes recovered: `π(s)` for dead `A`-nodes and
    /// `π(t)` for dead `B`-nodes.
    pub fn potential(&self, v: Node) -> f64 {
        self.w(self.potential_units(v))
    }

    /// The final scale's `θ`; every potential is an integer multiple of it.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    /// [`Self::potential`] as an exact multiple of [`Self::unit`].
    pub fn potential_units(&self, v: Node) -> i128 {
        match v {
            Node::S => self.pi_s,
            Node::T => self.pi_t,
            Node::A(i) if self.alive_a[i] => self.pi_a[i],
            Node::A(_) => self.pi_s,
            Node::B(j) if self.alive_b[j] => self.pi_b[j],
            Node::B(_) => self.pi_t,
        }
    }

    fn w(&self, units: i128) -> f64 {
        units as f64 * self.unit
    }

    /// `c_π` of a residual arc under the recovered potentials; the potential
    /// difference is taken exactly before scaling.
    pub fn reduced_cost(&self, arc: &ResidualArc) -> f64 {
        let (from, to) = arc.underlying();
        let c = self.net.arc_cost(from, to);
        let d = self.potential_units(from) - self.potential_units(to);
        let forward = if d == 0 { c } else { c - self.w(d) };
        if arc.backward {
            -forward
        } else {
            forward
        }
    }

    /// The potential a dead node would be given; errors for alive nodes.
    pub fn recover_potential(&self, v: Node) -> Result<f64> {
        if self.is_alive(v) {
            return Err(GpmError::BadIds(format!("{v:?} is alive")));
        }
        Ok(self.potential(v))
    }

    fn bcp_ops(&self) -> u64 {
        self.s2.op_count() + self.s3.op_count() + self.s4.op_count()
    }

    fn rebuild_structures(&mut self) -> Result<()> {
        self.stats.bcp_ops += self.bcp_ops();
        let a = self.net.a_points();
        let b = self.net.b_points();
        let dead_a: Vec<WeightedPoint> = (0..a.len())
            .filter(|&i| !self.alive_a[i])
            .map(|i| wp(&a[i], i, 0.0))
            .collect();
        let dead_b: Vec<WeightedPoint> = (0..b.len())
            .filter(|&j| !self.alive_b[j])
            .map(|j| wp(&b[j], j, 0.0))
            .collect();
        let alive_b: Vec<WeightedPoint> = self
            .alive_b_set
            .iter()
            .map(|&j| wp(&b[j], j, self.w(self.pi_b[j])))
            .collect();
        self.s2 = BcpStructure::from_points(self.params, &dead_a, &alive_b)?;
        self.s3 = BcpStructure::from_points(self.params, &[], &dead_b)?;
        self.s4 = BcpStructure::from_points(self.params, &dead_a, &dead_b)?;
        Ok(())
    }

    /// Brings the alive flags of `v` in line with the flow, moving it
    /// between the dead and alive sides of the structures. Newly alive nodes
    /// take their recovered potential.
    fn refresh_status(&mut self, v: Node) -> Result<()> {
        let now = self.net.is_alive(v);
        match v {
            Node::A(i) if now != self.alive_a[i] => {
                let p = self.net.a_points()[i];
                if now {
                    self.pi_a[i] = self.pi_s;
                    self.alive_a_set.insert(i);
                    self.s2.delete(Side::P, i as u32)?;
                    self.s4.delete(Side::P, i as u32)?;
                } else {
                    self.alive_a_set.remove(&i);
                    self.s2.insert(Side::P, wp(&p, i, 0.0))?;
                    self.s4.insert(Side::P, wp(&p, i, 0.0))?;
                }
                self.alive_a[i] = now;
            }
            Node::B(j) if now != self.alive_b[j] => {
                let p = self.net.b_points()[j];
                if now {
                    self.pi_b[j] = self.pi_t;
                    self.alive_b_set.insert(j);
                    self.s3.delete(Side::Q, j as u32)?;
                    self.s4.delete(Side::Q, j as u32)?;
                    self.s2.insert(Side::Q, wp(&p, j, self.w(self.pi_b[j])))?;
                } else {
                    self.alive_b_set.remove(&j);
                    self.s2.delete(Side::Q, j as u32)?;
                    self.s3.insert(Side::Q, wp(&p, j, 0.0))?;
                    self.s4.insert(Side::Q, wp(&p, j, 0.0))?;
                }
                self.alive_b[j] = now;
            }
            _ => {}
        }
        Ok(())
    }

    /// Scale initialisation. The first scale starts from `f = 0`, `π = 0`;
    /// later ones raise `A` by `θ`, `B` by `2θ`, `t` by `3θ` and make idle
    /// every saturated arc whose backward residual arc is below `−θ`.
    pub fn scale_init(&mut self) -> Result<()> {
        self.current = ScaleRecord {
            theta: self.theta,
            ..ScaleRecord::default()
        };
        if self.first_scale {
            self.first_scale = false;
            self.current.excess_after_init = self.net.total_excess();
            return Ok(());
        }
        let theta = self.theta;
        let tu = self.theta_units;
        for &i in &self.alive_a_set {
            self.pi_a[i] += tu;
        }
        for &j in &self.alive_b_set {
            self.pi_b[j] += 2 * tu;
        }
        self.pi_t += 3 * tu;
        let mut touched = Vec::new();
        for (from, to) in self.net.saturated_arcs() {
            let rc = self.reduced_cost(&ResidualArc::backward(to, from));
            if rc < -theta {
                self.net.desaturate(from, to)?;
                self.current.desaturated += 1;
                touched.push(from);
                touched.push(to);
            }
        }
        for v in touched {
            let now = self.net.is_alive(v);
            match v {
                Node::A(i) if !now && self.alive_a[i] => {
                    self.alive_a[i] = false;
                    self.alive_a_set.remove(&i);
                }
                Node::B(j) if !now && self.alive_b[j] => {
                    self.alive_b[j] = false;
                    self.alive_b_set.remove(&j);
                }
                _ => {}
            }
        }
        self.current.excess_after_init = self.net.total_excess();
        self.rebuild_structures()
    }

    /// Halves `θ` unless the final scale has been reached.
    pub fn next_scale(&mut self) -> bool {
        if self.theta_units == 1 {
            return false;
        }
        self.theta /= 2.0;
        self.theta_units /= 2;
        true
    }
}

struct Search {
    heap: BinaryHeap<Frontier>,
    seq: u64,
    entered: Vec<Node>,
    s1: BcpStructure,
}

impl Search {
    fn push(&mut self, key: f64, target: Node) {
        self.seq += 1;
        self.heap.push(Frontier {
            key,
            seq: self.seq,
            target,
        });
    }
}

impl CostScalingSolver {
    fn stored(&self, v: Node) -> i128 {
        match v {
            Node::S => self.pi_s,
            Node::T => self.pi_t,
            Node::A(i) => self.pi_a[i],
            Node::B(j) => self.pi_b[j],
        }
    }

    fn stored_mut(&mut self, v: Node) -> &mut i128 {
        match v {
            Node::S => &mut self.pi_s,
            Node::T => &mut self.pi_t,
            Node::A(i) => &mut self.pi_a[i],
            Node::B(j) => &mut self.pi_b[j],
        }
    }

    fn in_x(&self, v: Node) -> bool {
        match v {
            Node::S => self.in_x_s,
            Node::T => self.in_x_t,
            Node::A(i) => self.in_x_a[i],
            Node::B(j) => self.in_x_b[j],
        }
    }

    fn set_in_x(&mut self, v: Node, on: bool) {
        match v {
            Node::S => self.in_x_s = on,
            Node::T => self.in_x_t = on,
            Node::A(i) => self.in_x_a[i] = on,
            Node::B(j) => self.in_x_b[j] = on,
        }
    }

    /// Alive nodes (including `s` and `t`) whose imbalance satisfies `pred`.
    fn alive_with(&self, pred: impl Fn(i64) -> bool) -> Vec<Node> {
        let mut out = Vec::new();
        let mut consider = |v: Node| {
            if pred(self.net.imbalance(v)) {
                out.push(v);
            }
        };
        consider(Node::S);
        for &i in &self.alive_a_set {
            consider(Node::A(i));
        }
        for &j in &self.alive_b_set {
            consider(Node::B(j));
        }
        consider(Node::T);
        out
    }

    /// Rounding noise of reduced costs at the current potential magnitude.
    fn noise(&self, extra: i128) -> f64 {
        let mut m = self.pi_s.abs().max(self.pi_t.abs());
        for &i in &self.alive_a_set {
            m = m.max(self.pi_a[i].abs());
        }
        for &j in &self.alive_b_set {
            m = m.max(self.pi_b[j].abs());
        }
        64.0 * f64::EPSILON * self.w(m + extra.abs())
    }

    fn enter(&mut self, st: &mut Search, v: Node, delta: i128) -> Result<()> {
        *self.stored_mut(v) -= delta;
        self.set_in_x(v, true);
        st.entered.push(v);
        let g = self.stored(v);
        match v {
            Node::A(i) => {
                let p = self.net.a_points()[i];
                st.s1.insert(Side::P, wp(&p, i, self.w(g)))?;
                self.s3.insert(Side::P, wp(&p, i, self.w(g)))?;
                if self.net.sa_saturated(i) && !self.in_x_s {
                    st.push(self.w(self.pi_s - g), Node::S);
                }
            }
            Node::B(j) => {
                if st.s1.contains(Side::Q, j as u32) {
                    st.s1.delete(Side::Q, j as u32)?;
                }
                if self.s2.contains(Side::Q, j as u32) {
                    self.s2.delete(Side::Q, j as u32)?;
                }
                if !self.net.bt_saturated(j) && !self.in_x_t {
                    st.push(self.w(self.pi_t - g), Node::T);
                }
                let bp = self.net.b_points()[j];
                for &i in self.net.saturated_into_b(j) {
                    if !self.in_x_a[i] {
                        let c = cost(&self.net.a_points()[i], &bp, self.params);
                        st.push(-c + self.w(self.pi_a[i] - g), Node::A(i));
                    }
                }
            }
            Node::S => {
                for &i in &self.alive_a_set {
                    if !self.in_x_a[i] && !self.net.sa_saturated(i) {
                        st.push(self.w(self.pi_a[i] - g), Node::A(i));
                    }
                }
            }
            Node::T => {
                for &j in &self.alive_b_set {
                    if !self.in_x_b[j] && self.net.bt_saturated(j) {
                        st.push(self.w(self.pi_b[j] - g), Node::B(j));
                    }
                }
            }
        }
        Ok(())
    }

    /// Grows `X` from the excess nodes, raising the potentials of `X` in whole
    /// quanta of `θ`, until an admissible arc reaches a deficit node. Returns
    /// the number of nodes entered.
    pub fn hungarian_search(&mut self) -> Result<usize> {
        let theta = self.theta;
        let b = self.net.b_points();
        let excess = self.alive_with(|x| x > 0);
        let saturated: HashSet<(u32, u32)> = self
            .alive_a_set
            .iter()
            .flat_map(|&i| {
                self.net
                    .saturated_out_of_a(i)
                    .iter()
                    .map(move |&j| (i as u32, j as u32))
            })
            .collect();
        let s1_p: Vec<WeightedPoint> = Vec::new();
        let s1_q: Vec<WeightedPoint> = self
            .alive_b_set
            .iter()
            .filter(|&&j| self.net.imbalance(Node::B(j)) <= 0)
            .map(|&j| wp(&b[j], j, self.w(self.pi_b[j])))
            .collect();
        let mut st = Search {
            heap: BinaryHeap::new(),
            seq: 0,
            entered: Vec::new(),
            s1: BcpStructure::from_points_excluding(self.params, &s1_p, &s1_q, saturated)?,
        };
        let tok2 = self.s2.checkpoint();
        let tok3 = self.s3.checkpoint();
        let noise_base = self.noise(0);
        for v in excess {
            self.enter(&mut st, v, 0)?;
        }
        let mut delta: i128 = 0;
        loop {
            while let Some(top) = st.heap.peek() {
                if self.in_x(top.target) {
                    st.heap.pop();
                } else {
                    break;
                }
            }
            let mut best: Option<(f64, Node)> = st.heap.peek().map(|f| (f.key, f.target));
            let mut offer = |key: f64, target: Node| {
                if best.map_or(true, |(k, _)| key < k) {
                    best = Some((key, target));
                }
            };
            if let Some(pair) = st.s1.query_min() {
                offer(pair.cost, Node::B(pair.q_id as usize));
            }
            if self.in_x_s {
                if let Some(pair) = self.s2.query_min() {
                    offer(pair.cost - self.w(self.pi_s), Node::B(pair.q_id as usize));
                }
            }
            if !self.in_x_t {
                if let Some(pair) = self.s3.query_min() {
                    offer(pair.cost + self.w(self.pi_t), Node::T);
                }
                if self.in_x_s {
                    if let Some(pair) = self.s4.query_min() {
                        offer(pair.cost + self.w(self.pi_t - self.pi_s), Node::T);
                    }
                }
            }
            let Some((key, target)) = best else {
                return Err(GpmError::Internal(
                    "no residual arc leaves the search tree".into(),
                ));
            };
            let x = key - self.w(delta);
            let noise = noise_base + 64.0 * f64::EPSILON * self.w(delta);
            let m = ((x - noise) / theta - SLACK).ceil().max(0.0);
            delta += m as i128 * self.theta_units;
            self.stats.relaxations += 1;
            if self.net.imbalance(target) < 0 {
                break;
            }
            self.enter(&mut st, target, delta)?;
        }
        for &v in &st.entered {
            *self.stored_mut(v) += delta;
            self.set_in_x(v, false);
        }
        self.s2.rewind(tok2)?;
        self.s3.rewind(tok3)?;
        for &v in &st.entered {
            if let Node::B(j) = v {
                if self.s2.contains(Side::Q, j as u32) {
                    self.s2.delete(Side::Q, j as u32)?;
                    let p = self.net.b_points()[j];
                    self.s2.insert(Side::Q, wp(&p, j, self.w(self.pi_b[j])))?;
                }
            }
        }
        self.s2.commit();
        self.s3.commit();
        let explored = st.entered.len();
        self.current.max_explored = self.current.max_explored.max(explored);
        Ok(explored)
    }
}

struct Frame {
    node: Node,
    arcs_in: Vec<ResidualArc>,
    interior: Vec<Node>,
}

struct Step {
    value: f64,
    target: Node,
    arcs: Vec<ResidualArc>,
    interior: Vec<Node>,
}

#[derive(Default)]
struct PassState {
    visited_s: bool,
    visited_t: bool,
    touched: Vec<Node>,
    remaining: std::collections::BTreeMap<Node, i64>,
    s_list: Vec<usize>,
    s_cursor: usize,
    t_list: Vec<usize>,
    t_cursor: usize,
}

impl CostScalingSolver {
    fn visited(&self, ps: &PassState, v: Node) -> bool {
        match v {
            Node::S => ps.visited_s,
            Node::T => ps.visited_t,
            Node::A(i) => self.visited_a[i],
            Node::B(j) => self.visited_b[j],
        }
    }

    fn available(&self, ps: &PassState, v: Node) -> bool {
        ps.remaining.get(&v).is_some_and(|&r| r > 0) || !self.visited(ps, v)
    }

    fn mark_visited(&mut self, ps: &mut PassState, v: Node) -> Result<()> {
        match v {
            Node::S => ps.visited_s = true,
            Node::T => ps.visited_t = true,
            Node::A(i) => self.visited_a[i] = true,
            Node::B(j) => {
                self.visited_b[j] = true;
                if self.s2.contains(Side::Q, j as u32) {
                    self.s2.delete(Side::Q, j as u32)?;
                }
            }
        }
        ps.touched.push(v);
        Ok(())
    }

    fn hide_dead(&mut self, v: Node) -> Result<()> {
        match v {
            Node::A(i) => {
                self.s2.delete(Side::P, i as u32)?;
                self.s4.delete(Side::P, i as u32)?;
            }
            Node::B(j) => {
                self.s3.delete(Side::Q, j as u32)?;
                self.s4.delete(Side::Q, j as u32)?;
            }
            _ => unreachable!("s and t are never dead"),
        }
        Ok(())
    }

    fn unhide_dead(&mut self, v: Node) -> Result<()> {
        match v {
            Node::A(i) => {
                let p = wp(&self.net.a_points()[i], i, 0.0);
                self.s2.insert(Side::P, p)?;
                self.s4.insert(Side::P, p)?;
            }
            Node::B(j) => {
                let p = wp(&self.net.b_points()[j], j, 0.0);
                self.s3.insert(Side::Q, p)?;
                self.s4.insert(Side::Q, p)?;
            }
            _ => unreachable!("s and t are never dead"),
        }
        Ok(())
    }

    /// Cheapest residual step out of `u` towards an available node.
    fn best_step(&mut self, ps: &mut PassState, u: Node) -> Option<Step> {
        let mut best: Option<Step> = None;
        let mut offer = |st: Step| {
            if best.as_ref().map_or(true, |b| st.value < b.value) {
                best = Some(st);
            }
        };
        let fwd = ResidualArc::forward;
        let bwd = ResidualArc::backward;
        let t_ok = self.available(ps, Node::T);
        match u {
            Node::S => {
                while ps.s_cursor < ps.s_list.len()
                    && !self.available(ps, Node::A(ps.s_list[ps.s_cursor]))
                {
                    ps.s_cursor += 1;
                }
                if let Some(&i) = ps.s_list.get(ps.s_cursor) {
                    offer(Step {
                        value: self.w(self.pi_a[i] - self.pi_s),
                        target: Node::A(i),
                        arcs: vec![fwd(Node::S, Node::A(i))],
                        interior: vec![],
                    });
                }
                if let Some(pair) = self.s2.query_min() {
                    let (a, b) = (Node::A(pair.p_id as usize), Node::B(pair.q_id as usize));
                    offer(Step {
                        value: pair.cost - self.w(self.pi_s),
                        target: b,
                        arcs: vec![fwd(Node::S, a), fwd(a, b)],
                        interior: vec![a],
                    });
                }
                if t_ok {
                    if let Some(pair) = self.s4.query_min() {
                        let (a, b) = (Node::A(pair.p_id as usize), Node::B(pair.q_id as usize));
                        offer(Step {
                            value: pair.cost + self.w(self.pi_t - self.pi_s),
                            target: Node::T,
                            arcs: vec![fwd(Node::S, a), fwd(a, b), fwd(b, Node::T)],
                            interior: vec![a, b],
                        });
                    }
                }
            }
            Node::A(i) => {
                if self.net.sa_saturated(i) && self.available(ps, Node::S) {
                    offer(Step {
                        value: self.w(self.pi_s - self.pi_a[i]),
                        target: Node::S,
                        arcs: vec![bwd(u, Node::S)],
                        interior: vec![],
                    });
                }
                let probe = wp(&self.net.a_points()[i], i, self.w(self.pi_a[i]));
                let out = self.net.saturated_out_of_a(i);
                if let Some(pair) =
                    self.s2
                        .best_with_point_filtered(Side::P, &probe, |j| out.contains(&(j as usize)))
                {
                    let b = Node::B(pair.q_id as usize);
                    offer(Step {
                        value: pair.cost,
                        target: b,
                        arcs: vec![fwd(u, b)],
                        interior: vec![],
                    });
                }
                if t_ok {
                    if let Some(pair) = self.s3.best_with_point(Side::P, &probe) {
                        let b = Node::B(pair.q_id as usize);
                        offer(Step {
                            value: pair.cost + self.w(self.pi_t),
                            target: Node::T,
                            arcs: vec![fwd(u, b), fwd(b, Node::T)],
                            interior: vec![b],
                        });
                    }
                }
            }
            Node::B(j) => {
                if !self.net.bt_saturated(j) && t_ok {
                    offer(Step {
                        value: self.w(self.pi_t - self.pi_b[j]),
                        target: Node::T,
                        arcs: vec![fwd(u, Node::T)],
                        interior: vec![],
                    });
                }
                let bp = self.net.b_points()[j];
                for &i in self.net.saturated_into_b(j) {
                    if self.available(ps, Node::A(i)) {
                        let c = cost(&self.net.a_points()[i], &bp, self.params);
                        offer(Step {
                            value: -c + self.w(self.pi_a[i] - self.pi_b[j]),
                            target: Node::A(i),
                            arcs: vec![bwd(u, Node::A(i))],
                            interior: vec![],
                        });
                    }
                }
            }
            Node::T => {
                while ps.t_cursor < ps.t_list.len()
                    && !self.available(ps, Node::B(ps.t_list[ps.t_cursor]))
                {
                    ps.t_cursor += 1;
                }
                if let Some(&j) = ps.t_list.get(ps.t_cursor) {
                    offer(Step {
                        value: self.w(self.pi_b[j] - self.pi_t),
                        target: Node::B(j),
                        arcs: vec![bwd(u, Node::B(j))],
                        interior: vec![],
                    });
                }
            }
        }
        best
    }

    /// One pass of vertex-disjoint admissible augmenting paths; returns the
    /// number of paths augmented.
    pub fn blocking_pass(&mut self) -> Result<usize> {
        let tol = SLACK * self.theta + 2.0 * self.noise(0);
        let tok2 = self.s2.checkpoint();
        let tok3 = self.s3.checkpoint_frozen();
        let tok4 = self.s4.checkpoint();
        let mut ps = PassState::default();
        for v in self.alive_with(|x| x < 0) {
            ps.remaining.insert(v, -self.net.imbalance(v));
        }
        let mut s_list: Vec<usize> = self
            .alive_a_set
            .iter()
            .copied()
            .filter(|&i| !self.net.sa_saturated(i))
            .collect();
        s_list.sort_by_key(|&x| (self.pi_a[x], x));
        let mut t_list: Vec<usize> = self
            .alive_b_set
            .iter()
            .copied()
            .filter(|&j| self.net.bt_saturated(j))
            .collect();
        t_list.sort_by_key(|&x| (self.pi_b[x], x));
        ps.s_list = s_list;
        ps.t_list = t_list;

        let mut paths: Vec<Vec<ResidualArc>> = Vec::new();
        for source in self.alive_with(|x| x > 0) {
            if self.visited(&ps, source) {
                continue;
            }
            self.mark_visited(&mut ps, source)?;
            let mut left = self.net.imbalance(source);
            let mut stack = vec![Frame {
                node: source,
                arcs_in: vec![],
                interior: vec![],
            }];
            while left > 0 && !stack.is_empty() {
                let u = stack.last().expect("non-empty").node;
                let step = self.best_step(&mut ps, u).filter(|s| s.value <= tol);
                let Some(step) = step else {
                    let frame = stack.pop().expect("non-empty");
                    for v in frame.interior {
                        self.unhide_dead(v)?;
                    }
                    continue;
                };
                for &v in &step.interior {
                    self.hide_dead(v)?;
                }
                let target = step.target;
                if let Some(r) = ps.remaining.get_mut(&target).filter(|r| **r > 0) {
                    *r -= 1;
                    let exhausted = *r == 0;
                    let mut path: Vec<ResidualArc> =
                        stack.drain(1..).flat_map(|f| f.arcs_in).collect();
                    path.extend(step.arcs);
                    paths.push(path);
                    if exhausted {
                        self.mark_visited(&mut ps, target)?;
                    }
                    left -= 1;
                    continue;
                }
                self.mark_visited(&mut ps, target)?;
                stack.push(Frame {
                    node: target,
                    arcs_in: step.arcs,
                    interior: step.interior,
                });
            }
        }

        for v in ps.touched.drain(..) {
            match v {
                Node::A(i) => self.visited_a[i] = false,
                Node::B(j) => self.visited_b[j] = false,
                _ => {}
            }
        }
        self.s2.rewind(tok2)?;
        self.s3.rewind(tok3)?;
        self.s4.rewind(tok4)?;
        let mut touched = BTreeSet::new();
        for path in &paths {
            self.net.augment_by(path)?;
            for arc in path {
                touched.insert(arc.tail);
                touched.insert(arc.head);
            }
        }
        for v in touched {
            self.refresh_status(v)?;
        }
        self.s2.commit();
        self.s3.commit();
        self.s4.commit();
        self.stats.passes += 1;
        self.current.passes += 1;
        self.current.paths += paths.len();
        self.stats.max_alive = self.stats.max_alive.max(self.alive_count());
        Ok(paths.len())
    }

    /// Routes all excess: each iteration is one search followed by blocking
    /// passes until none succeeds.
    pub fn refine(&mut self) -> Result<()> {
        while self.net.total_excess() > 0 {
            self.hungarian_search()?;
            if self.blocking_pass()? == 0 {
                return Err(GpmError::Internal(
                    "search ended without an admissible augmenting path".into(),
                ));
            }
            while self.net.total_excess() > 0 && self.blocking_pass()? > 0 {}
            self.current.iterations += 1;
            self.stats.iterations += 1;
        }
        Ok(())
    }

    /// Runs one scale (initialisation and refinement) and records it.
    pub fn run_scale(&mut self) -> Result<()> {
        self.scale_init()?;
        self.refine()?;
        self.current.cost = self.net.flow_cost();
        self.stats.scales.push(self.current.clone());
        Ok(())
    }

    /// Runs all scales and returns the matching of the final circulation.
    pub fn run(mut self) -> Result<ApproxSolution> {
        loop {
            self.run_scale()?;
            if !self.next_scale() {
                break;
            }
        }
        self.stats.bcp_ops += self.bcp_ops();
        let matching = self.net.to_matching()?;
        Ok(ApproxSolution {
            matching,
            stats: self.stats,
        })
    }
}

/// A size-`k` matching of cost at most `(1+ε)` times the optimum.
pub fn solve_approx(
    a: &[Point],
    b: &[Point],
    k: usize,
    params: CostParams,
    eps: f64,
) -> Result<ApproxSolution> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(GpmError::InvalidEpsilon(eps));
    }
    validate_set(a)?;
    validate_set(b)?;
    if k == 0 {
        return Ok(ApproxSolution {
            matching: Matching::empty(),
            stats: ApproxStats::default(),
        });
    }
    let scale = starting_scale_index(a, b, k, params)?;
    if scale.edge_cost == 0.0 {
        let pairs = intra_cluster_matching(a, b, k, &scale)
            .into_iter()
            .map(|(i, j)| (a[i as usize].id, b[j as usize].id))
            .collect();
        return Ok(ApproxSolution {
            matching: Matching::from_pairs(pairs, a, b, params)?,
            stats: ApproxStats::default(),
        });
    }
    CostScalingSolver::new(a, b, k, params, eps)?.run()
}
