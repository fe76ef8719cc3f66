//! Excess scaling over a sparse acyclic support.
//!
//! Every search grows `X` from the active excess components. Support and
//! contracted arcs are followed as soon as an endpoint enters (they have
//! reduced cost zero); all other arcs are found with weighted BCP queries:
//! one structure for alive `B` nodes outside stars, one pooled structure for
//! the members of light stars, and one per heavy star. A `B` node with a
//! single support arc belongs to the star of its neighbour and carries no
//! potential of its own: `π(b) = π(a) − c(a, b)`.
//!
//! Flows and imbalances are exact dyadic rationals. Arcs whose flow reaches
//! `3NΔ` (with `N = |A| + |B|`) are contracted and restored in LIFO order
//! once all imbalances vanish.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use super::{TransportConfig, TransportPlan, TransportSolution, TransportStats};
use crate::bcp::{weighted_cost, BcpStructure, CheckpointToken, Side, WeightedPoint};
use crate::dyadic::Dyadic;
use crate::error::{GpmError, Result};
use crate::geometry::{cost, CostParams, Point, UnionFind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Via {
    New,
    Support,
    Contracted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Dead,
    Main,
    Star(usize),
}

#[derive(Debug, Clone)]
struct Contraction {
    a: usize,
    b: usize,
    flow: Dyadic,
    delta: Dyadic,
    // Merge-tree node holding the `a` side.
    left: usize,
}

fn internal(msg: &str) -> GpmError {
    GpmError::Internal(msg.to_string())
}

pub struct ExcessScaling<'p> {
    a: &'p [Point],
    b: &'p [Point],
    params: CostParams,
    cfg: TransportConfig,
    r: usize,
    n: usize,
    total: i64,
    started: bool,
    finished: bool,
    delta: Dyadic,
    phi: Vec<Dyadic>,
    uf: UnionFind,
    // Indexed by component root.
    imb: Vec<Dyadic>,
    members: Vec<Vec<usize>>,
    comp_node: Vec<usize>,
    merge_tree: Vec<(usize, usize)>,
    flow: BTreeMap<(usize, usize), Dyadic>,
    contracted: Vec<Contraction>,
    contracted_set: HashSet<(usize, usize)>,
    adj_a: Vec<Vec<usize>>,
    adj_b: Vec<Vec<usize>>,
    class: Vec<Class>,
    star: Vec<BTreeSet<usize>>,
    heavy: Vec<Option<BcpStructure>>,
    heavy_owners: BTreeSet<usize>,
    updates: Vec<usize>,
    reclassified: Vec<bool>,
    // Singleton star members that are active deficits, by owner.
    star_targets: Vec<BTreeSet<usize>>,
    pi_a: Vec<f64>,
    pi_b: Vec<f64>,
    main: BcpStructure,
    pool: BcpStructure,
    act_exc: BTreeSet<usize>,
    act_def: BTreeSet<usize>,
    in_x: Vec<bool>,
    entry: Vec<f64>,
    parent: Vec<Option<(usize, Via)>>,
    touched: Vec<usize>,
    comp_seen: Vec<bool>,
    seen_roots: Vec<usize>,
    frozen: Vec<bool>,
    frozen_list: Vec<usize>,
    stats: TransportStats,
    dropped_ops: u64,
}

impl<'p> ExcessScaling<'p> {
    /// Expects an instance already checked by
    /// [`super::validate_instance`] with `|A| ≤ |B|`.
    pub fn new(
        a: &'p [Point],
        b: &'p [Point],
        supply: &[i64],
        demand: &[i64],
        params: CostParams,
        cfg: TransportConfig,
    ) -> Result<Self> {
        super::validate_instance(a, b, supply, demand)?;
        let (r, n) = (a.len(), b.len());
        let nn = r + n;
        let phi: Vec<Dyadic> = supply
            .iter()
            .map(|&s| Dyadic::from_int(s))
            .chain(demand.iter().map(|&d| Dyadic::from_int(-d)))
            .collect();
        Ok(ExcessScaling {
            a,
            b,
            params,
            cfg,
            r,
            n,
            total: supply.iter().sum(),
            started: false,
            finished: false,
            delta: Dyadic::from_int(supply.iter().sum()),
            imb: phi.clone(),
            phi,
            uf: UnionFind::new(nn),
            members: (0..nn).map(|v| vec![v]).collect(),
            comp_node: (0..nn).collect(),
            merge_tree: Vec::new(),
            flow: BTreeMap::new(),
            contracted: Vec::new(),
            contracted_set: HashSet::new(),
            adj_a: vec![Vec::new(); r],
            adj_b: vec![Vec::new(); n],
            class: vec![Class::Dead; n],
            star: vec![BTreeSet::new(); r],
            heavy: (0..r).map(|_| None).collect(),
            heavy_owners: BTreeSet::new(),
            updates: vec![0; r],
            reclassified: vec![false; r],
            star_targets: vec![BTreeSet::new(); r],
            pi_a: vec![0.0; r],
            pi_b: vec![0.0; n],
            main: BcpStructure::new(params),
            pool: BcpStructure::new(params),
            act_exc: BTreeSet::new(),
            act_def: BTreeSet::new(),
            in_x: vec![false; nn],
            entry: vec![0.0; nn],
            parent: vec![None; nn],
            touched: Vec::new(),
            comp_seen: vec![false; nn],
            seen_roots: Vec::new(),
            frozen: vec![false; r],
            frozen_list: Vec::new(),
            stats: TransportStats {
                method: "excess-scaling".into(),
                ..Default::default()
            },
            dropped_ops: 0,
        })
    }

    fn c(&self, x: usize, j: usize) -> f64 {
        cost(&self.a[x], &self.b[j], self.params)
    }

    fn a_wp(&self, x: usize, w: f64) -> WeightedPoint {
        WeightedPoint::new(self.a[x], w)
    }

    fn b_wp(&self, j: usize, w: f64) -> WeightedPoint {
        WeightedPoint::new(self.b[j], w)
    }

    fn via(&self, x: usize, j: usize) -> Via {
        if self.contracted_set.contains(&(x, j)) {
            Via::Contracted
        } else {
            Via::Support
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta.to_f64()
    }

    pub fn stats(&self) -> &TransportStats {
        &self.stats
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Tracked support arcs `(a, b, flow)`, contracted arcs excluded.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        self.flow.iter().map(|(&(x, j), f)| (x, j, f.to_f64())).collect()
    }

    pub fn contracted_arcs(&self) -> Vec<(usize, usize)> {
        self.contracted.iter().map(|c| (c.a, c.b)).collect()
    }

    pub fn is_heavy(&self, x: usize) -> bool {
        self.heavy[x].is_some()
    }

    pub fn star_size(&self, x: usize) -> usize {
        self.star[x].len()
    }

    pub fn potential_a(&self, x: usize) -> f64 {
        self.pi_a[x]
    }

    pub fn potential_b(&self, j: usize) -> f64 {
        match self.class[j] {
            Class::Star(o) => self.pi_a[o] - self.c(o, j),
            Class::Main => self.pi_b[j],
            Class::Dead => self.recovered(j),
        }
    }

    // Smallest potential keeping every arc into a dead node feasible.
    fn recovered(&self, j: usize) -> f64 {
        (0..self.r)
            .map(|x| self.pi_a[x] - self.c(x, j))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest dual violation: negative reduced cost on any arc, or nonzero
    /// reduced cost on a support or contracted arc.
    pub fn dual_violation(&self) -> f64 {
        let pb: Vec<f64> = (0..self.n).map(|j| self.potential_b(j)).collect();
        let mut worst = 0.0f64;
        for x in 0..self.r {
            for (j, &p) in pb.iter().enumerate() {
                let rc = self.c(x, j) - self.pi_a[x] + p;
                worst = worst.max(-rc);
                if self.flow.contains_key(&(x, j)) || self.contracted_set.contains(&(x, j)) {
                    worst = worst.max(rc.abs());
                }
            }
        }
        worst
    }

    /// One push or one scale transition; `false` once all imbalances vanish.
    pub fn advance(&mut self) -> Result<bool> {
        if self.finished {
            return Ok(false);
        }
        if !self.started {
            self.started = true;
            if self.total == 0 {
                self.finished = true;
                return Ok(false);
            }
            self.begin_scale(true)?;
            return Ok(true);
        }
        if !self.act_exc.is_empty() && !self.act_def.is_empty() {
            self.step()?;
            return Ok(true);
        }
        if (0..self.r + self.n).all(|v| self.imb[v].is_zero()) {
            self.finished = true;
            return Ok(false);
        }
        self.begin_scale(false)?;
        Ok(true)
    }

    pub fn run(self) -> Result<TransportSolution> {
        self.finish()
    }
}

// Scale bookkeeping.
impl<'p> ExcessScaling<'p> {
    fn begin_scale(&mut self, first: bool) -> Result<()> {
        if !first {
            self.delta = self.delta.half();
            if self.delta.exponent() < -80 {
                return Err(internal("push quantum underflow"));
            }
        }
        self.stats.scales += 1;
        let big = self.delta.mul_int(3 * (self.r + self.n) as i64);
        let heavy_arcs: Vec<(usize, usize)> = self
            .flow
            .iter()
            .filter(|(_, f)| **f >= big)
            .map(|(&e, _)| e)
            .collect();
        for (x, j) in heavy_arcs {
            self.contract(x, j)?;
        }
        if self.cfg.check_invariants {
            self.scan_contractions()?;
        }
        self.recompute_active();
        if self.act_exc.is_empty() && self.flow.is_empty() {
            let top = (0..self.r + self.n).map(|v| self.imb[v]).max().unwrap_or(Dyadic::ZERO);
            if top.signum() > 0 && top != self.delta {
                self.delta = top;
                self.stats.delta_resets += 1;
                self.recompute_active();
            }
        }
        let active: Vec<usize> = self.act_exc.iter().chain(&self.act_def).copied().collect();
        for root in active {
            for m in self.members[root].clone() {
                if m >= self.r && self.class[m - self.r] == Class::Dead {
                    self.make_alive(m - self.r)?;
                }
            }
        }
        self.stats.max_alive_nonstar = self.stats.max_alive_nonstar.max(self.main.len(Side::Q));
        Ok(())
    }

    fn make_alive(&mut self, j: usize) -> Result<()> {
        self.pi_b[j] = self.recovered(j);
        self.class[j] = Class::Main;
        let wp = self.b_wp(j, self.pi_b[j]);
        self.main.insert(Side::Q, wp)
    }

    fn contract(&mut self, x: usize, j: usize) -> Result<()> {
        let f = self.flow.remove(&(x, j)).ok_or_else(|| internal("contracting an idle arc"))?;
        let (ra, rb) = (self.uf.find(x), self.uf.find(self.r + j));
        if ra == rb {
            return Err(internal("contracted arc closes a cycle"));
        }
        let (left, right) = (self.comp_node[ra], self.comp_node[rb]);
        let total = self.imb[ra] + self.imb[rb];
        let root = self.uf.union(ra, rb).expect("distinct components");
        let other = if root == ra { rb } else { ra };
        self.imb[root] = total;
        self.imb[other] = Dyadic::ZERO;
        let moved = std::mem::take(&mut self.members[other]);
        self.members[root].extend(moved);
        self.merge_tree.push((left, right));
        self.comp_node[root] = self.r + self.n + self.merge_tree.len() - 1;
        self.contracted_set.insert((x, j));
        self.contracted.push(Contraction {
            a: x,
            b: j,
            flow: f,
            delta: self.delta,
            left,
        });
        self.stats.contractions += 1;
        Ok(())
    }

    fn scan_contractions(&mut self) -> Result<()> {
        let nn = 3 * (self.r + self.n) as i64;
        if self.contracted.iter().any(|c| c.flow < c.delta.mul_int(nn)) {
            return Err(internal("arc contracted below the threshold"));
        }
        let big = self.delta.mul_int(nn);
        if self.flow.values().any(|f| *f >= big) {
            return Err(internal("arc above the threshold left uncontracted"));
        }
        self.stats.contraction_scans += 1;
        Ok(())
    }

    fn recompute_active(&mut self) {
        self.act_exc.clear();
        self.act_def.clear();
        for v in 0..self.r + self.n {
            if self.uf.find(v) == v {
                self.refresh_active(v);
            }
        }
        for j in 0..self.n {
            self.refresh_star_target(j);
        }
    }

    fn refresh_active(&mut self, root: usize) {
        self.act_exc.remove(&root);
        self.act_def.remove(&root);
        let (num, den) = self.cfg.alpha;
        let thr = self.delta.mul_int(num);
        let v = self.imb[root].mul_int(den);
        if v >= thr {
            self.act_exc.insert(root);
        } else if -v >= thr {
            self.act_def.insert(root);
        }
        if root >= self.r {
            self.refresh_star_target(root - self.r);
        }
    }

    fn refresh_star_target(&mut self, j: usize) {
        if let Class::Star(o) = self.class[j] {
            let v = self.r + j;
            if self.uf.find(v) == v && self.members[v].len() == 1 && self.act_def.contains(&v) {
                self.star_targets[o].insert(j);
            } else {
                self.star_targets[o].remove(&j);
            }
        }
    }

    // Moves `b` between the main structure and star structures after its
    // support changed.
    fn update_class(&mut self, j: usize, owners: &mut BTreeSet<usize>) -> Result<()> {
        let old = self.class[j];
        let new = if self.adj_b[j].len() == 1 {
            Class::Star(self.adj_b[j][0])
        } else {
            Class::Main
        };
        if old == new {
            return Ok(());
        }
        match old {
            Class::Star(o) => {
                self.pi_b[j] = self.pi_a[o] - self.c(o, j);
                self.star[o].remove(&j);
                self.star_targets[o].remove(&j);
                match self.heavy[o].as_mut() {
                    Some(h) => h.delete(Side::Q, j as u32)?,
                    None => self.pool.delete(Side::Q, j as u32)?,
                };
                self.updates[o] += 1;
                owners.insert(o);
            }
            Class::Main => {
                self.main.delete(Side::Q, j as u32)?;
            }
            Class::Dead => return Err(internal("dead node on an augmenting path")),
        }
        self.class[j] = new;
        match new {
            Class::Star(o) => {
                self.star[o].insert(j);
                let c = self.c(o, j);
                match self.heavy[o].is_some() {
                    true => {
                        let wp = self.b_wp(j, -c);
                        self.heavy[o].as_mut().expect("heavy").insert(Side::Q, wp)?;
                    }
                    false => {
                        let wp = self.b_wp(j, self.pi_a[o] - c);
                        self.pool.insert(Side::Q, wp)?;
                    }
                }
                self.updates[o] += 1;
                owners.insert(o);
            }
            _ => {
                let wp = self.b_wp(j, self.pi_b[j]);
                self.main.insert(Side::Q, wp)?;
            }
        }
        self.refresh_star_target(j);
        Ok(())
    }

    fn reclassify(&mut self, o: usize) -> Result<()> {
        if !self.cfg.classify_stars {
            return Ok(());
        }
        let s = self.star[o].len();
        let to_heavy = self.heavy[o].is_none() && s * s > 4 * self.n;
        let to_light = self.heavy[o].is_some() && s * s < self.n;
        if !to_heavy && !to_light {
            return Ok(());
        }
        if self.reclassified[o] {
            self.stats.reclass_gaps.push(self.updates[o]);
        }
        self.reclassified[o] = true;
        self.updates[o] = 0;
        self.stats.reclassifications += 1;
        let members: Vec<usize> = self.star[o].iter().copied().collect();
        if to_heavy {
            let mut q = Vec::with_capacity(members.len());
            for &j in &members {
                self.pool.delete(Side::Q, j as u32)?;
                q.push(self.b_wp(j, -self.c(o, j)));
            }
            self.heavy[o] = Some(BcpStructure::from_points(self.params, &[], &q)?);
            self.heavy_owners.insert(o);
            self.stats.max_heavy = self.stats.max_heavy.max(self.heavy_owners.len());
        } else {
            let h = self.heavy[o].take().expect("heavy");
            self.dropped_ops += h.op_count();
            self.heavy_owners.remove(&o);
            for &j in &members {
                let wp = self.b_wp(j, self.pi_a[o] - self.c(o, j));
                self.pool.insert(Side::Q, wp)?;
            }
        }
        Ok(())
    }

    fn check_forest(&mut self) -> Result<()> {
        let nn = self.r + self.n;
        let mut uf = UnionFind::new(nn);
        for &(x, j) in self.flow.keys().chain(self.contracted_set.iter()) {
            if uf.union(x, self.r + j).is_none() {
                return Err(internal("support contains a cycle"));
            }
        }
        if self.flow.len() + self.contracted_set.len() > nn.saturating_sub(1) {
            return Err(internal("support exceeds a spanning forest"));
        }
        self.stats.acyclicity_checks += 1;
        Ok(())
    }
}

// Searches and pushes.
impl<'p> ExcessScaling<'p> {
    // Adds `v` and everything reachable over support and contracted arcs.
    // Returns the node at which an active deficit was reached.
    fn enter(&mut self, v: usize, par: Option<(usize, Via)>, d: f64) -> Result<Option<usize>> {
        let mut queue = VecDeque::new();
        queue.push_back((v, par));
        while let Some((x, par)) = queue.pop_front() {
            if self.in_x[x] {
                continue;
            }
            self.in_x[x] = true;
            self.entry[x] = d;
            self.parent[x] = par;
            self.touched.push(x);
            let root = self.uf.find(x);
            if !self.comp_seen[root] {
                self.comp_seen[root] = true;
                self.seen_roots.push(root);
                if self.act_def.contains(&root) {
                    return Ok(Some(x));
                }
                for &m in &self.members[root] {
                    if m != x {
                        queue.push_back((m, Some((x, Via::Contracted))));
                    }
                }
            }
            if x < self.r {
                let wp = self.a_wp(x, self.pi_a[x] - d);
                self.main.insert(Side::P, wp)?;
                self.pool.insert(Side::P, wp)?;
                for &o in &self.heavy_owners {
                    if !self.frozen[o] {
                        self.heavy[o].as_mut().expect("heavy").insert(Side::P, wp)?;
                    }
                }
                if self.heavy[x].is_some() {
                    self.frozen[x] = true;
                    self.frozen_list.push(x);
                } else {
                    for &j in &self.star[x] {
                        if self.pool.contains(Side::Q, j as u32) {
                            self.pool.delete(Side::Q, j as u32)?;
                        }
                    }
                }
                if let Some(&j) = self.star_targets[x].iter().next() {
                    let t = self.r + j;
                    self.in_x[t] = true;
                    self.entry[t] = d;
                    self.parent[t] = Some((x, Via::Support));
                    self.touched.push(t);
                    return Ok(Some(t));
                }
                for &j in &self.adj_a[x] {
                    if self.class[j] != Class::Star(x) {
                        queue.push_back((self.r + j, Some((x, self.via(x, j)))));
                    }
                }
            } else {
                let j = x - self.r;
                match self.class[j] {
                    Class::Main => {
                        self.main.delete(Side::Q, j as u32)?;
                    }
                    Class::Dead => return Err(internal("dead node entered a search")),
                    Class::Star(_) => {}
                }
                for &o in &self.adj_b[j] {
                    queue.push_back((o, Some((x, self.via(o, j)))));
                }
            }
        }
        Ok(None)
    }

    // Cheapest relaxable arc `(key, a, b)` over all structures. Keys of
    // heavy-star answers are recomputed in the pooled form so that ties
    // break identically with or without classification.
    fn best_candidate(&mut self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        let mut offer = |c: (f64, usize, usize)| {
            let better = match best {
                None => true,
                Some(b) => c.0.total_cmp(&b.0).then((c.1, c.2).cmp(&(b.1, b.2))).is_lt(),
            };
            if better {
                best = Some(c);
            }
        };
        for s in [&mut self.main, &mut self.pool] {
            if let Some(p) = s.query_min() {
                offer((p.cost, p.p_id as usize, p.q_id as usize));
            }
        }
        for &o in &self.heavy_owners {
            if self.frozen[o] {
                continue;
            }
            let Some(p) = self.heavy[o].as_mut().expect("heavy").query_min() else {
                continue;
            };
            let (x, j) = (p.p_id as usize, p.q_id as usize);
            let wa = WeightedPoint::new(self.a[x], self.pi_a[x] - self.entry[x]);
            let cb = cost(&self.a[o], &self.b[j], self.params);
            let wb = WeightedPoint::new(self.b[j], self.pi_a[o] - cb);
            offer((weighted_cost(&wa, &wb, self.params), x, j));
        }
        best
    }

    fn step(&mut self) -> Result<()> {
        let tok_main = self.main.checkpoint();
        let tok_pool = self.pool.checkpoint();
        let heavy_toks: Vec<(usize, CheckpointToken)> = self
            .heavy_owners
            .iter()
            .map(|&o| (o, self.heavy[o].as_mut().expect("heavy").checkpoint()))
            .collect::<Vec<_>>();
        let sources: Vec<usize> = self.act_exc.iter().copied().collect();
        let mut d = 0.0f64;
        let mut target = None;
        for s in sources {
            target = self.enter(s, None, 0.0)?;
            if target.is_some() {
                break;
            }
        }
        let mut relaxations = 0;
        while target.is_none() {
            let (key, x, j) = self
                .best_candidate()
                .ok_or_else(|| internal("no active deficit is reachable"))?;
            d = d.max(key);
            relaxations += 1;
            if self.cfg.trace {
                self.stats.trace.push((x as u32, j as u32));
            }
            target = self.enter(self.r + j, Some((x, Via::New)), d)?;
        }
        let t = target.expect("target");

        self.main.rewind(tok_main)?;
        self.main.commit();
        self.pool.rewind(tok_pool)?;
        self.pool.commit();
        for (o, tok) in heavy_toks {
            let h = self.heavy[o].as_mut().expect("heavy");
            h.rewind(tok)?;
            h.commit();
        }

        let touched = std::mem::take(&mut self.touched);
        for &v in &touched {
            let shift = d - self.entry[v];
            if shift == 0.0 {
                continue;
            }
            if v < self.r {
                self.pi_a[v] += shift;
                if self.heavy[v].is_none() {
                    let members: Vec<usize> = self.star[v].iter().copied().collect();
                    for j in members {
                        self.pool.delete(Side::Q, j as u32)?;
                        let wp = self.b_wp(j, self.pi_a[v] - self.c(v, j));
                        self.pool.insert(Side::Q, wp)?;
                    }
                }
            } else {
                let j = v - self.r;
                if self.class[j] == Class::Main {
                    self.pi_b[j] += shift;
                    self.main.delete(Side::Q, j as u32)?;
                    let wp = self.b_wp(j, self.pi_b[j]);
                    self.main.insert(Side::Q, wp)?;
                }
            }
        }

        let mut path = Vec::new();
        let mut v = t;
        while let Some((p, via)) = self.parent[v] {
            if via != Via::Contracted {
                if v >= self.r {
                    path.push((p, v - self.r, true));
                } else {
                    path.push((v, p - self.r, false));
                }
            }
            v = p;
        }
        let src = v;
        for &v in &touched {
            self.in_x[v] = false;
            self.parent[v] = None;
        }
        self.touched = touched;
        self.touched.clear();
        for root in self.seen_roots.drain(..) {
            self.comp_seen[root] = false;
        }
        for o in self.frozen_list.drain(..) {
            self.frozen[o] = false;
        }

        self.push(&path, src, t)?;
        self.stats.augmentations += 1;
        self.stats.relaxations += relaxations;
        self.stats.max_relaxations = self.stats.max_relaxations.max(relaxations);
        Ok(())
    }

    // Sends Δ along `path` (arcs `(a, b, forward)`) from `src` to `t`.
    fn push(&mut self, path: &[(usize, usize, bool)], src: usize, t: usize) -> Result<()> {
        let delta = self.delta;
        let mut changed = BTreeSet::new();
        for &(x, j, forward) in path {
            if forward {
                if self.contracted_set.contains(&(x, j)) {
                    return Err(internal("pushing over a contracted arc"));
                }
                let f = self.flow.entry((x, j)).or_insert(Dyadic::ZERO);
                if f.is_zero() {
                    self.adj_a[x].push(j);
                    self.adj_b[j].push(x);
                    changed.insert(j);
                }
                *f += delta;
            } else {
                let f = self
                    .flow
                    .get_mut(&(x, j))
                    .ok_or_else(|| internal("backward arc without flow"))?;
                if *f < delta {
                    return Err(internal("backward residual below the push quantum"));
                }
                *f -= delta;
                if f.is_zero() {
                    self.flow.remove(&(x, j));
                    self.adj_a[x].retain(|&y| y != j);
                    self.adj_b[j].retain(|&y| y != x);
                    changed.insert(j);
                }
            }
        }
        let (rs, rt) = (self.uf.find(src), self.uf.find(t));
        self.imb[rs] -= delta;
        self.imb[rt] += delta;
        let mut owners = BTreeSet::new();
        for j in changed {
            self.update_class(j, &mut owners)?;
        }
        self.refresh_active(rs);
        self.refresh_active(rt);
        for o in owners {
            self.reclassify(o)?;
        }
        let support = self.flow.len() + self.contracted.len();
        self.stats.max_support = self.stats.max_support.max(support);
        self.stats.max_alive_nonstar = self.stats.max_alive_nonstar.max(self.main.len(Side::Q));
        if self.cfg.check_invariants {
            self.check_forest()?;
        }
        Ok(())
    }
}

// Flow recovery.
impl<'p> ExcessScaling<'p> {
    fn leaves(&self, node: usize) -> Vec<usize> {
        let nn = self.r + self.n;
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if v < nn {
                out.push(v);
            } else {
                let (l, r) = self.merge_tree[v - nn];
                stack.push(l);
                stack.push(r);
            }
        }
        out
    }

    /// Expands contracted arcs newest first and returns the plan. Each
    /// restored flow balances the `a` side of its arc as it was when the
    /// arc was contracted.
    pub fn finish(mut self) -> Result<TransportSolution> {
        while self.advance()? {}
        let (r, nn) = (self.r, self.r + self.n);
        let mut flows: HashMap<(usize, usize), Dyadic> = self.flow.iter().map(|(&e, &f)| (e, f)).collect();
        let mut in_l = vec![false; nn];
        for c in self.contracted.iter().rev() {
            let side = self.leaves(c.left);
            for &v in &side {
                in_l[v] = true;
            }
            let mut phi = Dyadic::ZERO;
            let mut net_out = Dyadic::ZERO;
            let missing = || internal("crossing arc restored out of order");
            for &v in &side {
                phi += self.phi[v];
                if v < r {
                    for &j in &self.adj_a[v] {
                        if !in_l[r + j] && (v, j) != (c.a, c.b) {
                            net_out += *flows.get(&(v, j)).ok_or_else(missing)?;
                        }
                    }
                } else {
                    for &x in &self.adj_b[v - r] {
                        if !in_l[x] {
                            net_out -= *flows.get(&(x, v - r)).ok_or_else(missing)?;
                        }
                    }
                }
            }
            for &v in &side {
                in_l[v] = false;
            }
            let f = phi - net_out;
            if f.signum() < 0 {
                return Err(GpmError::Conservation(format!(
                    "restored arc ({}, {}) would carry {}",
                    c.a, c.b, f
                )));
            }
            flows.insert((c.a, c.b), f);
        }

        let mut balance = self.phi.clone();
        for (&(x, j), &f) in &flows {
            balance[x] -= f;
            balance[r + j] += f;
        }
        if let Some(v) = balance.iter().position(|x| !x.is_zero()) {
            return Err(GpmError::Conservation(format!(
                "node {v} is left with imbalance {}",
                balance[v]
            )));
        }
        let list = flows
            .iter()
            .filter(|(_, f)| !f.is_zero())
            .map(|(&(x, j), f)| (self.a[x].id, self.b[j].id, f.to_f64()))
            .collect();
        let plan = TransportPlan::from_flows(list, self.a, self.b, self.params);
        self.stats.bcp_ops = self.main.op_count()
            + self.pool.op_count()
            + self.dropped_ops
            + self.heavy.iter().flatten().map(|h| h.op_count()).sum::<u64>();
        Ok(TransportSolution {
            plan,
            stats: self.stats,
        })
    }
}
