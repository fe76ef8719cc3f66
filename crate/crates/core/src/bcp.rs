//! Dynamic additively weighted bichromatic closest pair.
//!
//! Two weighted point sets `P` and `Q`; a query returns the pair
//! `(a, b) ∈ P × Q` minimising `c(a, b) − ω(a) + ω(b)`, ties broken by
//! `(a.id, b.id)`. Each side is a logarithmic collection of static kd-trees
//! with tombstoned deletions. The minimum is kept in a lazy heap of
//! per-point best partners: an inserted point gets its partner from a
//! nearest-neighbour query, and deleting a point recomputes the partners of
//! the points that pointed at it. Updates made while a checkpoint is
//! outstanding are logged so the structure can be rewound by replaying
//! inverse updates.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::error::{GpmError, Result};
use crate::geometry::{CostParams, Point};

const LEAF_SIZE: usize = 8;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    P,
    Q,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::P => 0,
            Side::Q => 1,
        }
    }

    fn other(self) -> Side {
        match self {
            Side::P => Side::Q,
            Side::Q => Side::P,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Side::P => "P",
            Side::Q => "Q",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub point: Point,
    pub weight: f64,
}

impl WeightedPoint {
    pub fn new(point: Point, weight: f64) -> Self {
        WeightedPoint { point, weight }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Insert,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub kind: OpKind,
    pub side: Side,
    pub point: WeightedPoint,
}

/// A query answer: ids on the P and Q side and the weighted cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcpPair {
    pub p_id: u32,
    pub q_id: u32,
    pub cost: f64,
}

impl BcpPair {
    /// Strict lexicographic order on `(cost, p_id, q_id)`.
    pub fn precedes(&self, other: &BcpPair) -> bool {
        match self.cost.total_cmp(&other.cost) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => (self.p_id, self.q_id) < (other.p_id, other.q_id),
        }
    }
}

/// The weighted cost `c(a, b) − ω(a) + ω(b)` evaluated exactly as the
/// structure does; oracles must use this expression to compare bit-for-bit.
#[inline]
pub fn weighted_cost(a: &WeightedPoint, b: &WeightedPoint, params: CostParams) -> f64 {
    let c = params.cost_from_deltas((a.point.x - b.point.x).abs(), (a.point.y - b.point.y).abs());
    (c - a.weight) + b.weight
}

/// Opaque handle returned by [`BcpStructure::checkpoint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointToken {
    serial: u64,
    position: usize,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    x: f64,
    y: f64,
    w: f64,
    id: u32,
    alive: bool,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
    w_min: f64,
    w_max: f64,
    start: u32,
    end: u32,
    left: u32,
    right: u32,
    parent: u32,
    alive: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == NONE
    }

    fn extent(&self) -> f64 {
        (self.max_x - self.min_x).max(self.max_y - self.min_y)
    }
}

#[derive(Debug, Clone)]
struct KdTree {
    entries: Vec<Entry>,
    nodes: Vec<Node>,
    leaf_of: Vec<u32>,
    dead: usize,
    gen: u64,
}

impl KdTree {
    fn build(mut entries: Vec<Entry>) -> KdTree {
        let n = entries.len();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 2);
        let mut leaf_of = vec![0u32; n];
        Self::build_rec(&mut entries, 0, n, NONE, &mut nodes, &mut leaf_of);
        KdTree {
            entries,
            nodes,
            leaf_of,
            dead: 0,
            gen: 0,
        }
    }

    fn build_rec(
        entries: &mut [Entry],
        start: usize,
        end: usize,
        parent: u32,
        nodes: &mut Vec<Node>,
        leaf_of: &mut [u32],
    ) -> u32 {
        let slice = &entries[start..end];
        let mut node = Node {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
            w_min: f64::INFINITY,
            w_max: f64::NEG_INFINITY,
            start: start as u32,
            end: end as u32,
            left: NONE,
            right: NONE,
            parent,
            alive: (end - start) as u32,
        };
        for e in slice {
            node.min_x = node.min_x.min(e.x);
            node.min_y = node.min_y.min(e.y);
            node.max_x = node.max_x.max(e.x);
            node.max_y = node.max_y.max(e.y);
            node.w_min = node.w_min.min(e.w);
            node.w_max = node.w_max.max(e.w);
        }
        let idx = nodes.len() as u32;
        nodes.push(node);
        if end - start <= LEAF_SIZE {
            for slot in leaf_of.iter_mut().take(end).skip(start) {
                *slot = idx;
            }
            return idx;
        }
        let mid = start + (end - start) / 2;
        let split_x = node.max_x - node.min_x >= node.max_y - node.min_y;
        entries[start..end].select_nth_unstable_by(mid - start, |a, b| {
            if split_x {
                a.x.total_cmp(&b.x).then(a.id.cmp(&b.id))
            } else {
                a.y.total_cmp(&b.y).then(a.id.cmp(&b.id))
            }
        });
        let left = Self::build_rec(entries, start, mid, idx, nodes, leaf_of);
        let right = Self::build_rec(entries, mid, end, idx, nodes, leaf_of);
        nodes[idx as usize].left = left;
        nodes[idx as usize].right = right;
        idx
    }

    fn alive(&self) -> usize {
        self.entries.len() - self.dead
    }

    fn kill(&mut self, slot: usize) {
        debug_assert!(self.entries[slot].alive);
        self.entries[slot].alive = false;
        self.dead += 1;
        let mut node = self.leaf_of[slot];
        while node != NONE {
            let n = &mut self.nodes[node as usize];
            n.alive -= 1;
            node = n.parent;
        }
    }

    fn revive(&mut self, slot: usize) {
        debug_assert!(!self.entries[slot].alive);
        self.entries[slot].alive = true;
        self.dead -= 1;
        let mut node = self.leaf_of[slot];
        while node != NONE {
            let n = &mut self.nodes[node as usize];
            n.alive += 1;
            node = n.parent;
        }
    }

    fn alive_entries(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| e.alive)
    }
}

#[derive(Debug, Clone, Copy)]
struct Loc {
    tree: u32,
    slot: u32,
}

#[derive(Debug, Clone, Default)]
struct SideSet {
    trees: Vec<Option<KdTree>>,
    loc: Vec<Option<Loc>>,
    // Tombstoned slot of a removed id and the generation of its tree.
    ghost: Vec<Option<(Loc, u64)>>,
    next_gen: u64,
    len: usize,
}

impl SideSet {
    fn from_points(points: &[WeightedPoint]) -> Result<SideSet> {
        let mut set = SideSet::default();
        for wp in points {
            if set.contains(wp.point.id) {
                return Err(GpmError::DuplicateId {
                    side: "?",
                    id: wp.point.id,
                });
            }
            set.ensure_id(wp.point.id);
            set.loc[wp.point.id as usize] = Some(Loc { tree: 0, slot: 0 });
        }
        if !points.is_empty() {
            let entries = points.iter().map(to_entry).collect();
            let level = points.len().next_power_of_two().trailing_zeros() as usize;
            set.place(level, entries);
        }
        Ok(set)
    }

    fn ensure_id(&mut self, id: u32) {
        if self.loc.len() <= id as usize {
            self.loc.resize(id as usize + 1, None);
            self.ghost.resize(id as usize + 1, None);
        }
    }

    fn contains(&self, id: u32) -> bool {
        self.loc.get(id as usize).is_some_and(|l| l.is_some())
    }

    fn place(&mut self, level: usize, entries: Vec<Entry>) {
        if self.trees.len() <= level {
            self.trees.resize_with(level + 1, || None);
        }
        let mut tree = KdTree::build(entries);
        self.next_gen += 1;
        tree.gen = self.next_gen;
        for (slot, e) in tree.entries.iter().enumerate() {
            self.loc[e.id as usize] = Some(Loc {
                tree: level as u32,
                slot: slot as u32,
            });
        }
        self.trees[level] = Some(tree);
    }

    fn insert(&mut self, wp: &WeightedPoint) {
        self.ensure_id(wp.point.id);
        if self.try_revive(wp) {
            self.len += 1;
            return;
        }
        let mut gathered = vec![to_entry(wp)];
        let mut level = 0;
        while let Some(slot) = self.trees.get_mut(level) {
            match slot.take() {
                Some(tree) => {
                    gathered.extend(tree.alive_entries().copied());
                    level += 1;
                }
                None => break,
            }
        }
        self.place(level, gathered);
        self.len += 1;
    }

    fn try_revive(&mut self, wp: &WeightedPoint) -> bool {
        let id = wp.point.id as usize;
        let Some((loc, gen)) = self.ghost[id].take() else {
            return false;
        };
        let Some(tree) = self.trees[loc.tree as usize].as_mut() else {
            return false;
        };
        if tree.gen != gen {
            return false;
        }
        let e = tree.entries[loc.slot as usize];
        if e.alive
            || e.id != wp.point.id
            || e.x != wp.point.x
            || e.y != wp.point.y
            || e.w.to_bits() != wp.weight.to_bits()
        {
            return false;
        }
        tree.revive(loc.slot as usize);
        self.loc[id] = Some(loc);
        true
    }

    fn remove(&mut self, id: u32) -> Option<WeightedPoint> {
        let loc = (*self.loc.get(id as usize)?)?;
        self.loc[id as usize] = None;
        let level = loc.tree as usize;
        let tree = self.trees[level].as_mut().expect("located tree exists");
        let e = tree.entries[loc.slot as usize];
        tree.kill(loc.slot as usize);
        self.ghost[id as usize] = Some((loc, tree.gen));
        self.len -= 1;
        if tree.alive() == 0 {
            self.trees[level] = None;
        } else if 2 * tree.dead >= tree.entries.len() {
            let entries: Vec<Entry> = tree.alive_entries().copied().collect();
            self.place(level, entries);
        }
        Some(from_entry(&e))
    }

    fn get(&self, id: u32) -> Option<WeightedPoint> {
        let loc = (*self.loc.get(id as usize)?)?;
        let tree = self.trees[loc.tree as usize].as_ref()?;
        Some(from_entry(&tree.entries[loc.slot as usize]))
    }

    fn live_trees(&self) -> impl Iterator<Item = &KdTree> {
        self.trees.iter().flatten().filter(|t| t.alive() > 0)
    }

    fn contents(&self) -> Vec<WeightedPoint> {
        let mut out: Vec<WeightedPoint> = self
            .live_trees()
            .flat_map(|t| t.alive_entries().map(from_entry))
            .collect();
        out.sort_by_key(|wp| wp.point.id);
        out
    }
}

fn to_entry(wp: &WeightedPoint) -> Entry {
    Entry {
        x: wp.point.x,
        y: wp.point.y,
        w: wp.weight,
        id: wp.point.id,
        alive: true,
    }
}

fn from_entry(e: &Entry) -> WeightedPoint {
    WeightedPoint::new(Point::new(e.x, e.y, e.id), e.w)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    bound: f64,
    p_tree: u32,
    p_node: u32,
    q_tree: u32,
    q_node: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.bound.total_cmp(&other.bound) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Reversed so the max-heap pops the smallest bound.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound)
    }
}

/// Lower bound on the weighted cost between any `a` under `p` and any `b`
/// under `q`. Slightly loosened so that rounding in `powf` can never make it
/// exceed a realised pair value.
#[inline]
fn pair_bound(p: &Node, q: &Node, params: CostParams) -> f64 {
    let dx = (q.min_x - p.max_x).max(p.min_x - q.max_x).max(0.0);
    let dy = (q.min_y - p.max_y).max(p.min_y - q.max_y).max(0.0);
    let c = params.cost_from_deltas(dx, dy);
    let b = (c - p.w_max) + q.w_min;
    b - b.abs() * 1e-12
}

/// Dynamic weighted BCP with a rewindable update log.
#[derive(Debug, Clone)]
pub struct BcpStructure {
    params: CostParams,
    sides: [SideSet; 2],
    log: Vec<UpdateRecord>,
    checkpoints: Vec<CheckpointToken>,
    next_serial: u64,
    cands: Option<Candidates>,
    // Candidates set aside by a frozen checkpoint, restored by rewinding to it.
    frozen: Option<(CheckpointToken, Option<Candidates>)>,
    excluded: HashSet<(u32, u32)>,
    ops: u64,
}

/// A best partner of `owner`, valid while both endpoints keep the recorded
/// versions.
#[derive(Debug, Clone, Copy)]
struct Cand {
    cost: f64,
    p_id: u32,
    q_id: u32,
    p_ver: u32,
    q_ver: u32,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.p_id.cmp(&self.p_id))
            .then(other.q_id.cmp(&self.q_id))
    }
}

// For any pair (p, q), whichever endpoint had its partner computed last saw
// the other one, so its candidate is at least as good as (p, q). Points
// present when the heap is seeded only need candidates on one side.
// Updates only mark ids dirty; partners are recomputed before the next query.
#[derive(Debug, Clone, Default)]
struct Candidates {
    heap: BinaryHeap<Cand>,
    ver: [Vec<u32>; 2],
    current: [Vec<Option<(u32, u32)>>; 2],
    pointed_by: [Vec<Vec<u32>>; 2],
    dirty: Vec<(Side, u32)>,
}

impl Candidates {
    fn ensure(&mut self, side: usize, id: u32) {
        let n = id as usize + 1;
        if self.ver[side].len() < n {
            self.ver[side].resize(n, 0);
            self.current[side].resize(n, None);
            self.pointed_by[side].resize_with(n, Vec::new);
        }
    }

    fn version(&self, side: usize, id: u32) -> u32 {
        self.ver[side].get(id as usize).copied().unwrap_or(0)
    }
}

impl BcpStructure {
    pub fn new(params: CostParams) -> Self {
        BcpStructure {
            params,
            sides: [SideSet::default(), SideSet::default()],
            log: Vec::new(),
            checkpoints: Vec::new(),
            next_serial: 0,
            cands: None,
            frozen: None,
            excluded: HashSet::new(),
            ops: 0,
        }
    }

    /// Bulk construction; not logged.
    pub fn from_points(
        params: CostParams,
        p_side: &[WeightedPoint],
        q_side: &[WeightedPoint],
    ) -> Result<Self> {
        let tag = |side: Side| {
            move |e: GpmError| match e {
                GpmError::DuplicateId { id, .. } => GpmError::DuplicateId {
                    side: side.name(),
                    id,
                },
                other => other,
            }
        };
        let mut s = BcpStructure::new(params);
        s.sides[0] = SideSet::from_points(p_side).map_err(tag(Side::P))?;
        s.sides[0].len = p_side.len();
        s.sides[1] = SideSet::from_points(q_side).map_err(tag(Side::Q))?;
        s.sides[1].len = q_side.len();
        Ok(s)
    }

    /// Bulk construction in which the listed `(p_id, q_id)` pairs never
    /// take part in any query.
    pub fn from_points_excluding(
        params: CostParams,
        p_side: &[WeightedPoint],
        q_side: &[WeightedPoint],
        excluded: HashSet<(u32, u32)>,
    ) -> Result<Self> {
        let mut s = Self::from_points(params, p_side, q_side)?;
        s.excluded = excluded;
        Ok(s)
    }

    pub fn params(&self) -> CostParams {
        self.params
    }

    pub fn len(&self, side: Side) -> usize {
        self.sides[side.index()].len
    }

    pub fn is_empty(&self) -> bool {
        self.len(Side::P) == 0 && self.len(Side::Q) == 0
    }

    pub fn contains(&self, side: Side, id: u32) -> bool {
        self.sides[side.index()].contains(id)
    }

    pub fn get(&self, side: Side, id: u32) -> Option<WeightedPoint> {
        self.sides[side.index()].get(id)
    }

    /// Current members of one side, sorted by id.
    pub fn contents(&self, side: Side) -> Vec<WeightedPoint> {
        self.sides[side.index()].contents()
    }

    /// Total insertions and deletions performed, including rewinds.
    pub fn op_count(&self) -> u64 {
        self.ops
    }

    pub fn log(&self) -> &[UpdateRecord] {
        &self.log
    }

    pub fn insert(&mut self, side: Side, wp: WeightedPoint) -> Result<()> {
        if self.contains(side, wp.point.id) {
            return Err(GpmError::DuplicateId {
                side: side.name(),
                id: wp.point.id,
            });
        }
        self.raw_insert(side, wp);
        if !self.checkpoints.is_empty() {
            self.log.push(UpdateRecord {
                kind: OpKind::Insert,
                side,
                point: wp,
            });
        }
        Ok(())
    }

    pub fn delete(&mut self, side: Side, id: u32) -> Result<WeightedPoint> {
        let wp = self.raw_delete(side, id).ok_or(GpmError::MissingId {
            side: side.name(),
            id,
        })?;
        if !self.checkpoints.is_empty() {
            self.log.push(UpdateRecord {
                kind: OpKind::Delete,
                side,
                point: wp,
            });
        }
        Ok(wp)
    }

    fn raw_insert(&mut self, side: Side, wp: WeightedPoint) {
        self.ops += 1;
        self.sides[side.index()].insert(&wp);
        if let Some(c) = self.cands.as_mut() {
            let id = wp.point.id;
            c.ensure(side.index(), id);
            c.ver[side.index()][id as usize] += 1;
            c.dirty.push((side, id));
        }
    }

    fn raw_delete(&mut self, side: Side, id: u32) -> Option<WeightedPoint> {
        let wp = self.sides[side.index()].remove(id)?;
        self.ops += 1;
        if let Some(c) = self.cands.as_mut() {
            let si = side.index();
            c.ensure(si, id);
            let old = c.ver[si][id as usize];
            c.ver[si][id as usize] += 1;
            c.current[si][id as usize] = None;
            let owners = std::mem::take(&mut c.pointed_by[si][id as usize]);
            let other = side.other();
            for o in owners {
                if c.current[other.index()][o as usize] == Some((id, old)) {
                    c.current[other.index()][o as usize] = None;
                    c.dirty.push((other, o));
                }
            }
        }
        Some(wp)
    }

    fn compute_partner(&self, c: &mut Candidates, side: Side, id: u32) {
        let si = side.index();
        c.current[si][id as usize] = None;
        let Some(wp) = self.get(side, id) else { return };
        let found = if self.excluded.is_empty() {
            self.best_with_point(side, &wp)
        } else {
            self.best_with_point_filtered(side, &wp, |_| false)
        };
        let Some(pair) = found else { return };
        let partner = match side {
            Side::P => pair.q_id,
            Side::Q => pair.p_id,
        };
        let oi = side.other().index();
        c.ensure(oi, partner);
        let (p_ver, q_ver) = (c.version(0, pair.p_id), c.version(1, pair.q_id));
        c.heap.push(Cand {
            cost: pair.cost,
            p_id: pair.p_id,
            q_id: pair.q_id,
            p_ver,
            q_ver,
        });
        c.current[si][id as usize] = Some((partner, c.ver[oi][partner as usize]));
        c.pointed_by[oi][partner as usize].push(id);
    }

    fn seed_candidates(&mut self) {
        let mut c = Candidates::default();
        for si in 0..2 {
            let max_id = self.sides[si].loc.len();
            c.ver[si] = vec![0; max_id];
            c.current[si] = vec![None; max_id];
            c.pointed_by[si] = vec![Vec::new(); max_id];
        }
        let side = if self.len(Side::P) <= self.len(Side::Q) {
            Side::P
        } else {
            Side::Q
        };
        let ids: Vec<u32> = self.sides[side.index()]
            .live_trees()
            .flat_map(|t| t.alive_entries().map(|e| e.id))
            .collect();
        for id in ids {
            self.compute_partner(&mut c, side, id);
        }
        self.cands = Some(c);
    }

    fn flush(&mut self) {
        let Some(mut c) = self.cands.take() else { return };
        let dirty = std::mem::take(&mut c.dirty);
        for (side, id) in dirty {
            if c.current[side.index()][id as usize].is_none() && self.contains(side, id) {
                self.compute_partner(&mut c, side, id);
            }
        }
        self.cands = Some(c);
    }

    fn valid(&self, c: &Cand) -> bool {
        let cs = self.cands.as_ref().expect("seeded");
        self.contains(Side::P, c.p_id)
            && self.contains(Side::Q, c.q_id)
            && cs.version(0, c.p_id) == c.p_ver
            && cs.version(1, c.q_id) == c.q_ver
    }

    /// Starts logging; rewinding to the token undoes every later update.
    pub fn checkpoint(&mut self) -> CheckpointToken {
        let token = CheckpointToken {
            serial: self.next_serial,
            position: self.log.len(),
        };
        self.next_serial += 1;
        self.checkpoints.push(token);
        token
    }

    /// Replays inverse updates in reverse order back to `token`. The token
    /// stays valid; checkpoints taken after it are invalidated.
    pub fn rewind(&mut self, token: CheckpointToken) -> Result<()> {
        let idx = self
            .checkpoints
            .iter()
            .position(|t| *t == token)
            .ok_or(GpmError::StaleCheckpoint)?;
        while self.log.len() > token.position {
            let rec = self.log.pop().expect("log longer than position");
            match rec.kind {
                OpKind::Insert => {
                    self.raw_delete(rec.side, rec.point.point.id)
                        .expect("logged insertion is present");
                }
                OpKind::Delete => self.raw_insert(rec.side, rec.point),
            }
        }
        self.checkpoints.truncate(idx + 1);
        if let Some((t, cands)) = self.frozen.take() {
            if t.position == token.position {
                self.cands = cands;
            } else if t.position < token.position {
                self.frozen = Some((t, cands));
            }
        }
        Ok(())
    }

    /// A checkpoint that also suspends upkeep of the [`Self::query_min`]
    /// index until it is rewound to. Meant for exploratory updates that are
    /// always undone; queries in between fall back to a full search.
    pub fn checkpoint_frozen(&mut self) -> CheckpointToken {
        let token = self.checkpoint();
        if self.frozen.is_none() {
            self.frozen = Some((token, self.cands.take()));
        }
        token
    }

    /// Drops every checkpoint and the log.
    pub fn commit(&mut self) {
        self.checkpoints.clear();
        self.log.clear();
        self.frozen = None;
    }

    /// The minimum weighted pair, or `None` if a side is empty.
    pub fn query_min(&mut self) -> Option<BcpPair> {
        if self.frozen.is_some() {
            return self.search(|p, q| self.excluded.contains(&(p, q)));
        }
        if self.cands.is_none() {
            self.seed_candidates();
        }
        self.flush();
        loop {
            let top = *self.cands.as_ref().expect("seeded").heap.peek()?;
            if self.valid(&top) {
                self.compact();
                return Some(BcpPair {
                    p_id: top.p_id,
                    q_id: top.q_id,
                    cost: top.cost,
                });
            }
            self.cands.as_mut().expect("seeded").heap.pop();
        }
    }

    // Drops superseded candidates once they dominate the heap.
    fn compact(&mut self) {
        let live = self.len(Side::P) + self.len(Side::Q);
        let c = self.cands.as_ref().expect("seeded");
        if c.heap.len() <= 4 * live + 1024 {
            return;
        }
        let mut c = self.cands.take().expect("seeded");
        let heap = std::mem::take(&mut c.heap);
        let is_current = |x: &Cand| {
            c.current[0].get(x.p_id as usize) == Some(&Some((x.q_id, x.q_ver)))
                && c.ver[0][x.p_id as usize] == x.p_ver
                || c.current[1].get(x.q_id as usize) == Some(&Some((x.p_id, x.p_ver)))
                    && c.ver[1][x.q_id as usize] == x.q_ver
        };
        let kept: Vec<Cand> = heap.into_vec().into_iter().filter(|x| is_current(x)).collect();
        c.heap = BinaryHeap::from(kept);
        self.cands = Some(c);
    }

    /// Minimum over pairs for which `skip(p_id, q_id)` is false. Uncached.
    pub fn query_min_filtered(&self, skip: impl Fn(u32, u32) -> bool) -> Option<BcpPair> {
        self.search(|p, q| skip(p, q) || self.excluded.contains(&(p, q)))
    }

    /// Best partner on the opposite side for a probe placed on `side`.
    /// Returned ids are oriented as `(P id, Q id)`.
    pub fn best_with_point(&self, side: Side, probe: &WeightedPoint) -> Option<BcpPair> {
        self.best_with_point_filtered(side, probe, |_| false)
    }

    pub fn best_with_point_filtered(
        &self,
        side: Side,
        probe: &WeightedPoint,
        skip: impl Fn(u32) -> bool,
    ) -> Option<BcpPair> {
        let other = match side {
            Side::P => &self.sides[1],
            Side::Q => &self.sides[0],
        };
        let probe_node = Node {
            min_x: probe.point.x,
            min_y: probe.point.y,
            max_x: probe.point.x,
            max_y: probe.point.y,
            w_min: probe.weight,
            w_max: probe.weight,
            start: 0,
            end: 0,
            left: NONE,
            right: NONE,
            parent: NONE,
            alive: 1,
        };
        let mut best: Option<BcpPair> = None;
        let mut heap = BinaryHeap::with_capacity(64);
        for (ti, tree) in other.trees.iter().enumerate() {
            let Some(tree) = tree else { continue };
            if tree.alive() == 0 {
                continue;
            }
            let root = &tree.nodes[0];
            let bound = match side {
                Side::P => pair_bound(&probe_node, root, self.params),
                Side::Q => pair_bound(root, &probe_node, self.params),
            };
            heap.push(Candidate {
                bound,
                p_tree: ti as u32,
                p_node: 0,
                q_tree: 0,
                q_node: 0,
            });
        }
        while let Some(cand) = heap.pop() {
            if let Some(b) = &best {
                if cand.bound > b.cost {
                    break;
                }
            }
            let tree = other.trees[cand.p_tree as usize].as_ref().unwrap();
            let node = &tree.nodes[cand.p_node as usize];
            if node.is_leaf() {
                for e in &tree.entries[node.start as usize..node.end as usize] {
                    if !e.alive || skip(e.id) {
                        continue;
                    }
                    if !self.excluded.is_empty() {
                        let key = match side {
                            Side::P => (probe.point.id, e.id),
                            Side::Q => (e.id, probe.point.id),
                        };
                        if self.excluded.contains(&key) {
                            continue;
                        }
                    }
                    let other_wp = from_entry(e);
                    let pair = match side {
                        Side::P => BcpPair {
                            p_id: probe.point.id,
                            q_id: e.id,
                            cost: weighted_cost(probe, &other_wp, self.params),
                        },
                        Side::Q => BcpPair {
                            p_id: e.id,
                            q_id: probe.point.id,
                            cost: weighted_cost(&other_wp, probe, self.params),
                        },
                    };
                    if best.as_ref().is_none_or(|b| pair.precedes(b)) {
                        best = Some(pair);
                    }
                }
                continue;
            }
            for child in [node.left, node.right] {
                let cn = &tree.nodes[child as usize];
                if cn.alive == 0 {
                    continue;
                }
                let bound = match side {
                    Side::P => pair_bound(&probe_node, cn, self.params),
                    Side::Q => pair_bound(cn, &probe_node, self.params),
                };
                if best.as_ref().is_some_and(|b| bound > b.cost) {
                    continue;
                }
                heap.push(Candidate {
                    bound,
                    p_node: child,
                    ..cand
                });
            }
        }
        best
    }

    fn search(&self, skip: impl Fn(u32, u32) -> bool) -> Option<BcpPair> {
        let (ps, qs) = (&self.sides[0], &self.sides[1]);
        let mut heap = BinaryHeap::with_capacity(64);
        for (pi, pt) in ps.trees.iter().enumerate() {
            let Some(pt) = pt else { continue };
            if pt.alive() == 0 {
                continue;
            }
            for (qi, qt) in qs.trees.iter().enumerate() {
                let Some(qt) = qt else { continue };
                if qt.alive() == 0 {
                    continue;
                }
                heap.push(Candidate {
                    bound: pair_bound(&pt.nodes[0], &qt.nodes[0], self.params),
                    p_tree: pi as u32,
                    p_node: 0,
                    q_tree: qi as u32,
                    q_node: 0,
                });
            }
        }
        let mut best: Option<BcpPair> = None;
        while let Some(cand) = heap.pop() {
            if best.as_ref().is_some_and(|b| cand.bound > b.cost) {
                break;
            }
            let pt = ps.trees[cand.p_tree as usize].as_ref().unwrap();
            let qt = qs.trees[cand.q_tree as usize].as_ref().unwrap();
            let pn = &pt.nodes[cand.p_node as usize];
            let qn = &qt.nodes[cand.q_node as usize];
            if pn.is_leaf() && qn.is_leaf() {
                for a in &pt.entries[pn.start as usize..pn.end as usize] {
                    if !a.alive {
                        continue;
                    }
                    let wa = from_entry(a);
                    for b in &qt.entries[qn.start as usize..qn.end as usize] {
                        if !b.alive || skip(a.id, b.id) {
                            continue;
                        }
                        let pair = BcpPair {
                            p_id: a.id,
                            q_id: b.id,
                            cost: weighted_cost(&wa, &from_entry(b), self.params),
                        };
                        if best.as_ref().is_none_or(|bp| pair.precedes(bp)) {
                            best = Some(pair);
                        }
                    }
                }
                continue;
            }
            let split_p = !pn.is_leaf() && (qn.is_leaf() || pn.extent() >= qn.extent());
            let children = if split_p {
                [(pn.left, cand.q_node), (pn.right, cand.q_node)]
            } else {
                [(cand.p_node, qn.left), (cand.p_node, qn.right)]
            };
            for (pc, qc) in children {
                let pcn = &pt.nodes[pc as usize];
                let qcn = &qt.nodes[qc as usize];
                if pcn.alive == 0 || qcn.alive == 0 {
                    continue;
                }
                let bound = pair_bound(pcn, qcn, self.params);
                if best.as_ref().is_some_and(|b| bound > b.cost) {
                    continue;
                }
                heap.push(Candidate {
                    bound,
                    p_node: pc,
                    q_node: qc,
                    ..cand
                });
            }
        }
        best
    }
}

/// Exhaustive `O(|P||Q|)` scan with the same tie-breaking.
pub fn brute_force_min(
    p_side: &[WeightedPoint],
    q_side: &[WeightedPoint],
    params: CostParams,
) -> Option<BcpPair> {
    let mut best: Option<BcpPair> = None;
    for a in p_side {
        for b in q_side {
            let pair = BcpPair {
                p_id: a.point.id,
                q_id: b.point.id,
                cost: weighted_cost(a, b, params),
            };
            if best.as_ref().is_none_or(|bp| pair.precedes(bp)) {
                best = Some(pair);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wp(x: f64, y: f64, id: u32, w: f64) -> WeightedPoint {
        WeightedPoint::new(Point::new(x, y, id), w)
    }

    fn params() -> CostParams {
        CostParams::new(2, 1).unwrap()
    }

    #[test]
    fn empty_and_single_pair() {
        let mut s = BcpStructure::new(params());
        assert_eq!(s.query_min(), None);
        s.insert(Side::P, wp(0.0, 0.0, 0, 0.0)).unwrap();
        assert_eq!(s.query_min(), None);
        s.insert(Side::Q, wp(3.0, 4.0, 0, 0.0)).unwrap();
        assert_eq!(
            s.query_min(),
            Some(BcpPair { p_id: 0, q_id: 0, cost: 5.0 })
        );
        s.delete(Side::Q, 0).unwrap();
        assert_eq!(s.query_min(), None);
    }

    #[test]
    fn weighted_arithmetic() {
        let mut s = BcpStructure::new(params());
        s.insert(Side::P, wp(0.0, 0.0, 0, 10.0)).unwrap();
        s.insert(Side::Q, wp(3.0, 4.0, 0, 0.0)).unwrap();
        assert_eq!(s.query_min().unwrap().cost, -5.0);
    }

    #[test]
    fn duplicate_and_missing_ids() {
        let mut s = BcpStructure::new(params());
        s.insert(Side::P, wp(0.0, 0.0, 3, 0.0)).unwrap();
        assert!(matches!(
            s.insert(Side::P, wp(1.0, 0.0, 3, 0.0)),
            Err(GpmError::DuplicateId { id: 3, .. })
        ));
        // the same id may live on the other side
        s.insert(Side::Q, wp(1.0, 0.0, 3, 0.0)).unwrap();
        assert!(matches!(
            s.delete(Side::Q, 7),
            Err(GpmError::MissingId { id: 7, .. })
        ));
    }

    #[test]
    fn deleting_winner_yields_runner_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps: Vec<_> = (0..40).map(|i| wp(rng.gen(), rng.gen(), i, rng.gen())).collect();
        let qs: Vec<_> = (0..40).map(|i| wp(rng.gen(), rng.gen(), i, rng.gen())).collect();
        let mut s = BcpStructure::from_points(params(), &ps, &qs).unwrap();
        let first = s.query_min().unwrap();
        assert_eq!(Some(first), brute_force_min(&ps, &qs, params()));
        s.delete(Side::Q, first.q_id).unwrap();
        let rest: Vec<_> = qs.iter().copied().filter(|w| w.point.id != first.q_id).collect();
        assert_eq!(s.query_min(), brute_force_min(&ps, &rest, params()));
    }

    #[test]
    fn ties_break_by_ids() {
        let mut s = BcpStructure::new(params());
        s.insert(Side::P, wp(0.0, 0.0, 5, 0.0)).unwrap();
        s.insert(Side::P, wp(0.0, 0.0, 2, 0.0)).unwrap();
        s.insert(Side::Q, wp(1.0, 0.0, 9, 0.0)).unwrap();
        s.insert(Side::Q, wp(0.0, 1.0, 4, 0.0)).unwrap();
        assert_eq!(
            s.query_min(),
            Some(BcpPair { p_id: 2, q_id: 4, cost: 1.0 })
        );
    }

    #[test]
    fn checkpoint_rewind_basics() {
        let mut s = BcpStructure::new(params());
        s.insert(Side::P, wp(0.0, 0.0, 0, 0.0)).unwrap();
        s.insert(Side::Q, wp(1.0, 0.0, 0, 0.0)).unwrap();
        let t = s.checkpoint();
        s.rewind(t).unwrap();
        assert_eq!(s.contents(Side::P).len(), 1);
        let t1 = s.checkpoint();
        s.insert(Side::Q, wp(0.5, 0.0, 1, 0.0)).unwrap();
        let t2 = s.checkpoint();
        s.delete(Side::P, 0).unwrap();
        assert_eq!(s.query_min(), None);
        s.rewind(t2).unwrap();
        assert_eq!(s.query_min().unwrap().q_id, 1);
        s.rewind(t1).unwrap();
        assert_eq!(s.query_min().unwrap().q_id, 0);
        assert_eq!(s.rewind(t2), Err(GpmError::StaleCheckpoint));
        s.commit();
        assert_eq!(s.rewind(t1), Err(GpmError::StaleCheckpoint));
    }
}
