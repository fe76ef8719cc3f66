//! Points, the `‖a−b‖_p^q` edge cost, minimum spanning trees of `A ∪ B`
//! and the starting-scale index used by the cost-scaling solver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{GpmError, Result};

/// A point of one of the two input sets. `id` is its dense index in that set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub id: u32,
}

impl Point {
    pub fn new(x: f64, y: f64, id: u32) -> Self {
        Point { x, y, id }
    }
}

/// Builds a point set with ids `0..coords.len()`.
pub fn point_set(coords: &[(f64, f64)]) -> Vec<Point> {
    coords
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Point::new(x, y, i as u32))
        .collect()
}

/// Checks finiteness and that ids are exactly `0..len` in order.
pub fn validate_set(points: &[Point]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(GpmError::NonFinite { id: p.id });
        }
        if p.id as usize != i {
            return Err(GpmError::BadIds(format!(
                "point at position {i} carries id {}",
                p.id
            )));
        }
    }
    Ok(())
}

/// The `(p, q)` pair: edge cost is the `q`-th power of the `L_p` distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostParams {
    p: u32,
    q: u32,
}

impl CostParams {
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(GpmError::InvalidParams { p, q });
        }
        Ok(CostParams { p, q })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// `L_p` distance from absolute coordinate differences.
    pub fn distance_from_deltas(&self, dx: f64, dy: f64) -> f64 {
        match self.p {
            1 => dx + dy,
            2 => (dx * dx + dy * dy).sqrt(),
            p => (dx.powi(p as i32) + dy.powi(p as i32)).powf(1.0 / p as f64),
        }
    }

    /// Edge cost from absolute coordinate differences. Monotone in both
    /// arguments, which the spatial lower bounds rely on.
    pub fn cost_from_deltas(&self, dx: f64, dy: f64) -> f64 {
        let (p, q) = (self.p, self.q);
        match p {
            1 => (dx + dy).powi(q as i32),
            2 => {
                let s = dx * dx + dy * dy;
                if q % 2 == 0 {
                    s.powi((q / 2) as i32)
                } else {
                    s.sqrt().powi(q as i32)
                }
            }
            _ => {
                let s = dx.powi(p as i32) + dy.powi(p as i32);
                if q % p == 0 {
                    s.powi((q / p) as i32)
                } else {
                    s.powf(q as f64 / p as f64)
                }
            }
        }
    }
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams { p: 2, q: 1 }
    }
}

/// `c(a, b) = ‖a − b‖_p^q`.
#[inline]
pub fn cost(a: &Point, b: &Point, params: CostParams) -> f64 {
    params.cost_from_deltas((a.x - b.x).abs(), (a.y - b.y).abs())
}

#[inline]
/// Correctly rounded sum: the float nearest to the exact sum of `values`,
/// so equal exact sums give identical results whatever the order.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    // nonoverlapping partials in increasing magnitude
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let Some(mut hi) = partials.pop() else {
        return 0.0;
    };
    let mut lo = 0.0;
    while let Some(y) = partials.pop() {
        let x = hi;
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // half-way case: the remaining partials decide the rounding direction
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

pub fn distance(a: &Point, b: &Point, params: CostParams) -> f64 {
    params.distance_from_deltas((a.x - b.x).abs(), (a.y - b.y).abs())
}

/// One tree edge between slice indices `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub u: usize,
    pub v: usize,
    pub cost: f64,
}

/// Minimum spanning forest with edges in nondecreasing cost order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningForest {
    pub edges: Vec<MstEdge>,
}

impl SpanningForest {
    pub fn total_cost(&self) -> f64 {
        self.edges.iter().map(|e| e.cost).sum()
    }
}

/// Plain union-find with union by size and path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns the new root if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        Some(ra)
    }
}

/// Minimum spanning tree of the complete graph on `points` under `c`.
///
/// The tree is computed under the `L_p` distance (`x ↦ x^q` is monotone)
/// from a sparse candidate set: Delaunay edges for `p = 2`, octant
/// neighbours for `p = 1`, and all pairs otherwise. Costs are re-evaluated
/// under `c` afterwards.
pub fn euclidean_mst(points: &[Point], params: CostParams) -> SpanningForest {
    let n = points.len();
    if n <= 1 {
        return SpanningForest { edges: Vec::new() };
    }
    let candidates = match params.p() {
        2 => delaunay_candidates(points),
        1 => manhattan_candidates(points),
        _ => None,
    };
    let mut tree = candidates
        .and_then(|c| kruskal(points, params, c))
        .unwrap_or_else(|| prim(points, params));
    for e in &mut tree {
        e.cost = cost(&points[e.u], &points[e.v], params);
    }
    SpanningForest { edges: tree }
}

/// Prim's algorithm on the complete graph, `O(n²)`.
pub fn prim(points: &[Point], params: CostParams) -> Vec<MstEdge> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    best[0] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        if u != 0 {
            let (a, b) = (from[u].min(u), from[u].max(u));
            edges.push(MstEdge { u: a, v: b, cost: best[u] });
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = distance(&points[u], &points[v], params);
                if d < best[v] {
                    best[v] = d;
                    from[v] = u;
                }
            }
        }
    }
    edges.sort_by(|a, b| edge_order(a, b));
    edges
}

fn edge_order(a: &MstEdge, b: &MstEdge) -> std::cmp::Ordering {
    a.cost
        .total_cmp(&b.cost)
        .then(a.u.cmp(&b.u))
        .then(a.v.cmp(&b.v))
}

fn kruskal(
    points: &[Point],
    params: CostParams,
    candidates: Vec<(usize, usize)>,
) -> Option<Vec<MstEdge>> {
    let mut edges: Vec<MstEdge> = candidates
        .into_iter()
        .filter(|&(u, v)| u != v)
        .map(|(u, v)| {
            let (a, b) = (u.min(v), u.max(v));
            MstEdge {
                u: a,
                v: b,
                cost: distance(&points[a], &points[b], params),
            }
        })
        .collect();
    edges.sort_by(edge_order);
    edges.dedup_by(|a, b| a.u == b.u && a.v == b.v);
    let mut uf = UnionFind::new(points.len());
    let mut tree = Vec::with_capacity(points.len() - 1);
    for e in edges {
        if uf.union(e.u, e.v).is_some() {
            tree.push(e);
        }
    }
    (tree.len() + 1 == points.len()).then_some(tree)
}

/// Delaunay edges of the distinct locations plus zero-length edges joining
/// coincident points.
fn delaunay_candidates(points: &[Point]) -> Option<Vec<(usize, usize)>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .x
            .total_cmp(&points[j].x)
            .then(points[i].y.total_cmp(&points[j].y))
            .then(i.cmp(&j))
    });
    let mut reps: Vec<usize> = Vec::new();
    let mut cand = Vec::new();
    for &i in &order {
        match reps.last() {
            Some(&r) if points[r].x == points[i].x && points[r].y == points[i].y => {
                cand.push((r, i))
            }
            _ => reps.push(i),
        }
    }
    if reps.len() == 1 {
        return Some(cand);
    }
    if reps.len() == 2 {
        cand.push((reps[0], reps[1]));
        return Some(cand);
    }
    let coords: Vec<delaunator::Point> = reps
        .iter()
        .map(|&i| delaunator::Point {
            x: points[i].x,
            y: points[i].y,
        })
        .collect();
    let tri = delaunator::triangulate(&coords);
    for t in tri.triangles.chunks_exact(3) {
        cand.push((reps[t[0]], reps[t[1]]));
        cand.push((reps[t[1]], reps[t[2]]));
        cand.push((reps[t[2]], reps[t[0]]));
    }
    // Collinear inputs produce no triangles; the hull then lists the points
    // in order along the line.
    for w in tri.hull.windows(2) {
        cand.push((reps[w[0]], reps[w[1]]));
    }
    Some(cand)
}

/// Rectilinear MST candidates: for every point the nearest neighbour in each
/// of the eight octants (four sweeps over reflected coordinates).
fn manhattan_candidates(points: &[Point]) -> Option<Vec<(usize, usize)>> {
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let mut cand = Vec::new();
    let mut ids: Vec<usize> = (0..points.len()).collect();
    for pass in 0..4 {
        ids.sort_by(|&i, &j| {
            (xs[i] + ys[i])
                .total_cmp(&(xs[j] + ys[j]))
                .then(i.cmp(&j))
        });
        let mut sweep: BTreeMap<(OrdF64, usize), usize> = BTreeMap::new();
        for &i in &ids {
            let key = (OrdF64(-ys[i]), 0usize);
            let mut remove = Vec::new();
            for (&k, &j) in sweep.range(key..) {
                let dx = xs[i] - xs[j];
                let dy = ys[i] - ys[j];
                if dy > dx {
                    break;
                }
                cand.push((i, j));
                remove.push(k);
            }
            for k in remove {
                sweep.remove(&k);
            }
            sweep.insert((OrdF64(-ys[i]), i), i);
        }
        for i in 0..points.len() {
            if pass % 2 == 1 {
                xs[i] = -xs[i];
            } else {
                std::mem::swap(&mut xs[i], &mut ys[i]);
            }
        }
    }
    Some(cand)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Union-find over `A ∪ B` that tracks `Σ_C min(|A∩C|, |B∩C|)`, the size of
/// the largest intra-cluster matching of the current forest.
#[derive(Debug, Clone)]
pub struct ClusterCounter {
    uf: UnionFind,
    count_a: Vec<usize>,
    count_b: Vec<usize>,
    matchable: usize,
}

impl ClusterCounter {
    /// Nodes `0..num_a` are A-side, `num_a..num_a+num_b` are B-side.
    pub fn new(num_a: usize, num_b: usize) -> Self {
        let n = num_a + num_b;
        let count_a = (0..n).map(|i| usize::from(i < num_a)).collect();
        let count_b = (0..n).map(|i| usize::from(i >= num_a)).collect();
        ClusterCounter {
            uf: UnionFind::new(n),
            count_a,
            count_b,
            matchable: 0,
        }
    }

    pub fn matchable(&self) -> usize {
        self.matchable
    }

    pub fn join(&mut self, u: usize, v: usize) {
        let (ru, rv) = (self.uf.find(u), self.uf.find(v));
        if ru == rv {
            return;
        }
        self.matchable -= self.count_a[ru].min(self.count_b[ru]);
        self.matchable -= self.count_a[rv].min(self.count_b[rv]);
        let root = self.uf.union(ru, rv).expect("distinct roots");
        let other = if root == ru { rv } else { ru };
        self.count_a[root] += self.count_a[other];
        self.count_b[root] += self.count_b[other];
        self.matchable += self.count_a[root].min(self.count_b[root]);
    }

    pub fn find(&mut self, x: usize) -> usize {
        self.uf.find(x)
    }
}

/// Result of the starting-scale computation.
#[derive(Debug, Clone, PartialEq)]
pub struct StartingScale {
    /// 1-based index `i*` into the sorted tree edges.
    pub index: usize,
    /// `c(e_{i*})`.
    pub edge_cost: f64,
    /// The sorted spanning forest of `A ∪ B` (A first, then B).
    pub forest: SpanningForest,
}

/// Smallest `i` such that the forest of the `i` cheapest MST edges admits an
/// intra-cluster matching of size `k`.
pub fn starting_scale_index(
    a: &[Point],
    b: &[Point],
    k: usize,
    params: CostParams,
) -> Result<StartingScale> {
    let max = a.len().min(b.len());
    if k == 0 || k > max {
        return Err(GpmError::InfeasibleK { k, max });
    }
    let all: Vec<Point> = a.iter().chain(b.iter()).copied().collect();
    let forest = euclidean_mst(&all, params);
    let mut counter = ClusterCounter::new(a.len(), b.len());
    for (i, e) in forest.edges.iter().enumerate() {
        counter.join(e.u, e.v);
        if counter.matchable() >= k {
            return Ok(StartingScale {
                index: i + 1,
                edge_cost: e.cost,
                forest,
            });
        }
    }
    unreachable!("a spanning tree of A ∪ B admits a matching of size min(|A|, |B|)")
}

/// A size-`k` matching whose pairs lie inside components of the forest of
/// the first `index` tree edges. Pairs are slice indices into `a` and `b`.
pub fn intra_cluster_matching(
    a: &[Point],
    b: &[Point],
    k: usize,
    scale: &StartingScale,
) -> Vec<(u32, u32)> {
    let num_a = a.len();
    let mut counter = ClusterCounter::new(num_a, b.len());
    for e in &scale.forest.edges[..scale.index] {
        counter.join(e.u, e.v);
    }
    let mut members: BTreeMap<usize, (Vec<u32>, Vec<u32>)> = BTreeMap::new();
    for i in 0..num_a + b.len() {
        let root = counter.find(i);
        let entry = members.entry(root).or_default();
        if i < num_a {
            entry.0.push(i as u32);
        } else {
            entry.1.push((i - num_a) as u32);
        }
    }
    let mut pairs = Vec::with_capacity(k);
    for (_, (am, bm)) in members {
        for (&x, &y) in am.iter().zip(bm.iter()) {
            if pairs.len() == k {
                return pairs;
            }
            pairs.push((x, y));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_sum_is_order_independent() {
        assert_eq!(exact_sum([]), 0.0);
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        // 1 + 2^-53 + 2^-106 rounds up, not to even
        assert_eq!(exact_sum([1.0, f64::EPSILON / 2.0, f64::EPSILON * f64::EPSILON / 4.0]), 1.0 + f64::EPSILON);
        let mut r = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut v: Vec<f64> = (0..20).map(|_| r.gen::<f64>() * 10f64.powi(r.gen_range(-8..8))).collect();
            let s = exact_sum(v.iter().copied());
            v.reverse();
            assert_eq!(exact_sum(v.iter().copied()), s);
            v.sort_by(f64::total_cmp);
            assert_eq!(exact_sum(v.iter().copied()), s);
        }
    }

    fn p(x: f64, y: f64, id: u32) -> Point {
        Point::new(x, y, id)
    }

    #[test]
    fn cost_examples() {
        let a = p(0.0, 0.0, 0);
        let b = p(3.0, 4.0, 0);
        assert_eq!(cost(&a, &b, CostParams::new(2, 1).unwrap()), 5.0);
        assert_eq!(cost(&a, &b, CostParams::new(2, 2).unwrap()), 25.0);
        assert_eq!(cost(&a, &b, CostParams::new(1, 1).unwrap()), 7.0);
        assert_eq!(cost(&a, &b, CostParams::new(1, 2).unwrap()), 49.0);
        let c = p(1.0, 1.0, 0);
        for pp in 1..5 {
            for q in 1..4 {
                assert_eq!(cost(&c, &c, CostParams::new(pp, q).unwrap()), 0.0);
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(CostParams::new(0, 1).is_err());
        assert!(CostParams::new(2, 0).is_err());
    }

    #[test]
    fn singleton_and_collinear_mst() {
        let params = CostParams::new(2, 1).unwrap();
        assert!(euclidean_mst(&[p(0.0, 0.0, 0)], params).edges.is_empty());
        let pts = point_set(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]);
        let t = euclidean_mst(&pts, params);
        assert_eq!(
            t.edges,
            vec![
                MstEdge { u: 0, v: 1, cost: 1.0 },
                MstEdge { u: 1, v: 2, cost: 2.0 }
            ]
        );
    }

    #[test]
    fn mst_matches_prim_for_all_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..60 {
            let n = rng.gen_range(2..120);
            let coords: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    if trial % 5 == 0 {
                        // coarse grid: duplicates and collinear runs
                        (rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64)
                    } else {
                        (rng.gen::<f64>(), rng.gen::<f64>())
                    }
                })
                .collect();
            let pts = point_set(&coords);
            for (pp, q) in [(1, 1), (2, 1), (2, 2), (3, 1), (8, 3)] {
                let params = CostParams::new(pp, q).unwrap();
                let fast = euclidean_mst(&pts, params);
                assert_eq!(fast.edges.len(), n - 1);
                let oracle: f64 = prim(&pts, params).iter().map(|e| e.cost).sum();
                let got: f64 = fast
                    .edges
                    .iter()
                    .map(|e| distance(&pts[e.u], &pts[e.v], params))
                    .sum();
                assert!(
                    (got - oracle).abs() <= 1e-9 * oracle.max(1.0),
                    "p={pp} n={n}: {got} vs {oracle}"
                );
                assert!(fast.edges.windows(2).all(|w| w[0].cost <= w[1].cost));
            }
        }
    }

    /// Brute force: scan every prefix of the sorted tree and compute the
    /// largest intra-cluster matching by explicit component labelling.
    fn oracle_index(a: &[Point], b: &[Point], k: usize, forest: &SpanningForest) -> usize {
        let n = a.len() + b.len();
        for i in 1..=forest.edges.len() {
            let mut label: Vec<usize> = (0..n).collect();
            loop {
                let mut changed = false;
                for e in &forest.edges[..i] {
                    let m = label[e.u].min(label[e.v]);
                    if label[e.u] != m || label[e.v] != m {
                        label[e.u] = m;
                        label[e.v] = m;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            let mut total = 0;
            for root in 0..n {
                let ca = (0..a.len()).filter(|&x| label[x] == root).count();
                let cb = (a.len()..n).filter(|&x| label[x] == root).count();
                total += ca.min(cb);
            }
            if total >= k {
                return i;
            }
        }
        unreachable!()
    }

    #[test]
    fn starting_scale_examples() {
        let params = CostParams::new(2, 1).unwrap();
        let a = vec![p(0.0, 0.0, 0)];
        let b = vec![p(1.0, 0.0, 0)];
        let s = starting_scale_index(&a, &b, 1, params).unwrap();
        assert_eq!(s.index, 1);
        assert_eq!(s.edge_cost, 1.0);
        assert!(matches!(
            starting_scale_index(&a, &b, 2, params),
            Err(GpmError::InfeasibleK { k: 2, max: 1 })
        ));

        // Two clusters, each single-coloured except for one far B point.
        let a = point_set(&[(0.0, 0.0), (0.1, 0.0), (0.0, 0.1)]);
        let b = point_set(&[(10.0, 10.0), (10.1, 10.0), (5.0, 5.0)]);
        let s = starting_scale_index(&a, &b, 1, params).unwrap();
        let first_cross = s
            .forest
            .edges
            .iter()
            .position(|e| (e.u < 3) != (e.v < 3))
            .unwrap();
        assert_eq!(s.index, first_cross + 1);
        assert_eq!(s.index, oracle_index(&a, &b, 1, &s.forest));
    }

    #[test]
    fn starting_scale_matches_prefix_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let a = point_set(&(0..12).map(|_| (rng.gen(), rng.gen())).collect::<Vec<_>>());
            let b = point_set(&(0..12).map(|_| (rng.gen(), rng.gen())).collect::<Vec<_>>());
            for k in [1, 5, 12] {
                let params = CostParams::new(2, 2).unwrap();
                let s = starting_scale_index(&a, &b, k, params).unwrap();
                assert_eq!(s.index, oracle_index(&a, &b, k, &s.forest));
                let m = intra_cluster_matching(&a, &b, k, &s);
                assert_eq!(m.len(), k);
            }
        }
    }

    #[test]
    fn cost_symmetry_and_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = p(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0);
            let b = p(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0);
            for pp in [1, 2, 3, 8] {
                let c1 = cost(&a, &b, CostParams::new(pp, 1).unwrap());
                assert_eq!(c1, cost(&b, &a, CostParams::new(pp, 1).unwrap()));
                if c1 >= 1.0 {
                    let c2 = cost(&a, &b, CostParams::new(pp, 2).unwrap());
                    let c3 = cost(&a, &b, CostParams::new(pp, 3).unwrap());
                    assert!(c1 <= c2 && c2 <= c3);
                }
            }
            let c1 = cost(&a, &b, CostParams::new(2, 1).unwrap());
            let c2 = cost(&a, &b, CostParams::new(2, 2).unwrap());
            assert!((c1 * c1 - c2).abs() <= 1e-12 * c2.max(1.0));
        }
    }
}
