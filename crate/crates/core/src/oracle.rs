//! Reference solvers on an explicit cost matrix.
//!
//! Only [`crate::geometry::cost`] is shared with the fast solvers.

use crate::error::{GpmError, Result};
use crate::geometry::{cost, exact_sum, CostParams, Point};
use crate::matching::Matching;

pub const BRUTE_FORCE_LIMIT: usize = 9;

#[derive(Debug, Clone)]
pub struct DenseInstance {
    pub a_ids: Vec<u32>,
    pub b_ids: Vec<u32>,
    /// `costs[i][j] = cost(a_i, b_j)`.
    pub costs: Vec<Vec<f64>>,
}

impl DenseInstance {
    pub fn from_points(a: &[Point], b: &[Point], params: CostParams) -> Self {
        let costs = a
            .iter()
            .map(|pa| b.iter().map(|pb| cost(pa, pb, params)).collect())
            .collect();
        DenseInstance {
            a_ids: a.iter().map(|p| p.id).collect(),
            b_ids: b.iter().map(|p| p.id).collect(),
            costs,
        }
    }

    pub fn from_matrix(costs: Vec<Vec<f64>>) -> Self {
        let r = costs.len();
        let n = costs.first().map_or(0, |row| row.len());
        DenseInstance {
            a_ids: (0..r as u32).collect(),
            b_ids: (0..n as u32).collect(),
            costs,
        }
    }

    pub fn rows(&self) -> usize {
        self.a_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.b_ids.len()
    }

    fn matching_from(&self, mut pairs: Vec<(usize, usize)>) -> Matching {
        pairs.sort_by_key(|&(i, j)| (self.a_ids[i], self.b_ids[j]));
        let total = exact_sum(pairs.iter().map(|&(i, j)| self.costs[i][j]));
        Matching {
            pairs: pairs
                .into_iter()
                .map(|(i, j)| (self.a_ids[i], self.b_ids[j]))
                .collect(),
            cost: total,
        }
    }
}

struct Enumerator<'a> {
    inst: &'a DenseInstance,
    order: Vec<usize>,
    // `suffix_mins[d]` holds the row minima of `order[d..]`, ascending.
    suffix_mins: Vec<Vec<f64>>,
    cols_by_cost: Vec<Vec<usize>>,
    used: Vec<bool>,
    current: Vec<(usize, usize)>,
    best: Option<(f64, Vec<(usize, usize)>)>,
}

impl Enumerator<'_> {
    fn run(&mut self, depth: usize, need: usize, partial: f64) {
        if need == 0 {
            let total = exact_sum(self.current.iter().map(|&(i, j)| self.inst.costs[i][j]));
            if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                self.best = Some((total, self.current.clone()));
            }
            return;
        }
        if self.order.len() - depth < need {
            return;
        }
        if let Some((b, _)) = &self.best {
            let mut bound = partial;
            for &m in &self.suffix_mins[depth][..need] {
                bound += m;
            }
            if bound > *b + b.abs() * 1e-12 {
                return;
            }
        }
        let row = self.order[depth];
        for idx in 0..self.cols_by_cost[row].len() {
            let col = self.cols_by_cost[row][idx];
            if self.used[col] {
                continue;
            }
            self.used[col] = true;
            self.current.push((row, col));
            self.run(depth + 1, need - 1, partial + self.inst.costs[row][col]);
            self.current.pop();
            self.used[col] = false;
        }
        self.run(depth + 1, need, partial);
    }
}

/// Exact minimum over all size-`k` matchings by exhaustive enumeration with
/// branch-and-bound pruning.
pub fn brute_force_matching(inst: &DenseInstance, k: usize) -> Result<Matching> {
    let (r, n) = (inst.rows(), inst.cols());
    if r > BRUTE_FORCE_LIMIT || n > BRUTE_FORCE_LIMIT {
        return Err(GpmError::TooLarge {
            r,
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if k > r.min(n) {
        return Err(GpmError::InfeasibleK { k, max: r.min(n) });
    }
    if k == 0 {
        return Ok(Matching::empty());
    }
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by_key(|&i| inst.a_ids[i]);
    let row_min: Vec<f64> = inst
        .costs
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let suffix_mins = (0..=r)
        .map(|d| {
            let mut v: Vec<f64> = order[d..].iter().map(|&i| row_min[i]).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let cols_by_cost = inst
        .costs
        .iter()
        .map(|row| {
            let mut cols: Vec<usize> = (0..n).collect();
            cols.sort_by(|&x, &y| row[x].total_cmp(&row[y]));
            cols
        })
        .collect();
    let mut e = Enumerator {
        inst,
        order,
        suffix_mins,
        cols_by_cost,
        used: vec![false; n],
        current: Vec::new(),
        best: None,
    };
    e.run(0, k, 0.0);
    let (_, pairs) = e.best.expect("k <= min(r, n) admits a matching");
    Ok(inst.matching_from(pairs))
}

const INF_CAP: i64 = i64::MAX / 4;

#[derive(Debug, Clone)]
struct Arc {
    head: usize,
    cap: i64,
    cost: f64,
}

#[derive(Debug, Clone, Default)]
struct Network {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Network {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, u: usize, v: usize, cap: i64, cost: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { head: v, cap, cost });
        self.arcs.push(Arc {
            head: u,
            cap: 0,
            cost: -cost,
        });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// Successive shortest paths with Dijkstra on reduced costs. Returns the
    /// amount sent and the final potentials.
    fn run(&mut self, s: usize, t: usize, amount: i64) -> (i64, Vec<f64>) {
        let n = self.adj.len();
        let mut pot = vec![0.0; n];
        let mut sent = 0;
        while sent < amount {
            let mut dist = vec![f64::INFINITY; n];
            let mut via = vec![usize::MAX; n];
            let mut done = vec![false; n];
            dist[s] = 0.0;
            loop {
                let mut u = usize::MAX;
                for v in 0..n {
                    if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                for &e in &self.adj[u] {
                    let arc = &self.arcs[e];
                    if arc.cap == 0 || done[arc.head] {
                        continue;
                    }
                    let rc = (arc.cost + pot[u] - pot[arc.head]).max(0.0);
                    let nd = dist[u] + rc;
                    if nd < dist[arc.head] {
                        dist[arc.head] = nd;
                        via[arc.head] = e;
                    }
                }
            }
            if !dist[t].is_finite() {
                break;
            }
            let reach_max = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
            for v in 0..n {
                pot[v] += if dist[v].is_finite() { dist[v] } else { reach_max };
            }
            let mut push = amount - sent;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.arcs[e].cap);
                v = self.arcs[e ^ 1].head;
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.arcs[e].cap -= push;
                self.arcs[e ^ 1].cap += push;
                v = self.arcs[e ^ 1].head;
            }
            sent += push;
        }
        (sent, pot)
    }

    fn certified(&self, pot: &[f64], tol: f64) -> bool {
        (0..self.adj.len()).all(|u| {
            self.adj[u].iter().all(|&e| {
                let arc = &self.arcs[e];
                arc.cap == 0 || arc.cost + pot[u] - pot[arc.head] >= -tol
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct OracleFlow {
    /// `flow[i][j]` units from `a_i` to `b_j`.
    pub flow: Vec<Vec<i64>>,
    pub cost: f64,
    pub sent: i64,
    /// Whether the final potentials certify optimality by a residual scan.
    pub certified: bool,
}

/// Min-cost flow from a super source through `s→a_i` (capacity `supply[i]`),
/// `a_i→b_j` (capacity `edge_capacity`, unbounded if `None`) and `b_j→t`
/// (capacity `demand[j]`), sending exactly `amount` units.
pub fn ssp_mcmf(
    inst: &DenseInstance,
    supply: &[i64],
    demand: &[i64],
    edge_capacity: Option<i64>,
    amount: i64,
) -> Result<OracleFlow> {
    let (r, n) = (inst.rows(), inst.cols());
    if supply.len() != r || demand.len() != n {
        return Err(GpmError::BadIds("supply/demand length mismatch".into()));
    }
    let s = r + n;
    let t = s + 1;
    let mut net = Network::new(r + n + 2);
    for (i, &cap) in supply.iter().enumerate() {
        net.add(s, i, cap, 0.0);
    }
    let mut edge_ids = vec![vec![0usize; n]; r];
    for i in 0..r {
        for j in 0..n {
            edge_ids[i][j] = net.add(i, r + j, edge_capacity.unwrap_or(INF_CAP), inst.costs[i][j]);
        }
    }
    for (j, &cap) in demand.iter().enumerate() {
        net.add(r + j, t, cap, 0.0);
    }
    let (sent, pot) = net.run(s, t, amount);
    if sent < amount {
        return Err(GpmError::Conservation(format!(
            "only {sent} of {amount} units can be routed"
        )));
    }
    let mut flow = vec![vec![0i64; n]; r];
    let mut terms = Vec::new();
    let mut scale = 0.0f64;
    for i in 0..r {
        for j in 0..n {
            let f = net.arcs[edge_ids[i][j] ^ 1].cap;
            flow[i][j] = f;
            terms.push(f as f64 * inst.costs[i][j]);
            scale = scale.max(inst.costs[i][j].abs());
        }
    }
    let certified = net.certified(&pot, 1e-9 * scale.max(1.0));
    Ok(OracleFlow {
        flow,
        cost: exact_sum(terms),
        sent,
        certified,
    })
}

/// Minimum-cost size-`k` matching via unit-capacity min-cost flow.
pub fn ssp_matching(inst: &DenseInstance, k: usize) -> Result<Matching> {
    let (r, n) = (inst.rows(), inst.cols());
    if k > r.min(n) {
        return Err(GpmError::InfeasibleK { k, max: r.min(n) });
    }
    let out = ssp_mcmf(inst, &vec![1; r], &vec![1; n], Some(1), k as i64)?;
    let pairs = (0..r)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| out.flow[i][j] > 0)
        .collect();
    Ok(inst.matching_from(pairs))
}

/// Optimal transportation between balanced integer supplies and demands.
pub fn ssp_transport(inst: &DenseInstance, supply: &[i64], demand: &[i64]) -> Result<OracleFlow> {
    let total_s: i64 = supply.iter().sum();
    let total_d: i64 = demand.iter().sum();
    if total_s != total_d {
        return Err(GpmError::Unbalanced {
            supply: total_s,
            demand: total_d,
        });
    }
    ssp_mcmf(inst, supply, demand, None, total_s)
}
