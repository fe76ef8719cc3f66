//! Successive shortest paths on the complete bipartite graph.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{TransportPlan, TransportSolution, TransportStats};
use crate::error::{GpmError, Result};
use crate::geometry::{cost, CostParams, Point};

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Multi-source Dijkstra with Johnson potentials; every augmentation
/// empties a source, fills a sink or clears a backward arc.
pub fn solve(
    a: &[Point],
    b: &[Point],
    supply: &[i64],
    demand: &[i64],
    params: CostParams,
) -> Result<TransportSolution> {
    let (r, n) = (a.len(), b.len());
    let v = r + n;
    let c: Vec<Vec<f64>> = a.iter().map(|p| b.iter().map(|q| cost(p, q, params)).collect()).collect();
    let mut flow = vec![vec![0i64; n]; r];
    let mut excess: Vec<i64> = supply.iter().copied().chain(demand.iter().map(|d| -d)).collect();
    let mut h = vec![0.0f64; v];
    let mut stats = TransportStats {
        method: "dense".into(),
        ..Default::default()
    };
    let mut dist = vec![f64::INFINITY; v];
    let mut parent = vec![usize::MAX; v];
    let mut done = vec![false; v];
    loop {
        if excess.iter().all(|&e| e <= 0) {
            break;
        }
        dist.fill(f64::INFINITY);
        parent.fill(usize::MAX);
        done.fill(false);
        let mut heap = BinaryHeap::new();
        for u in 0..v {
            if excess[u] > 0 {
                dist[u] = 0.0;
                heap.push(Reverse(Key(0.0, u)));
            }
        }
        let mut sink = None;
        while let Some(Reverse(Key(d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if excess[u] < 0 {
                sink = Some(u);
                break;
            }
            let mut relax = |w: usize, arc: f64, heap: &mut BinaryHeap<Reverse<Key>>| {
                let nd = d + (arc + h[u] - h[w]).max(0.0);
                if nd < dist[w] {
                    dist[w] = nd;
                    parent[w] = u;
                    heap.push(Reverse(Key(nd, w)));
                }
            };
            if u < r {
                for j in 0..n {
                    if !done[r + j] {
                        relax(r + j, c[u][j], &mut heap);
                    }
                }
            } else {
                let j = u - r;
                for i in 0..r {
                    if flow[i][j] > 0 && !done[i] {
                        relax(i, -c[i][j], &mut heap);
                    }
                }
            }
        }
        let t = sink.ok_or_else(|| GpmError::Internal("no augmenting path".into()))?;
        let reach = dist[t];
        for u in 0..v {
            h[u] += dist[u].min(reach);
        }
        let mut amount = -excess[t];
        let mut x = t;
        let mut len = 0;
        while parent[x] != usize::MAX {
            let p = parent[x];
            if p >= r {
                amount = amount.min(flow[x][p - r]);
            }
            x = p;
            len += 1;
        }
        amount = amount.min(excess[x]);
        let s = x;
        let mut x = t;
        while parent[x] != usize::MAX {
            let p = parent[x];
            if p < r {
                flow[p][x - r] += amount;
            } else {
                flow[x][p - r] -= amount;
            }
            x = p;
        }
        excess[s] -= amount;
        excess[t] += amount;
        stats.augmentations += 1;
        stats.relaxations += len;
        stats.max_relaxations = stats.max_relaxations.max(len);
    }
    let mut flows = Vec::new();
    for i in 0..r {
        for j in 0..n {
            if flow[i][j] > 0 {
                flows.push((a[i].id, b[j].id, flow[i][j] as f64));
            }
        }
    }
    stats.max_support = flows.len();
    Ok(TransportSolution {
        plan: TransportPlan::from_flows(flows, a, b, params),
        stats,
    })
}
