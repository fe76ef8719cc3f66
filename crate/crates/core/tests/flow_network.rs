mod common;

use common::{random_points, rng};
use gpm_core::flow_network::{support_checks, FlowNetwork, Node, ResidualArc};
use gpm_core::{cost, CostParams, GpmError, Matching, Point};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn grid(n: usize) -> Vec<Point> {
    (0..n)
        .map(|i| Point::new((i % 7) as f64, (i / 7) as f64 * 0.5, i as u32))
        .collect()
}

/// A random residual arc set: a walk of residual arcs from a random start,
/// never reusing an underlying arc.
fn random_residual_walk(net: &FlowNetwork, seed: u64, len: usize) -> Vec<ResidualArc> {
    let mut r = rng(seed);
    let (na, nb) = (net.a_points().len(), net.b_points().len());
    let mut used = std::collections::BTreeSet::new();
    let mut walk = Vec::new();
    let mut at = match r.gen_range(0..4) {
        0 => Node::S,
        1 => Node::T,
        2 => Node::A(r.gen_range(0..na)),
        _ => Node::B(r.gen_range(0..nb)),
    };
    for _ in 0..len {
        let mut options: Vec<Node> = match at {
            Node::S => (0..na).map(Node::A).collect(),
            Node::T => (0..nb).map(Node::B).collect(),
            Node::A(_) => std::iter::once(Node::S).chain((0..nb).map(Node::B)).collect(),
            Node::B(_) => std::iter::once(Node::T).chain((0..na).map(Node::A)).collect(),
        };
        options.shuffle(&mut r);
        let next = options.into_iter().find_map(|w| {
            let arc = if net.is_arc(at, w) {
                ResidualArc::forward(at, w)
            } else {
                ResidualArc::backward(at, w)
            };
            (net.is_residual(&arc) && !used.contains(&arc.underlying())).then_some(arc)
        });
        let Some(arc) = next else { break };
        used.insert(arc.underlying());
        walk.push(arc);
        at = arc.head;
    }
    walk
}

fn assert_cache_consistent(net: &FlowNetwork) {
    let mut sum = 0;
    let mut excess = 0;
    for (v, phi) in net.recompute_imbalances() {
        assert_eq!(net.imbalance(v), phi, "imbalance of {v:?}");
        sum += phi;
        excess += phi.max(0);
    }
    assert_eq!(sum, 0);
    assert_eq!(net.total_excess(), excess);
    assert_eq!(net.support_size(), net.saturated_arcs().len());
    assert!(net.support_size() as i64 <= 3 * (net.k() as i64 + excess));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn imbalance_cache_matches_recomputation(
        na in 1usize..9,
        nb in 1usize..9,
        walks in prop::collection::vec((any::<u64>(), 1usize..12), 1..25),
    ) {
        let k = na.min(nb);
        let mut net = FlowNetwork::new(&grid(na), &grid(nb), k, CostParams::default()).unwrap();
        assert_cache_consistent(&net);
        for (s, len) in walks {
            let g = random_residual_walk(&net, s, len);
            let before = net.saturated_arcs();
            net.augment_by(&g).unwrap();
            for arc in &g {
                let (from, to) = arc.underlying();
                prop_assert_eq!(net.is_saturated(from, to), !arc.backward);
            }
            // arcs outside g keep their state
            for (from, to) in before {
                if !g.iter().any(|a| a.underlying() == (from, to)) {
                    prop_assert!(net.is_saturated(from, to));
                }
            }
            assert_cache_consistent(&net);
        }
    }

    #[test]
    fn matching_round_trips_through_circulation(seed in any::<u64>(), n in 1usize..30) {
        let mut r = rng(seed);
        let a = random_points(&mut r, n, 10.0);
        let extra = r.gen_range(0..5);
        let b = random_points(&mut r, n + extra, 10.0);
        let k = r.gen_range(1..=n);
        let mut js: Vec<usize> = (0..b.len()).collect();
        js.shuffle(&mut r);
        let mut is: Vec<usize> = (0..n).collect();
        is.shuffle(&mut r);
        let pairs: Vec<(usize, usize)> = is.iter().copied().zip(js.iter().copied()).take(k).collect();
        let params = CostParams::new(r.gen_range(1..4), r.gen_range(1..4)).unwrap();
        let net = FlowNetwork::from_matching(&a, &b, &pairs, params).unwrap();
        prop_assert!(net.is_circulation());
        prop_assert_eq!(net.support_size(), 3 * k);
        let m = net.to_matching().unwrap();
        let ids: Vec<(u32, u32)> = pairs.iter().map(|&(i, j)| (a[i].id, b[j].id)).collect();
        let expected = Matching::from_pairs(ids, &a, &b, params).unwrap();
        prop_assert_eq!(&m, &expected);
        prop_assert_eq!(net.flow_cost().to_bits(), expected.cost.to_bits());
    }
}

#[test]
fn single_pair_network_shape() {
    let net = FlowNetwork::new(&grid(1), &grid(1), 1, CostParams::default()).unwrap();
    assert_eq!(net.node_count(), 4);
    let arcs = [
        (Node::S, Node::A(0)),
        (Node::A(0), Node::B(0)),
        (Node::B(0), Node::T),
    ];
    for (v, w) in arcs {
        assert!(net.is_arc(v, w));
        assert!(!net.is_arc(w, v));
    }
    assert!(!net.is_arc(Node::S, Node::B(0)));
    assert_eq!(net.nodes().map(|v| net.supply(v)).sum::<i64>(), 0);
}

#[test]
fn one_path_moves_one_unit() {
    let k = 3;
    let mut net = FlowNetwork::new(&grid(4), &grid(5), k, CostParams::default()).unwrap();
    net.augment_by(&[]).unwrap();
    assert!(net.saturated_arcs().is_empty());
    net.augment_by(&[
        ResidualArc::forward(Node::S, Node::A(2)),
        ResidualArc::forward(Node::A(2), Node::B(4)),
        ResidualArc::forward(Node::B(4), Node::T),
    ])
    .unwrap();
    assert_eq!(net.imbalance(Node::S), k as i64 - 1);
    assert_eq!(net.imbalance(Node::T), -(k as i64) + 1);
    assert_eq!(net.total_excess(), k as i64 - 1);
    net.desaturate(Node::A(2), Node::B(4)).unwrap();
    assert_eq!(net.imbalance(Node::A(2)), 1);
    assert_eq!(net.imbalance(Node::B(4)), -1);
    assert_cache_consistent(&net);
}

#[test]
fn rejects_non_residual_arcs() {
    let mut net = FlowNetwork::new(&grid(2), &grid(2), 2, CostParams::default()).unwrap();
    let back = ResidualArc::backward(Node::A(0), Node::S);
    assert!(matches!(net.augment_by(&[back]), Err(GpmError::NotResidual(_))));
    let fwd = ResidualArc::forward(Node::S, Node::A(0));
    assert!(matches!(net.augment_by(&[fwd, fwd]), Err(GpmError::NotResidual(_))));
    net.augment_by(&[fwd]).unwrap();
    assert!(matches!(net.augment_by(&[fwd]), Err(GpmError::NotResidual(_))));
    assert!(net.desaturate(Node::A(0), Node::B(1)).is_err());
    assert!(net.to_matching().is_err());
}

#[test]
fn infeasible_k_is_rejected() {
    for k in [0, 4] {
        let err = FlowNetwork::new(&grid(3), &grid(5), k, CostParams::default()).unwrap_err();
        assert_eq!(err, GpmError::InfeasibleK { k, max: 3 });
    }
}

#[test]
fn circulation_cost_equals_matching_cost() {
    let mut r = rng(11);
    for _ in 0..50 {
        let a = random_points(&mut r, 12, 5.0);
        let b = random_points(&mut r, 9, 5.0);
        let pairs: Vec<(usize, usize)> = (0..6).map(|i| (i * 2, i + 3)).collect();
        let params = CostParams::new(2, 2).unwrap();
        let net = FlowNetwork::from_matching(&a, &b, &pairs, params).unwrap();
        let direct: f64 = pairs.iter().map(|&(i, j)| cost(&a[i], &b[j], params)).sum();
        assert!((net.flow_cost() - direct).abs() <= 1e-12 * direct);
    }
}

#[test]
fn support_assertion_is_exercised() {
    let before = support_checks();
    let pairs = [(0, 0), (1, 1)];
    FlowNetwork::from_matching(&grid(2), &grid(2), &pairs, CostParams::default()).unwrap();
    assert!(support_checks() > before);
}
