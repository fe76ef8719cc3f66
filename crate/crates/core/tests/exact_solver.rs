mod common;

use common::*;
use gpm_core::hungarian::{solve_exact_with, BcpMode, MatchingState};
use gpm_core::oracle::{brute_force_matching, ssp_matching, DenseInstance};
use gpm_core::{cost, solve_exact, CostParams};
use rand::Rng;

#[test]
fn equals_brute_force_on_small_instances() {
    let mut r = rng(11);
    for round in 0..120 {
        let params = all_params()[round % 9];
        let (na, nb) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let a = if round % 3 == 0 { lattice_points(&mut r, na, 4) } else { random_points(&mut r, na, 10.0) };
        let b = if round % 3 == 0 { lattice_points(&mut r, nb, 4) } else { random_points(&mut r, nb, 10.0) };
        let inst = DenseInstance::from_points(&a, &b, params);
        for k in 0..=na.min(nb) {
            let got = solve_exact(&a, &b, k, params).unwrap();
            let want = brute_force_matching(&inst, k).unwrap();
            assert_eq!(got.len(), k);
            assert_eq!(got.cost, want.cost, "round {round} k {k}");
        }
    }
}

#[test]
fn equals_flow_oracle_and_certifies() {
    let mut r = rng(12);
    for round in 0..40 {
        let params = all_params()[round % 9];
        let (na, nb) = (r.gen_range(5..=40), r.gen_range(5..=40));
        let a = random_points(&mut r, na, 100.0);
        let b = random_points(&mut r, nb, 100.0);
        let k = r.gen_range(1..=na.min(nb));
        let sol = solve_exact_with(&a, &b, k, params, BcpMode::Rewind).unwrap();
        let want = ssp_matching(&DenseInstance::from_points(&a, &b, params), k).unwrap();
        assert!(rel_close(sol.matching.cost, want.cost, 1e-9), "{} vs {}", sol.matching.cost, want.cost);
        let bad = certificate_violations(&a, &b, params, &sol.matching.pairs, &sol.potential_a, &sol.potential_b);
        // an exact float certificate is reported iff the scan agrees
        assert_eq!(bad == 0, sol.stats.polish_rounds != usize::MAX, "round {round}");
        let tol = 1e-12 * sol.potential_a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let rc = cost(x, y, params) - sol.potential_a[i] + sol.potential_b[j];
                assert!(rc >= -tol, "round {round}: edge {i},{j} has {rc}");
            }
        }
    }
}

#[test]
fn cost_is_monotone_in_k() {
    let mut r = rng(13);
    let params = CostParams::new(2, 2).unwrap();
    let a = random_points(&mut r, 30, 1.0);
    let b = random_points(&mut r, 25, 1.0);
    let mut prev = 0.0;
    for k in 1..=25 {
        let c = solve_exact(&a, &b, k, params).unwrap().cost;
        assert!(c >= prev);
        prev = c;
    }
}

#[test]
fn rewind_and_rebuild_agree() {
    let mut r = rng(14);
    for round in 0..30 {
        let params = all_params()[round % 9];
        let a = lattice_points(&mut r, 30, 6);
        let b = lattice_points(&mut r, 35, 6);
        let k = r.gen_range(1..=30);
        let x = solve_exact_with(&a, &b, k, params, BcpMode::Rewind).unwrap();
        let y = solve_exact_with(&a, &b, k, params, BcpMode::Rebuild).unwrap();
        assert_eq!(x.matching, y.matching);
        for ops in &x.stats.bcp_ops_per_search {
            assert!(*ops <= 12 * k as u64, "{ops} ops for k={k}");
        }
    }
}

#[test]
fn rewound_contents_equal_fresh_rebuild() {
    let mut r = rng(15);
    let params = CostParams::new(2, 1).unwrap();
    let a = random_points(&mut r, 12, 10.0);
    let b = random_points(&mut r, 15, 10.0);
    let mut st = MatchingState::new(&a, &b, params, BcpMode::Rewind).unwrap();
    let mut reference = MatchingState::new(&a, &b, params, BcpMode::Rebuild).unwrap();
    for _ in 0..10 {
        let p = st.search().unwrap();
        st.augment(&p).unwrap();
        st.rewind_search(p.a_nodes[0]).unwrap();
        let q = reference.search().unwrap();
        assert_eq!(p, q);
        reference.augment(&q).unwrap();
        reference.rewind_search(q.a_nodes[0]).unwrap();
        // contents expected from scratch: unmatched A and all of B with stored potentials
        let (pp, qq) = st.bcp_snapshot();
        let want_p: Vec<usize> = (0..a.len()).filter(|&i| st.mate_of_a(i).is_none()).collect();
        assert_eq!(pp.iter().map(|w| w.point.id as usize).collect::<Vec<_>>(), want_p);
        for w in &pp {
            assert_eq!(w.weight, st.potential_a(w.point.id as usize) - st.delta());
        }
        assert_eq!(qq.len(), b.len());
        for w in &qq {
            assert_eq!(w.weight, st.potential_b(w.point.id as usize));
        }
    }
}

#[test]
fn feasibility_and_admissibility_after_each_search() {
    let mut r = rng(16);
    for round in 0..20 {
        let params = all_params()[round % 9];
        let a = random_points(&mut r, 15, 10.0);
        let b = random_points(&mut r, 18, 10.0);
        let k = 15;
        let mut st = MatchingState::new(&a, &b, params, BcpMode::Rewind).unwrap();
        while st.matched() < k {
            let path = st.search().unwrap();
            let scale = st.delta().abs().max(1.0) * 1e-9;
            for i in 0..a.len() {
                for j in 0..b.len() {
                    let rc = cost(&a[i], &b[j], params) - st.potential_a(i) + st.potential_b(j);
                    assert!(rc >= -scale, "infeasible edge {i},{j}: {rc}");
                }
            }
            for t in 0..path.a_nodes.len() {
                let (i, j) = (path.a_nodes[t], path.b_nodes[t]);
                let rc = cost(&a[i], &b[j], params) - st.potential_a(i) + st.potential_b(j);
                assert!(rc.abs() <= scale, "inadmissible path edge: {rc}");
            }
            assert!(st.stats().max_relaxations_per_search <= 2 * k + 1);
            st.augment(&path).unwrap();
            st.rewind_search(path.a_nodes[0]).unwrap();
        }
    }
}

#[test]
fn duplicate_points_allowed() {
    let a = gpm_core::geometry::point_set(&[(1.0, 1.0), (1.0, 1.0), (3.0, 0.0)]);
    let b = gpm_core::geometry::point_set(&[(1.0, 1.0), (1.0, 1.0)]);
    let m = solve_exact(&a, &b, 2, CostParams::new(2, 1).unwrap()).unwrap();
    assert_eq!(m.cost, 0.0);
}
