use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gpm_cli::format::{Format, Instance, Solution};
use gpm_cli::generate::{generate, GenSpec, Kind};
use gpm_core::Point;
use proptest::prelude::*;
use tempfile::TempDir;

fn gpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gpm(args);
    assert!(
        out.status.success(),
        "gpm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const ONE_BY_ONE: &str = "GPM 1 2 1 1 1\nA 0.1 0.2\nB 0.7 0.9\n";

#[test]
fn generation_is_deterministic() {
    let args = ["gen", "--kind", "clustered", "--r", "40", "--n", "90", "--seed", "7"];
    assert_eq!(ok(&args), ok(&args));
    let other = ok(&["gen", "--kind", "clustered", "--r", "40", "--n", "90", "--seed", "8"]);
    assert_ne!(ok(&args), other);
}

#[test]
fn uniform_points_lie_in_the_unit_square() {
    let inst = Instance::parse(&ok(&["gen", "--r", "100", "--n", "100", "--seed", "3"])).unwrap();
    assert_eq!((inst.a.len(), inst.b.len()), (100, 100));
    for p in inst.a.iter().chain(&inst.b) {
        assert!((0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y));
    }
    assert!(!inst.is_transport());
}

#[test]
fn transport_generation_balances() {
    for (kind, r, n) in [("uniform", 5, 50), ("grid", 7, 7), ("clustered", 30, 1000), ("uniform", 9, 3)] {
        let text = ok(&["gen", "--kind", kind, "--r", &r.to_string(), "--n", &n.to_string(), "--u", "5"]);
        let inst = Instance::parse(&text).unwrap();
        let supply = inst.supply.unwrap();
        let demand = inst.demand.unwrap();
        assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>());
        assert!(demand[..n - 1].iter().all(|&d| (1..=5).contains(&d)));
        assert!(supply.iter().chain(&demand).all(|&x| x >= 1));
    }
}

#[test]
fn one_by_one_exact_match() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "one.gpm", ONE_BY_ONE);
    let out = ok(&["match-exact", s(&inst), "--k", "1"]);
    let sol = Solution::parse(&out).unwrap();
    assert_eq!(sol.pairs, vec![(0, 0, 1.0)]);
    let expected = gpm_core::cost(&Point::new(0.1, 0.2, 0), &Point::new(0.7, 0.9, 0), Default::default());
    assert_eq!(sol.cost, expected);
    assert!(out.contains(&format!("COST {expected:.16e}")), "{out}");
}

#[test]
fn infeasible_k_exits_with_code_two() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "one.gpm", ONE_BY_ONE);
    for cmd in ["match-exact", "match-approx"] {
        let out = gpm(&[cmd, s(&inst), "--k", "2"]);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible k"));
    }
}

#[test]
fn malformed_input_fails_cleanly() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "bad.gpm", "GPM 1 2 1 2 1\nA 0 0\nB x 1\n");
    let out = gpm(&["match-exact", s(&inst), "--k", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn approx_then_verify_passes() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "i.gpm", &ok(&["gen", "--r", "60", "--n", "80", "--seed", "2"]));
    let sol = dir.path().join("s.txt");
    ok(&["match-approx", s(&inst), "--k", "30", "--eps", "0.1", "--out", s(&sol)]);
    let report = ok(&["verify", s(&inst), s(&sol), "--k", "30", "--eps", "0.1"]);
    assert!(report.ends_with("PASS\n"), "{report}");
    assert!(report.contains("PASS approximation"));
}

#[test]
fn exact_and_transport_solutions_verify() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "i.gpm", &ok(&["gen", "--r", "20", "--n", "25", "--seed", "4"]));
    let sol = write(&dir, "s.txt", &ok(&["match-exact", s(&inst), "--k", "12"]));
    let report = ok(&["verify", s(&inst), s(&sol)]);
    assert!(report.contains("PASS optimality"), "{report}");

    let inst = write(&dir, "t.gpm", &ok(&["gen", "--r", "4", "--n", "30", "--u", "6", "--seed", "4"]));
    let sol = write(&dir, "t.txt", &ok(&["transport", s(&inst)]));
    let report = ok(&["verify", s(&inst), s(&sol)]);
    assert!(report.contains("PASS marginals"), "{report}");
    assert!(report.contains("PASS optimality"), "{report}");
}

#[test]
fn verify_reports_double_matching() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "i.gpm", "GPM 1 1 1 2 2\nA 0 0\nA 1 0\nB 0 1\nB 1 1\n");
    let sol = write(&dir, "s.txt", "PAIR 0 1 1\nPAIR 1 1 1\nCOST 3.0\n");
    let out = gpm(&["verify", s(&inst), s(&sol)]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL disjoint: node matched twice: B 1"), "{text}");
}

#[test]
fn verify_rejects_corrupted_approximation() {
    let dir = TempDir::new().unwrap();
    let inst_text = ok(&["gen", "--r", "30", "--n", "30", "--seed", "9"]);
    let inst = write(&dir, "i.gpm", &inst_text);
    let parsed = Instance::parse(&inst_text).unwrap();
    // pair every a with the farthest free b
    let params = parsed.params().unwrap();
    let mut free: Vec<usize> = (0..30).collect();
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (i, a) in parsed.a.iter().enumerate().take(10) {
        let (pos, &j) = free
            .iter()
            .enumerate()
            .max_by(|x, y| {
                let cx = gpm_core::cost(a, &parsed.b[*x.1], params);
                let cy = gpm_core::cost(a, &parsed.b[*y.1], params);
                cx.total_cmp(&cy)
            })
            .unwrap();
        free.remove(pos);
        total += gpm_core::cost(a, &parsed.b[j], params);
        pairs.push((i as u32, j as u32, 1.0));
    }
    let sol = Solution { pairs, cost: total };
    let sol_path = write(&dir, "s.txt", &sol.to_text());
    let out = gpm(&["verify", s(&inst), s(&sol_path), "--k", "10", "--eps", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("FAIL approximation")).expect("failure line");
    assert!(line.contains("cost") && line.contains("OPT ="), "{line}");
}

#[test]
fn structured_format_round_trips_through_the_cli() {
    let dir = TempDir::new().unwrap();
    let json = ok(&["gen", "--r", "5", "--n", "9", "--u", "3", "--format", "structured"]);
    let text = ok(&["gen", "--r", "5", "--n", "9", "--u", "3"]);
    assert_eq!(Instance::parse(&json).unwrap(), Instance::parse(&text).unwrap());
    let inst = write(&dir, "i.json", &json);
    let sol = ok(&["transport", s(&inst), "--format", "structured"]);
    assert!(sol.trim_start().starts_with('{'));
    let plain = ok(&["transport", s(&inst)]);
    assert_eq!(Solution::parse(&sol).unwrap(), Solution::parse(&plain).unwrap());
}

#[test]
fn plots_draw_one_element_per_pair_or_arc() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "one.gpm", ONE_BY_ONE);
    let sol = write(&dir, "one.txt", &ok(&["match-exact", s(&inst), "--k", "1"]));
    let svg = ok(&["plot", s(&inst), s(&sol)]);
    assert_eq!(svg.matches("<line").count(), 1);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    let inst = write(&dir, "t.gpm", &ok(&["gen", "--r", "3", "--n", "20", "--u", "4"]));
    let sol_text = ok(&["transport", s(&inst)]);
    let arcs = Solution::parse(&sol_text).unwrap().pairs.len();
    let sol = write(&dir, "t.txt", &sol_text);
    let svg = ok(&["plot", s(&inst), s(&sol)]);
    assert_eq!(svg.matches("<path").count(), arcs);
    assert_eq!(svg.matches("<line").count(), 0);
    assert_eq!(svg, ok(&["plot", s(&inst), s(&sol)]));
}

#[test]
fn bench_emits_one_row_per_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bench.toml",
        r#"
repetitions = 3
seed = 11

[[runs]]
solver = "match-exact"
sizes = [[100, 100], [800, 800], [3200, 3200]]
k_frac = 0.1

[[runs]]
solver = "match-approx"
sizes = [[100, 100], [800, 800], [3200, 3200]]
k_frac = 0.1
eps = [0.1]
"#,
    );
    let csv = ok(&["bench", s(&cfg)]);
    let mut rows = csv.lines();
    assert_eq!(
        rows.next().unwrap(),
        "solver,instance,n,r,k,eps,cost,scales,iterations,relaxations,bcp_ops,millis"
    );
    let rows: Vec<Vec<String>> = rows.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 18);
    for solver in ["match-exact", "match-approx"] {
        let mut medians = Vec::new();
        for n in ["100", "800", "3200"] {
            let mut t: Vec<f64> = rows
                .iter()
                .filter(|r| r[0] == solver && r[2] == n)
                .map(|r| r[11].parse().unwrap())
                .collect();
            assert_eq!(t.len(), 3);
            t.sort_by(f64::total_cmp);
            medians.push(t[1]);
        }
        assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{solver}: {medians:?}");
    }
    // deterministic apart from timings
    let again = ok(&["bench", s(&cfg)]);
    let strip = |text: &str| -> Vec<String> {
        text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    assert_eq!(strip(&csv), strip(&again));
}

fn arb_instance() -> impl Strategy<Value = Instance> {
    let coord = prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3..1e3f64];
    (
        1u32..9,
        1u32..4,
        prop::collection::vec((coord.clone(), coord.clone(), 0i64..50), 0..8),
        prop::collection::vec((coord.clone(), coord, 0i64..50), 0..8),
        any::<bool>(),
    )
        .prop_map(|(p, q, a, b, transport)| {
            let pts = |v: &Vec<(f64, f64, i64)>| -> Vec<Point> {
                v.iter().enumerate().map(|(i, t)| Point::new(t.0, t.1, i as u32)).collect()
            };
            let supply: Vec<i64> = a.iter().map(|t| t.2).collect();
            let mut demand: Vec<i64> = b.iter().map(|t| t.2).collect();
            let transport = transport && !b.is_empty();
            if transport {
                let last = demand.len() - 1;
                demand[last] = supply.iter().sum::<i64>() - demand[..last].iter().sum::<i64>();
            }
            let balanced = transport && demand.iter().all(|&d| d >= 0);
            Instance {
                p,
                q,
                a: pts(&a),
                b: pts(&b),
                supply: balanced.then_some(supply),
                demand: balanced.then_some(demand),
            }
        })
}

proptest! {
    #[test]
    fn instances_round_trip(inst in arb_instance()) {
        for format in [Format::Text, Format::Structured] {
            let text = inst.serialize(format);
            prop_assert_eq!(&Instance::parse(&text).unwrap(), &inst);
        }
    }

    #[test]
    fn solutions_round_trip(
        pairs in prop::collection::vec((0u32..100, 0u32..100, 0.0..1e6f64), 0..10),
        cost in any::<f64>().prop_filter("finite", |x| x.is_finite()),
    ) {
        let sol = Solution { pairs, cost };
        for format in [Format::Text, Format::Structured] {
            prop_assert_eq!(&Solution::parse(&sol.serialize(format)).unwrap(), &sol);
        }
    }
}

#[test]
fn generator_kinds_differ() {
    let spec = |kind| GenSpec {
        kind,
        r: 16,
        n: 16,
        seed: 1,
        u: None,
        p: 2,
        q: 1,
    };
    let grid = generate(&spec(Kind::Grid)).unwrap();
    assert_eq!(grid.a[5], Point::new(0.25, 0.25, 5));
    assert_ne!(generate(&spec(Kind::Uniform)).unwrap(), generate(&spec(Kind::Clustered)).unwrap());
}
