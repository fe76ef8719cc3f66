//! Structural and optimality checks of a solution against its instance.

use std::collections::HashSet;

use gpm_core::oracle::{ssp_matching, ssp_transport, DenseInstance};
use gpm_core::{cost, solve_exact, Result};

use crate::format::{real, Instance, Solution};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.ok)
    }

    fn add(&mut self, name: &'static str, ok: bool, detail: impl Into<String>) -> bool {
        self.checks.push(Check {
            name,
            ok,
            detail: detail.into(),
        });
        ok
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.ok { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {}\n", c.name, c.detail));
        }
        out.push_str(if self.passed() { "PASS\n" } else { "FAIL\n" });
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Required matching size; defaults to the number of pairs.
    pub k: Option<usize>,
    /// Check `cost ≤ (1+ε)·OPT` instead of optimality.
    pub eps: Option<f64>,
    /// Largest `r·n` for which optimal costs are recomputed.
    pub oracle_limit: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            k: None,
            eps: None,
            oracle_limit: 250_000,
        }
    }
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0)
}

pub fn verify(inst: &Instance, sol: &Solution, opts: VerifyOptions) -> Result<Report> {
    let params = inst.params()?;
    let (r, n) = (inst.a.len(), inst.b.len());
    let mut rep = Report::default();
    let bad: Vec<_> = sol
        .pairs
        .iter()
        .filter(|&&(x, y, _)| x as usize >= r || y as usize >= n)
        .collect();
    let in_range = rep.add(
        "ids",
        bad.is_empty(),
        match bad.first() {
            None => format!("{} records reference existing points", sol.pairs.len()),
            Some((x, y, _)) => format!("pair ({x}, {y}) references a missing point"),
        },
    );
    if !in_range {
        return Ok(rep);
    }
    let mut pairs = sol.pairs.clone();
    pairs.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    let recomputed = pairs.iter().fold(0.0, |acc, &(x, y, f)| {
        acc + f * cost(&inst.a[x as usize], &inst.b[y as usize], params)
    });
    rep.add(
        "cost",
        close(recomputed, sol.cost),
        format!("reported {}, recomputed {}", real(sol.cost), real(recomputed)),
    );
    let small = r * n <= opts.oracle_limit;
    match (&inst.supply, &inst.demand) {
        (Some(supply), Some(demand)) => {
            let neg = pairs.iter().find(|p| !(p.2 >= 0.0 && p.2.is_finite()));
            rep.add(
                "flows",
                neg.is_none(),
                match neg {
                    None => "all flows nonnegative".to_string(),
                    Some(p) => format!("flow {} on ({}, {})", p.2, p.0, p.1),
                },
            );
            let plan = gpm_core::transport::TransportPlan {
                flows: pairs.clone(),
                cost: recomputed,
            };
            let err = plan.marginal_error(supply, demand);
            rep.add("marginals", err <= 1e-9, format!("largest row/column error {err}"));
            if small {
                let inst_d = DenseInstance::from_points(&inst.a, &inst.b, params);
                let opt = ssp_transport(&inst_d, supply, demand)?.cost;
                rep.add(
                    "optimality",
                    close(recomputed, opt),
                    format!("cost {}, oracle {}", real(recomputed), real(opt)),
                );
            }
        }
        _ => {
            let non_unit = pairs.iter().find(|p| p.2 != 1.0);
            rep.add(
                "unit flows",
                non_unit.is_none(),
                match non_unit {
                    None => "every pair carries one unit".to_string(),
                    Some(p) => format!("pair ({}, {}) carries {}", p.0, p.1, p.2),
                },
            );
            let mut seen_a = HashSet::new();
            let mut seen_b = HashSet::new();
            let twice = pairs.iter().find_map(|&(x, y, _)| {
                if !seen_a.insert(x) {
                    Some(format!("node matched twice: A {x}"))
                } else if !seen_b.insert(y) {
                    Some(format!("node matched twice: B {y}"))
                } else {
                    None
                }
            });
            let disjoint = rep.add(
                "disjoint",
                twice.is_none(),
                twice.unwrap_or_else(|| "no node matched twice".into()),
            );
            let k = opts.k.unwrap_or(pairs.len());
            rep.add("size", pairs.len() == k, format!("{} pairs, expected {k}", pairs.len()));
            if small && disjoint && k <= r.min(n) {
                let opt = solve_exact(&inst.a, &inst.b, k, params)?.cost;
                if r * n <= 40_000 {
                    let inst_d = DenseInstance::from_points(&inst.a, &inst.b, params);
                    let oracle = ssp_matching(&inst_d, k)?.cost;
                    rep.add(
                        "oracle",
                        close(opt, oracle),
                        format!("exact solver {}, flow oracle {}", real(opt), real(oracle)),
                    );
                }
                match opts.eps {
                    Some(eps) => {
                        let bound = (1.0 + eps) * opt + 1e-9 * opt;
                        rep.add(
                            "approximation",
                            recomputed <= bound,
                            format!(
                                "cost {} against (1+{eps})·OPT = {} with OPT = {}",
                                real(recomputed),
                                real(bound),
                                real(opt)
                            ),
                        );
                    }
                    None => {
                        rep.add(
                            "optimality",
                            close(recomputed, opt),
                            format!("cost {}, OPT {}", real(recomputed), real(opt)),
                        );
                    }
                }
            }
        }
    }
    Ok(rep)
}
