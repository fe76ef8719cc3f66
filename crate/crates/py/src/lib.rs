//! Python bindings. Points are passed as sequences of `(x, y)` tuples and
//! ids are the positions in those sequences.

use gpm_core::{CostParams, GpmError, Point};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn points(xy: &[(f64, f64)]) -> Vec<Point> {
    xy.iter()
        .enumerate()
        .map(|(i, &(x, y))| Point::new(x, y, i as u32))
        .collect()
}

fn err(e: GpmError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn params(p: u32, q: u32) -> PyResult<CostParams> {
    CostParams::new(p, q).map_err(err)
}

/// Minimum-cost matching of size `k`. Returns `(pairs, cost)`.
#[pyfunction]
#[pyo3(signature = (a, b, k, p = 2, q = 1))]
fn solve_exact(
    py: Python<'_>,
    a: Vec<(f64, f64)>,
    b: Vec<(f64, f64)>,
    k: usize,
    p: u32,
    q: u32,
) -> PyResult<(Vec<(u32, u32)>, f64)> {
    let params = params(p, q)?;
    let (a, b) = (points(&a), points(&b));
    let m = py
        .detach(|| gpm_core::solve_exact(&a, &b, k, params))
        .map_err(err)?;
    Ok((m.pairs, m.cost))
}

/// Size-`k` matching within a factor `1 + eps` of optimal.
#[pyfunction]
#[pyo3(signature = (a, b, k, eps = 0.1, p = 2, q = 1))]
fn solve_approx(
    py: Python<'_>,
    a: Vec<(f64, f64)>,
    b: Vec<(f64, f64)>,
    k: usize,
    eps: f64,
    p: u32,
    q: u32,
) -> PyResult<(Vec<(u32, u32)>, f64)> {
    let params = params(p, q)?;
    let (a, b) = (points(&a), points(&b));
    let sol = py
        .detach(|| gpm_core::solve_approx(&a, &b, k, params, eps))
        .map_err(err)?;
    Ok((sol.matching.pairs, sol.matching.cost))
}

/// Optimal transportation plan as `(flows, cost)` with `flows` a list of
/// `(a, b, amount)`.
#[pyfunction]
#[pyo3(signature = (a, b, supply, demand, p = 2, q = 1))]
fn solve_transport(
    py: Python<'_>,
    a: Vec<(f64, f64)>,
    b: Vec<(f64, f64)>,
    supply: Vec<i64>,
    demand: Vec<i64>,
    p: u32,
    q: u32,
) -> PyResult<(Vec<(u32, u32, f64)>, f64)> {
    let params = params(p, q)?;
    let (a, b) = (points(&a), points(&b));
    let sol = py
        .detach(|| gpm_core::solve_transport(&a, &b, &supply, &demand, params))
        .map_err(err)?;
    Ok((sol.plan.flows, sol.plan.cost))
}

#[pymodule]
fn gpm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(solve_approx, m)?)?;
    m.add_function(wrap_pyfunction!(solve_transport, m)?)?;
    Ok(())
}
