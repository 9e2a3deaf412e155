//! Python bindings. Instances are passed as plain lists; strategies come
//! back as lists of floats.

use campaign_core::experiments::{solve_ms_stochastic, MsSettings, SUPPORT_TOL};
use campaign_core::{
    constrained_equilibrium, double_oracle_solve, payoff_qa, solve_matrix_game, win_prob_ec, BarrierConfig, DoubleOracleConfig,
    ElectionInstance, PayoffMatrix, StateModel, StrategyProfile,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: campaign_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn instance(
    v: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    w: Option<Vec<u32>>,
    k: Option<f64>,
) -> PyResult<ElectionInstance> {
    let mut inst = ElectionInstance::new(v, alpha, beta, gamma).map_err(err)?;
    if let Some(w) = w {
        inst = inst.with_electoral_votes(w).map_err(err)?;
    }
    if let Some(k) = k {
        inst = inst.with_noise(k).map_err(err)?;
    }
    Ok(inst)
}

fn model(limit_k0: bool) -> StateModel {
    if limit_k0 {
        StateModel::LimitK0
    } else {
        StateModel::Beta
    }
}

/// Pure equilibrium of the deterministic majority game.
/// Returns `(x, y, q_a)`.
#[pyfunction]
fn solve_ms_det(v: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let inst = instance(v, alpha, beta, gamma, None, None)?;
    let eq = constrained_equilibrium(&inst, &BarrierConfig::default()).map_err(err)?;
    let q = payoff_qa(&inst, &eq);
    Ok((eq.x.into_coords(), eq.y.into_coords(), q))
}

/// Monte-Carlo equilibrium of the noisy majority game.
/// Returns `(x, y, win_prob, win_se)`.
#[pyfunction]
#[pyo3(signature = (v, alpha, beta, gamma, k, batch_size=50_000, max_iters=300, seed=1))]
#[allow(clippy::too_many_arguments)]
fn solve_ms_stoch(
    v: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    k: f64,
    batch_size: usize,
    max_iters: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>, f64, f64)> {
    let inst = instance(v, alpha, beta, gamma, None, Some(k))?;
    let mut s = MsSettings::sweep();
    s.batch_size = batch_size;
    s.final_batch = batch_size;
    s.gda.max_iters = max_iters;
    s.seed = seed;
    let sol = solve_ms_stochastic(&inst, &s, None).map_err(err)?;
    Ok((sol.profile.x.into_coords(), sol.profile.y.into_coords(), sol.win_prob, sol.win_se))
}

/// Exact probability that A wins the electoral college.
#[pyfunction]
#[pyo3(signature = (v, alpha, beta, gamma, w, k, x, y, limit_k0=false))]
#[allow(clippy::too_many_arguments)]
fn win_prob_electoral(
    v: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    w: Vec<u32>,
    k: Option<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    limit_k0: bool,
) -> PyResult<f64> {
    let inst = instance(v, alpha, beta, gamma, Some(w), k)?;
    let profile = StrategyProfile::from_vecs(x, y).map_err(err)?;
    win_prob_ec(&inst, &profile, model(limit_k0)).map_err(err)
}

/// Mixed equilibrium of the electoral-college game on the 1/q lattice.
/// Returns `(value, [(prob, x)], [(prob, y)], converged)`.
#[pyfunction]
#[pyo3(signature = (v, alpha, beta, gamma, w, k, q=100, seed=0, limit_k0=false))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn solve_ec_mixed(
    v: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    w: Vec<u32>,
    k: Option<f64>,
    q: u32,
    seed: u64,
    limit_k0: bool,
) -> PyResult<(f64, Vec<(f64, Vec<f64>)>, Vec<(f64, Vec<f64>)>, bool)> {
    let inst = instance(v, alpha, beta, gamma, Some(w), k)?;
    let cfg = DoubleOracleConfig { q, seed, model: model(limit_k0), ..Default::default() };
    let r = double_oracle_solve(&inst, &cfg).map_err(err)?;
    let mix = |s: Vec<(&campaign_core::LatticePoint, f64)>| s.into_iter().map(|(p, w)| (w, p.coords())).collect::<Vec<_>>();
    Ok((r.value(), mix(r.support_a(SUPPORT_TOL)), mix(r.support_b(SUPPORT_TOL)), r.converged))
}

/// Write `y in [0,1)^n` with integral sum `m` as a convex combination of
/// 0/1 vectors with `m` ones. Returns `[(weight, vertex)]`.
#[pyfunction]
fn hull_decompose(y: Vec<f64>) -> PyResult<Vec<(f64, Vec<u32>)>> {
    let d = campaign_core::hull_decompose(&y).map_err(err)?;
    Ok(d.weights.into_iter().zip(d.vertices.into_iter().map(|z| z.into_iter().map(u32::from).collect())).collect())
}

/// Optimal mixtures of a zero-sum matrix game with entries in [0, 1], row
/// player maximizing.
/// Returns `(sigma_a, sigma_b, value)`.
#[pyfunction]
fn solve_matrix(rows: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let p = PayoffMatrix::new(rows).map_err(err)?;
    let eq = solve_matrix_game(&p).map_err(err)?;
    Ok((eq.sigma_a, eq.sigma_b, eq.value))
}

#[pymodule]
fn campaign(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(solve_ms_det, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ms_stoch, m)?)?;
    m.add_function(wrap_pyfunction!(win_prob_electoral, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ec_mixed, m)?)?;
    m.add_function(wrap_pyfunction!(hull_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(solve_matrix, m)?)?;
    Ok(())
}
