//! Browser bindings for the kamrange demos. Three interactive operations,
//! each returning a JSON string the page plots directly:
//!
//! * [`f_alpha_curve`] — the `||W - I||` profile with its linear and
//!   quadratic majorants;
//! * [`dichotomy_sweep`] — wandering range of a robust vs a fragile
//!   symmetry on the three-level block model, against the certified bound;
//! * [`kam_orders`] — per-order norms of a seeded random instance vs the
//!   Catalan certificates, plus the truncation-residual scaling.

use num_complex::Complex64 as C64;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use kamrange::bounds::{self, BoundSet};
use kamrange::grid::TimeGrid;
use kamrange::kam::{conjugation_residual, kam_expand};
use kamrange::matrix::{CMatrix, HermitianMatrix};
use kamrange::spectral::spectral_decompose_default;
use kamrange::wandering::{default_horizon, scaling_fit, wandering_norm};

fn json_or_error<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(value) => serde_json::to_string(&value)
            .unwrap_or_else(|e| format!("{{\"error\": \"serialization failed: {e}\"}}")),
        Err(msg) => serde_json::to_string(&serde_json::json!({ "error": msg }))
            .expect("plain object serializes"),
    }
}

#[derive(Serialize)]
struct FAlphaCurve {
    alpha: f64,
    beta: f64,
    rho: f64,
    rows: Vec<kamrange::bounds::FAlphaRow>,
}

/// Comparison of `f_alpha(x) = e^{(1-sqrt(1-x))/(2 alpha)} - 1` with its
/// linear and quadratic majorants on `x in [0, 1]`.
#[wasm_bindgen]
pub fn f_alpha_curve(n_points: usize) -> String {
    json_or_error((|| {
        let c = bounds::constants();
        let rows = bounds::f_alpha_table(n_points.clamp(2, 100_000)).map_err(|e| e.to_string())?;
        Ok(FAlphaCurve {
            alpha: c.alpha,
            beta: c.beta,
            rho: c.rho,
            rows,
        })
    })())
}

#[derive(Serialize)]
struct DichotomyPoint {
    eps: f64,
    robust: f64,
    fragile: f64,
    bound: f64,
    in_regime: bool,
}

#[derive(Serialize)]
struct DichotomySweep {
    points: Vec<DichotomyPoint>,
    robust_gamma: Option<f64>,
    eps_threshold: f64,
    v_norm: f64,
}

/// Wandering ranges on `H = diag(0, 0, 1)` with a sigma_x perturbation of
/// the degenerate block plus an out-of-block coupling of the given strength.
/// The robust symmetry is the block projector `diag(1, 1, 0)`; the fragile
/// one is `diag(1, -1, 0)`, which fails the limit-projection criterion.
#[wasm_bindgen]
pub fn dichotomy_sweep(
    eps_min: f64,
    eps_max: f64,
    n_eps: usize,
    coupling: f64,
    t_points: usize,
) -> String {
    json_or_error(dichotomy_sweep_impl(
        eps_min, eps_max, n_eps, coupling, t_points,
    ))
}

fn dichotomy_sweep_impl(
    eps_min: f64,
    eps_max: f64,
    n_eps: usize,
    coupling: f64,
    t_points: usize,
) -> Result<DichotomySweep, String> {
    if !(eps_min > 0.0 && eps_max > eps_min) {
        return Err("need 0 < eps_min < eps_max".into());
    }
    let n_eps = n_eps.clamp(2, 64);
    let t_points = t_points.clamp(64, 32_768);
    let h = HermitianMatrix::from_real_diagonal(&[0.0, 0.0, 1.0]);
    let mut v = CMatrix::zeros(3, 3);
    v[(0, 1)] = C64::new(1.0, 0.0);
    v[(1, 0)] = C64::new(1.0, 0.0);
    v[(0, 2)] = C64::new(coupling, 0.0);
    v[(2, 0)] = C64::new(coupling, 0.0);
    let v = HermitianMatrix::new(v).map_err(|e| e.to_string())?;
    let s_rob = HermitianMatrix::from_real_diagonal(&[1.0, 1.0, 0.0]);
    let s_frag = HermitianMatrix::from_real_diagonal(&[1.0, -1.0, 0.0]);
    let v_norm = v.operator_norm();
    let consts = bounds::constants();
    let bs = BoundSet::new(v_norm, 1.0).map_err(|e| e.to_string())?;

    let mut points = Vec::with_capacity(n_eps);
    let (a, b) = (eps_min.ln(), eps_max.ln());
    let mut eps_list = Vec::with_capacity(n_eps);
    for i in 0..n_eps {
        let eps = (a + (b - a) * i as f64 / (n_eps - 1) as f64).exp();
        let horizon = default_horizon(1.0, eps, v_norm);
        let grid = TimeGrid::mixed(horizon, t_points / 2, t_points / 2);
        let h_eps = HermitianMatrix::symmetrize(h.matrix() + v.matrix().scale(eps))
            .map_err(|e| e.to_string())?;
        let robust = wandering_norm(&h_eps, s_rob.matrix(), &grid).map_err(|e| e.to_string())?;
        let fragile = wandering_norm(&h_eps, s_frag.matrix(), &grid).map_err(|e| e.to_string())?;
        points.push(DichotomyPoint {
            eps,
            robust,
            fragile,
            bound: consts.beta * v_norm * eps,
            in_regime: bs.in_regime(eps),
        });
        eps_list.push(eps);
    }
    let robust_vals: Vec<f64> = points.iter().map(|p| p.robust).collect();
    let robust_gamma = scaling_fit(&eps_list, &robust_vals).ok().map(|f| f.gamma);
    Ok(DichotomySweep {
        points,
        robust_gamma,
        eps_threshold: bs.eps_threshold,
        v_norm,
    })
}

#[derive(Serialize)]
struct KamOrdersOut {
    orders: Vec<kamrange::kam::OrderNorms>,
    residuals: Vec<ResidualPoint>,
    slope: Option<f64>,
    expected_slope: f64,
    eta: f64,
    v_norm: f64,
    eps_threshold: f64,
}

#[derive(Serialize)]
struct ResidualPoint {
    eps: f64,
    residual: f64,
}

/// Per-order ledger (`||B_s||` vs the Catalan certificate) and the
/// conjugation-residual scaling for a seeded random gapped instance.
#[wasm_bindgen]
pub fn kam_orders(seed: u32, dim: usize, s_max: usize) -> String {
    json_or_error(kam_orders_impl(seed, dim, s_max))
}

fn kam_orders_impl(seed: u32, dim: usize, s_max: usize) -> Result<KamOrdersOut, String> {
    let dim = dim.clamp(4, 24);
    let s_max = s_max.clamp(1, 10);
    // mixed degeneracies: one rank-2 cluster when there is room
    let mut ranks = vec![1usize; dim];
    if dim >= 4 {
        ranks.truncate(dim - 1);
        ranks[1] = 2;
    }
    let inst = kamrange::models::random_gapped(dim, &ranks, 1.0, seed as u64)
        .map_err(|e| e.to_string())?;
    let s = spectral_decompose_default(&inst.h).map_err(|e| e.to_string())?;
    let exp = kam_expand(&s, &inst.v, s_max).map_err(|e| e.to_string())?;
    let eps0 = exp.bound_set.eps_threshold / 2.0;
    let eps_list: Vec<f64> = (0..4).map(|j| eps0 / 2f64.powi(j)).collect();
    let mut residuals = Vec::new();
    for &eps in &eps_list {
        let asm = exp.assemble(eps).map_err(|e| e.to_string())?;
        residuals.push(ResidualPoint {
            eps,
            residual: conjugation_residual(&inst.h, &inst.v, &asm),
        });
    }
    let res_vals: Vec<f64> = residuals.iter().map(|r| r.residual).collect();
    let slope = scaling_fit(&eps_list, &res_vals).ok().map(|f| f.gamma);
    Ok(KamOrdersOut {
        orders: exp.norms.clone(),
        residuals,
        slope,
        expected_slope: (s_max + 1) as f64,
        eta: s.gap(),
        v_norm: exp.bound_set.v,
        eps_threshold: exp.bound_set.eps_threshold,
    })
}
