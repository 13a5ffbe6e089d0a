//! Grid-sup estimates of wandering ranges
//! `delta(eps) = sup_t ||(e^{itH(eps)} S e^{-itH(eps)} - S) psi||` (and the
//! operator-norm variant), scaling-exponent fits, and the robust/fragile
//! probe.
//!
//! Every reported value is a maximum over a finite time grid and therefore a
//! lower bound of the true supremum; reports carry that caveat explicitly.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::bounds::BoundSet;
use crate::error::{KamError, Result};
use crate::grid::TimeGrid;
use crate::matrix::{operator_norm, CMatrix, CVector, HermitianMatrix};
use crate::spectral::Evolution;

/// Grid-sup of `||(e^{itH} S e^{-itH} - S) psi||`, computed from a single
/// eigendecomposition of `H` reused across all times.
pub fn wandering_state(
    h_eps: &HermitianMatrix,
    s: &CMatrix,
    psi: &CVector,
    t_grid: &TimeGrid,
) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(KamError::EmptyGrid);
    }
    let n = h_eps.dim();
    if s.nrows() != n || s.ncols() != n {
        return Err(KamError::DimensionMismatch {
            expected: n,
            got: s.nrows().max(s.ncols()),
        });
    }
    if psi.len() != n {
        return Err(KamError::DimensionMismatch {
            expected: n,
            got: psi.len(),
        });
    }
    if psi.norm() == 0.0 {
        return Err(KamError::InvalidParameter("psi must be nonzero".into()));
    }
    let ev = Evolution::new(h_eps)?;
    // everything in the eigenbasis; the defect norm is basis independent
    let s_tilde = ev.basis().adjoint() * s * ev.basis();
    let y = ev.basis().adjoint() * psi;
    let sy = &s_tilde * &y;
    let vals = ev.eigenvalues();
    let mut worst = 0.0f64;
    let mut phased = CVector::zeros(n);
    for &t in t_grid.points() {
        for i in 0..n {
            phased[i] = C64::from_polar(1.0, -t * vals[i]) * y[i];
        }
        let mut z = &s_tilde * &phased;
        for i in 0..n {
            z[i] = C64::from_polar(1.0, t * vals[i]) * z[i] - sy[i];
        }
        let norm = z.norm();
        if norm > worst {
            worst = norm;
        }
    }
    Ok(worst)
}

/// Grid-sup of `||e^{itH} S e^{-itH} - S||` in operator norm.
pub fn wandering_norm(h_eps: &HermitianMatrix, s: &CMatrix, t_grid: &TimeGrid) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(KamError::EmptyGrid);
    }
    let n = h_eps.dim();
    if s.nrows() != n || s.ncols() != n {
        return Err(KamError::DimensionMismatch {
            expected: n,
            got: s.nrows().max(s.ncols()),
        });
    }
    let ev = Evolution::new(h_eps)?;
    let s_tilde = ev.basis().adjoint() * s * ev.basis();
    let vals = ev.eigenvalues();
    let mut worst = 0.0f64;
    let mut m = CMatrix::zeros(n, n);
    for &t in t_grid.points() {
        for i in 0..n {
            for j in 0..n {
                let phase = C64::from_polar(1.0, t * (vals[i] - vals[j]));
                m[(i, j)] = (phase - C64::new(1.0, 0.0)) * s_tilde[(i, j)];
            }
        }
        let norm = operator_norm(&m);
        if norm > worst {
            worst = norm;
        }
    }
    Ok(worst)
}

/// Least-squares power-law fit `delta ~ C eps^gamma` on log-log axes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingFit {
    pub gamma: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope; `gamma +- 2 stderr` is a rough 95% band.
    pub gamma_stderr: f64,
    /// Points dropped because `delta = 0` (log undefined).
    pub dropped: usize,
}

/// Fit the scaling exponent; zero deltas are dropped with a warning count,
/// at least 4 surviving points are required.
pub fn scaling_fit(eps: &[f64], delta: &[f64]) -> Result<ScalingFit> {
    if eps.len() != delta.len() {
        return Err(KamError::InvalidParameter(
            "eps and delta must have equal length".into(),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0usize;
    for (&e, &d) in eps.iter().zip(delta) {
        if e <= 0.0 {
            return Err(KamError::InvalidParameter(
                "scaling fit needs strictly positive eps".into(),
            ));
        }
        if d > 0.0 && d.is_finite() {
            xs.push(e.ln());
            ys.push(d.ln());
        } else {
            dropped += 1;
        }
    }
    let m = xs.len();
    if m < 4 {
        return Err(KamError::InsufficientData { got: m, need: 4 });
    }
    let xbar = xs.iter().sum::<f64>() / m as f64;
    let ybar = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let syy: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let gamma = sxy / sxx;
    let intercept = ybar - gamma * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + gamma * x)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let gamma_stderr = if m > 2 {
        (ss_res / (m as f64 - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(ScalingFit {
        gamma,
        intercept,
        r_squared,
        gamma_stderr,
        dropped,
    })
}

/// Default time horizon: `max(200/eta, 20/(eps v))`.
///
/// Fragile drift accumulates on the `1/eps` timescale, so a fixed horizon
/// would mask fragility.
pub fn default_horizon(eta: f64, eps: f64, v: f64) -> f64 {
    let by_gap = if eta.is_finite() && eta > 0.0 {
        200.0 / eta
    } else {
        200.0
    };
    let drive = eps * v.max(1e-12);
    let by_drift = if drive > 0.0 { 20.0 / drive } else { by_gap };
    by_gap.max(by_drift)
}

/// One epsilon sample of a sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub delta_state: Option<f64>,
    pub delta_norm: f64,
    /// Applicable operator-norm bound `beta (v/eta) ||S|| eps`.
    pub bound: f64,
    pub in_regime: bool,
    /// `delta_norm <= bound` (meaningful for completely robust `S` in regime).
    pub pass: bool,
    pub horizon: f64,
}

/// Wandering sweep report.
///
/// `grid_sup_is_lower_bound` is always true and recorded explicitly: the
/// supremum over continuous time is approached from below by the grid.
#[derive(Debug, Clone, Serialize)]
pub struct WanderingReport {
    pub eps_grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub t_points: usize,
    pub fit: Option<ScalingFit>,
    pub grid_sup_is_lower_bound: bool,
    pub eta: f64,
    pub v_norm: f64,
    pub s_norm: f64,
}

/// Sweep configuration.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Half the grid is uniform, half golden-ratio spaced.
    pub t_points: usize,
    /// Override the default `max(200/eta, 20/(eps v))` horizon.
    pub horizon: Option<f64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            t_points: 4096,
            horizon: None,
        }
    }
}

/// Measure `delta_norm(eps)` (and `delta_state` when `psi` is given) across
/// an epsilon grid, compare against the bicommutant bound, and fit the
/// scaling exponent.
pub fn wandering_sweep(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    s: &CMatrix,
    psi: Option<&CVector>,
    eps_grid: &[f64],
    opts: SweepOptions,
) -> Result<WanderingReport> {
    if eps_grid.is_empty() {
        return Err(KamError::EmptyGrid);
    }
    let spectral = crate::spectral::spectral_decompose_default(h)?;
    let eta = spectral.gap();
    let v_norm = v.operator_norm();
    let s_norm = operator_norm(s);
    let bounds = BoundSet::new(v_norm, eta.min(f64::MAX))?;

    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let horizon = opts
            .horizon
            .unwrap_or_else(|| default_horizon(eta, eps, v_norm));
        let grid = TimeGrid::mixed(horizon, opts.t_points / 2, opts.t_points / 2);
        let h_eps = HermitianMatrix::symmetrize(h.matrix() + v.matrix().scale(eps))?;
        let delta_norm = wandering_norm(&h_eps, s, &grid)?;
        let delta_state = match psi {
            Some(p) => Some(wandering_state(&h_eps, s, p, &grid)?),
            None => None,
        };
        let vals = bounds.evaluate(s_norm, spectral.num_clusters(), eps);
        points.push(SweepPoint {
            eps,
            delta_state,
            delta_norm,
            bound: vals.wandering,
            in_regime: vals.in_regime,
            pass: delta_norm <= vals.wandering || !vals.in_regime,
            horizon,
        });
    }
    let deltas: Vec<f64> = points.iter().map(|p| p.delta_norm).collect();
    let fit = scaling_fit(eps_grid, &deltas).ok();
    Ok(WanderingReport {
        eps_grid: eps_grid.to_vec(),
        points,
        t_points: opts.t_points,
        fit,
        grid_sup_is_lower_bound: true,
        eta,
        v_norm,
        s_norm,
    })
}

/// Probe a fragile candidate: measure whether `delta_norm` stays above a
/// floor as `eps` decreases (with `1/eps`-scaled horizons).
pub fn fragility_probe(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    s: &CMatrix,
    eps_grid: &[f64],
    opts: SweepOptions,
) -> Result<WanderingReport> {
    wandering_sweep(h, v, s, None, eps_grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_x() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        )
    }

    /// Closed-form two-level deviation: for H(eps) with Bloch vector
    /// `r = (2 eps, 0, -1)` and `S = diag(1, 0)`, both the state norm on any
    /// unit state and the operator norm equal
    /// `|sin(omega t / 2)| * 2 eps / sqrt(4 eps^2 + 1)`, maximized at 1.
    fn rabi_deviation(eps: f64, t: f64) -> f64 {
        let omega = (4.0 * eps * eps + 1.0).sqrt();
        (omega * t / 2.0).sin().abs() * 2.0 * eps / omega
    }

    #[test]
    fn two_level_matches_analytic_oracle() {
        let eps = 0.05;
        let h_eps = HermitianMatrix::symmetrize(
            HermitianMatrix::from_real_diagonal(&[0.0, 1.0]).matrix() + sigma_x().scale(eps),
        )
        .unwrap();
        let s = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        // dense grid over one Rabi period so the grid-sup resolves the peak
        let omega = (4.0 * eps * eps + 1.0f64).sqrt();
        let period = 2.0 * std::f64::consts::PI / omega;
        let grid = TimeGrid::uniform(period, 20_001);
        let measured = wandering_norm(&h_eps, s.matrix(), &grid).unwrap();
        let analytic_sup = 2.0 * eps / omega;
        assert!(
            (measured - analytic_sup).abs() < 1e-6,
            "measured {measured}, analytic {analytic_sup}"
        );
        // state version on psi = e_0 agrees with the same closed form
        let mut psi = CVector::zeros(2);
        psi[0] = C64::new(1.0, 0.0);
        let measured_state = wandering_state(&h_eps, s.matrix(), &psi, &grid).unwrap();
        assert!((measured_state - analytic_sup).abs() < 1e-6);
        // spot check a specific time against the closed form
        let t = 1.37;
        let single = TimeGrid::from_points(vec![t]);
        let at_t = wandering_norm(&h_eps, s.matrix(), &single).unwrap();
        assert!((at_t - rabi_deviation(eps, t)).abs() < 1e-10);
    }

    #[test]
    fn symmetry_at_eps_zero_does_not_wander() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]);
        let s = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let grid = TimeGrid::mixed(100.0, 256, 256);
        let d = wandering_norm(&h, s.matrix(), &grid).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn triangle_inequality_ceiling() {
        let eps = 0.4;
        let h_eps = HermitianMatrix::symmetrize(
            HermitianMatrix::from_real_diagonal(&[0.0, 1.0]).matrix() + sigma_x().scale(eps),
        )
        .unwrap();
        let s = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let grid = TimeGrid::mixed(500.0, 512, 512);
        let d = wandering_norm(&h_eps, s.matrix(), &grid).unwrap();
        assert!(d <= 2.0 * 1.0 + 1e-12, "delta <= 2 ||S||");
        let mut psi = CVector::zeros(2);
        psi[0] = C64::new(0.6, 0.0);
        psi[1] = C64::new(0.0, 0.8);
        let ds = wandering_state(&h_eps, s.matrix(), &psi, &grid).unwrap();
        assert!(ds <= 2.0 * psi.norm() + 1e-12);
    }

    #[test]
    fn grid_sup_monotone_under_refinement() {
        let eps = 0.1;
        let h_eps = HermitianMatrix::symmetrize(
            HermitianMatrix::from_real_diagonal(&[0.0, 1.0]).matrix() + sigma_x().scale(eps),
        )
        .unwrap();
        let s = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let coarse = TimeGrid::uniform(50.0, 128);
        let mut pts = coarse.points().to_vec();
        pts.extend(TimeGrid::golden(50.0, 381).points());
        let fine = TimeGrid::from_points(pts);
        let d_coarse = wandering_norm(&h_eps, s.matrix(), &coarse).unwrap();
        let d_fine = wandering_norm(&h_eps, s.matrix(), &fine).unwrap();
        assert!(d_fine >= d_coarse, "supremum over a superset cannot shrink");
    }

    #[test]
    fn scaling_fit_exact_power_laws() {
        let eps: Vec<f64> = (1..=8).map(|i| 1e-3 * 2f64.powi(i)).collect();
        let d1: Vec<f64> = eps.iter().map(|e| 3.0 * e).collect();
        let f1 = scaling_fit(&eps, &d1).unwrap();
        assert!((f1.gamma - 1.0).abs() < 1e-6);
        assert!((f1.intercept.exp() - 3.0).abs() < 1e-6);
        assert!(f1.r_squared > 1.0 - 1e-12);
        let d2: Vec<f64> = eps.iter().map(|e| e.sqrt()).collect();
        let f2 = scaling_fit(&eps, &d2).unwrap();
        assert!((f2.gamma - 0.5).abs() < 1e-6);
        // zero deltas are dropped; too few points error out
        let with_zeros = vec![0.0, 0.0, 0.0, 0.0, 0.0, 1e-3, 1e-3, 1e-3];
        let err = scaling_fit(&eps, &with_zeros);
        assert!(matches!(
            err,
            Err(KamError::InsufficientData { got: 3, need: 4 })
        ));
    }

    #[test]
    fn fragility_probe_reports_floor_and_metadata() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 0.0, 1.0]);
        let mut v = CMatrix::zeros(3, 3);
        v[(0, 1)] = C64::new(1.0, 0.0);
        v[(1, 0)] = C64::new(1.0, 0.0);
        let v = HermitianMatrix::new(v).unwrap();
        let s_frag = HermitianMatrix::from_real_diagonal(&[1.0, -1.0, 0.0]);
        let report = fragility_probe(
            &h,
            &v,
            s_frag.matrix(),
            &[1e-3, 1e-2, 1e-1],
            SweepOptions {
                t_points: 2048,
                horizon: None,
            },
        )
        .unwrap();
        assert!(report.grid_sup_is_lower_bound);
        for p in &report.points {
            assert!(p.delta_norm > 0.5, "fragile floor at eps = {}", p.eps);
            assert!(p.horizon >= 20.0 / p.eps * (1.0 - 1e-12), "1/eps horizon");
        }
        // at eps = 0 a true symmetry does not wander
        let z = wandering_sweep(
            &h,
            &v,
            s_frag.matrix(),
            None,
            &[0.0],
            SweepOptions {
                t_points: 256,
                horizon: Some(50.0),
            },
        )
        .unwrap();
        assert!(z.points[0].delta_norm < 1e-10);
    }

    #[test]
    fn horizon_scales_with_inverse_eps() {
        let short = default_horizon(1.0, 0.1, 1.0);
        let long = default_horizon(1.0, 1e-3, 1.0);
        assert!(long > short);
        assert!((long - 20_000.0).abs() < 1e-9);
    }
}
