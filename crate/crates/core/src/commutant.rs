//! Commutant and bicommutant of a Hermitian matrix as explicit subspaces,
//! and the symmetry classification: symmetry / robust / completely robust.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{KamError, Result};
use crate::matrix::{commutator, operator_norm, CMatrix};
use crate::spectral::SpectralData;

/// Hilbert-Schmidt-orthonormal basis of the commutant `{H}'`: the matrix
/// units `q_a q_b^dag` within each cluster eigenspace. Dimension
/// `sum_k rank(P_k)^2`.
pub fn commutant_basis(s: &SpectralData) -> Vec<CMatrix> {
    let n = s.source_dim();
    let mut basis = Vec::new();
    for c in s.clusters() {
        let q = s.basis().columns(c.columns.start, c.rank);
        for a in 0..c.rank {
            for b in 0..c.rank {
                let mut unit = CMatrix::zeros(n, n);
                let qa = q.column(a);
                let qb = q.column(b);
                for i in 0..n {
                    for j in 0..n {
                        unit[(i, j)] = qa[i] * qb[j].conj();
                    }
                }
                basis.push(unit);
            }
        }
    }
    basis
}

/// The bicommutant `{H}''`: in finite dimension, the span of the cluster
/// projectors. Returns `{P_k}` themselves; dimension = number of clusters.
pub fn bicommutant_basis(s: &SpectralData) -> Vec<CMatrix> {
    s.clusters().iter().map(|c| c.projector.clone()).collect()
}

/// Verdicts and residuals of the three algebraic symmetry checks.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryClassification {
    pub is_symmetry: bool,
    /// `None` when no refinement was supplied (robustness not evaluated).
    pub is_robust: Option<bool>,
    pub is_completely_robust: bool,
    /// Check name -> measured residual.
    pub residuals: BTreeMap<String, f64>,
    pub tol: f64,
}

impl SymmetryClassification {
    /// Robust verdict, erroring out if no refinement was supplied.
    pub fn require_robust(&self) -> Result<bool> {
        self.is_robust.ok_or(KamError::RefinementRequired)
    }
}

/// Default classification tolerance `1e-8 * ||A||`.
pub fn default_classification_tol(a: &CMatrix) -> f64 {
    1e-8 * operator_norm(a)
}

/// Classify `A` against the spectral data of `H`:
///
/// * symmetry        iff `max_k ||[A, P_k]|| <= tol`;
/// * robust          iff `max_n ||[A, P_n(0)]|| <= tol`, where the `P_n(0)`
///   are the limit projections of a concrete perturbation (module `kato`);
///   evaluated only when `refinement` is given;
/// * completely robust iff `||A - sum_k (tr(P_k A)/rank_k) P_k|| <= tol`
///   (distance to the bicommutant span).
pub fn classify(
    a: &CMatrix,
    s: &SpectralData,
    refinement: Option<&[CMatrix]>,
    tol: Option<f64>,
) -> Result<SymmetryClassification> {
    let n = s.source_dim();
    if a.nrows() != n || a.ncols() != n {
        return Err(KamError::DimensionMismatch {
            expected: n,
            got: a.nrows().max(a.ncols()),
        });
    }
    let tol = tol.unwrap_or_else(|| default_classification_tol(a));

    let sym_residual = s
        .clusters()
        .iter()
        .map(|c| operator_norm(&commutator(a, &c.projector)))
        .fold(0.0, f64::max);

    // distance to span{P_k}: the HS-orthogonal projection of A onto the span
    // is sum_k (tr(P_k A)/rank_k) P_k
    let mut span_part = CMatrix::zeros(n, n);
    for c in s.clusters() {
        let coeff = (&c.projector * a).trace() / C64::new(c.rank as f64, 0.0);
        span_part += c.projector.map(|z| z * coeff);
    }
    let bicomm_residual = operator_norm(&(a - span_part));

    let mut residuals = BTreeMap::new();
    residuals.insert("symmetry".to_string(), sym_residual);
    residuals.insert("completely_robust".to_string(), bicomm_residual);

    let is_robust = match refinement {
        None => None,
        Some(projs) => {
            for p in projs {
                if p.nrows() != n || p.ncols() != n {
                    return Err(KamError::DimensionMismatch {
                        expected: n,
                        got: p.nrows().max(p.ncols()),
                    });
                }
            }
            let rob_residual = projs
                .iter()
                .map(|p| operator_norm(&commutator(a, p)))
                .fold(0.0, f64::max);
            residuals.insert("robust".to_string(), rob_residual);
            Some(rob_residual <= tol)
        }
    };

    Ok(SymmetryClassification {
        is_symmetry: sym_residual <= tol,
        is_robust,
        is_completely_robust: bicomm_residual <= tol,
        residuals,
        tol,
    })
}
