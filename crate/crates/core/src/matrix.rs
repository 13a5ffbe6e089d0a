//! Dense complex matrices: the validated Hermitian wrapper, operator norms,
//! commutators, and the matrix JSON interchange format
//! `{"dim": n, "re": [[..]], "im": [[..]]}` shared by all modules and the CLI.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{KamError, Result};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Max entrywise modulus, `||A||_max`.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Measured Hermiticity defect `||A - A^dag||_max`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (a[(i, j)] - a[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest singular value.
///
/// Computed as the square root of the top eigenvalue of the Gram matrix
/// `A^dag A`, which equals the largest singular value exactly and is robust
/// for every input we care about (dims <= ~400).
pub fn operator_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = a.adjoint() * a;
    // symmetrize to wash out rounding before the Hermitian eigensolver
    let gram = (&gram + gram.adjoint()).scale(0.5);
    let eigs = gram
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .expect("Gram matrix eigendecomposition cannot fail on finite input")
        .eigenvalues;
    eigs.iter().cloned().fold(0.0f64, f64::max).max(0.0).sqrt()
}

/// Power-iteration estimate of the largest singular value.
///
/// Fast path for large dimensions; `operator_norm` stays the default for the
/// desk-scale matrices the certificates run on.
pub fn operator_norm_power(a: &CMatrix, tol: f64, max_iter: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    // deterministic start vector with all components populated
    let mut v = CVector::from_fn(n, |i, _| C64::new(1.0, 0.3 + i as f64 / n as f64));
    let norm = v.norm();
    v /= C64::new(norm, 0.0);
    let mut sigma = 0.0f64;
    for _ in 0..max_iter {
        let w = a.adjoint() * (a * &v);
        let lambda = w.norm();
        if lambda == 0.0 {
            return 0.0;
        }
        v = w / C64::new(lambda, 0.0);
        let next = lambda.sqrt();
        if (next - sigma).abs() <= tol * next.max(1.0) {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// Dense complex square matrix, validated Hermitian on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: CMatrix,
}

impl HermitianMatrix {
    /// Default Hermiticity tolerance: `1e-12 * max(1, ||A||_max)`.
    pub fn default_tolerance(mat: &CMatrix) -> f64 {
        1e-12 * max_abs(mat).max(1.0)
    }

    pub fn new(mat: CMatrix) -> Result<Self> {
        let tol = Self::default_tolerance(&mat);
        Self::with_tolerance(mat, tol)
    }

    pub fn with_tolerance(mat: CMatrix, tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(KamError::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        let asymmetry = hermiticity_defect(&mat);
        if asymmetry > tol {
            return Err(KamError::NotHermitian { asymmetry, tol });
        }
        // store the exactly Hermitian symmetrization so downstream identities
        // are not polluted by the (tolerated) input defect
        let mat = (&mat + mat.adjoint()).scale(0.5);
        Ok(Self { mat })
    }

    /// Symmetrize unconditionally: `(M + M^dag)/2`.
    pub fn symmetrize(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(KamError::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        let mat = (&mat + mat.adjoint()).scale(0.5);
        Ok(Self { mat })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            mat: CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    C64::new(diag[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: CMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.mat)
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(&self.mat)
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        Self::new(json.to_matrix()?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let json: MatrixJson = serde_json::from_str(s)
            .map_err(|e| KamError::InvalidParameter(format!("matrix JSON: {e}")))?;
        Self::from_json(&json)
    }
}

impl AsRef<CMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.mat
    }
}

/// Interchange schema for complex matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let n = m.nrows();
        let re = (0..n)
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect())
            .collect();
        Self { dim: n, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.dim;
        let shape_ok = self.re.len() == n
            && self.im.len() == n
            && self.re.iter().all(|r| r.len() == n)
            && self.im.iter().all(|r| r.len() == n);
        if !shape_ok {
            return Err(KamError::InvalidParameter(format!(
                "matrix JSON arrays do not match dim = {n}"
            )));
        }
        Ok(CMatrix::from_fn(n, n, |i, j| {
            C64::new(self.re[i][j], self.im[i][j])
        }))
    }
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

    #[test]
    fn rejects_non_hermitian() {
        let mut m = sigma_x();
        m[(0, 1)] = C64::new(2.0, 0.0);
        let err = HermitianMatrix::new(m).unwrap_err();
        match err {
            KamError::NotHermitian { asymmetry, .. } => assert!((asymmetry - 1.0).abs() < 1e-14),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(KamError::NotSquare { .. })
        ));
    }

    #[test]
    fn operator_norm_identity_and_diag() {
        let id = CMatrix::identity(5, 5);
        assert!((operator_norm(&id) - 1.0).abs() < 1e-12);
        let d = HermitianMatrix::from_real_diagonal(&[3.0, -4.0]);
        assert!((d.operator_norm() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_power_agrees() {
        let m = CMatrix::from_fn(6, 6, |i, j| {
            C64::new((i * 7 + j) as f64 / 10.0, (i as f64 - j as f64) / 5.0)
        });
        let full = operator_norm(&m);
        let fast = operator_norm_power(&m, 1e-12, 10_000);
        assert!((full - fast).abs() < 1e-8 * full);
    }

    #[test]
    fn json_round_trip() {
        let h = HermitianMatrix::new(sigma_x() + CMatrix::identity(2, 2).scale(0.5)).unwrap();
        let s = serde_json::to_string(&h.to_json()).unwrap();
        let back = HermitianMatrix::from_json_str(&s).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn json_shape_validation() {
        let bad = r#"{"dim": 2, "re": [[1.0]], "im": [[0.0]]}"#;
        assert!(HermitianMatrix::from_json_str(bad).is_err());
    }
}
