//! Eigendecomposition with degeneracy clustering, spectral projections,
//! block decompositions, and exact unitary time evolution.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::error::{KamError, Result};
use crate::matrix::{operator_norm, CMatrix, HermitianMatrix};

/// One cluster of (numerically) coincident eigenvalues.
#[derive(Debug, Clone)]
pub struct SpectralCluster {
    /// Representative eigenvalue `h_k` (mean of the merged raw eigenvalues).
    pub value: f64,
    pub rank: usize,
    /// Orthogonal projector onto the cluster eigenspace.
    pub projector: CMatrix,
    /// Column range of this cluster inside the sorted eigenbasis.
    pub columns: std::ops::Range<usize>,
}

/// Distinct-eigenvalue clusters `{(h_k, P_k)}` of a Hermitian matrix plus the
/// minimal spectral gap `eta`, together with the sorted eigenbasis they came
/// from (kept private; it makes every block operation a basis rotation).
#[derive(Debug, Clone)]
pub struct SpectralData {
    clusters: Vec<SpectralCluster>,
    gap: f64,
    source_dim: usize,
    basis: CMatrix,
    raw_values: Vec<f64>,
    cluster_of: Vec<usize>,
}

impl SpectralData {
    pub fn clusters(&self) -> &[SpectralCluster] {
        &self.clusters
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Minimal spectral gap `eta`; `+inf` when there is a single cluster.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    /// Sorted orthonormal eigenbasis (columns ascending in eigenvalue).
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Raw (unclustered) eigenvalues, ascending.
    pub fn raw_values(&self) -> &[f64] {
        &self.raw_values
    }

    /// Cluster index of each sorted eigenvector column.
    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn projector(&self, k: usize) -> &CMatrix {
        &self.clusters[k].projector
    }

    /// `V^dag A V`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.basis.adjoint() * a * &self.basis
    }

    /// `V A V^dag`.
    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.basis * a * self.basis.adjoint()
    }

    /// Reconstruct `sum_k h_k P_k`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.source_dim;
        let mut acc = CMatrix::zeros(n, n);
        for c in &self.clusters {
            acc += c.projector.scale(c.value);
        }
        acc
    }

    fn check_dim(&self, a: &CMatrix) -> Result<()> {
        if a.nrows() != self.source_dim || a.ncols() != self.source_dim {
            return Err(KamError::DimensionMismatch {
                expected: self.source_dim,
                got: a.nrows().max(a.ncols()),
            });
        }
        Ok(())
    }
}

/// Default clustering threshold `max(abs_tol, rel_tol * ||H||)` with
/// `abs_tol = 1e-9`, `rel_tol = 1e-12`.
pub fn default_cluster_tol(h: &HermitianMatrix) -> f64 {
    1e-9f64.max(1e-12 * h.operator_norm())
}

/// Eigendecompose `H` and merge eigenvalues into clusters by single-linkage
/// at threshold `cluster_tol` (adjacent sorted eigenvalues closer than the
/// threshold join the same cluster).
pub fn spectral_decompose(h: &HermitianMatrix, cluster_tol: f64) -> Result<SpectralData> {
    if cluster_tol < 0.0 {
        return Err(KamError::InvalidParameter(format!(
            "cluster_tol must be nonnegative, got {cluster_tol}"
        )));
    }
    let n = h.dim();
    let eig = h
        .matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or(KamError::EigenFailed { dim: n })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let raw_values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut basis = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        basis.set_column(dst, &eig.eigenvectors.column(src));
    }

    // single-linkage merge of adjacent sorted eigenvalues
    let mut boundaries = vec![0usize];
    for i in 1..n {
        if raw_values[i] - raw_values[i - 1] > cluster_tol {
            boundaries.push(i);
        }
    }
    boundaries.push(n);

    let mut clusters = Vec::with_capacity(boundaries.len() - 1);
    let mut cluster_of = vec![0usize; n];
    for (k, w) in boundaries.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        let rank = end - start;
        let value = raw_values[start..end].iter().sum::<f64>() / rank as f64;
        let q = basis.columns(start, rank);
        let projector = q * q.adjoint();
        // exact Hermitian symmetrization of the projector
        let projector = (&projector + projector.adjoint()).scale(0.5);
        for c in cluster_of.iter_mut().take(end).skip(start) {
            *c = k;
        }
        clusters.push(SpectralCluster {
            value,
            rank,
            projector,
            columns: start..end,
        });
    }

    let gap = if clusters.len() < 2 {
        f64::INFINITY
    } else {
        clusters
            .windows(2)
            .map(|w| w[1].value - w[0].value)
            .fold(f64::INFINITY, f64::min)
    };

    Ok(SpectralData {
        clusters,
        gap,
        source_dim: n,
        basis,
        raw_values,
        cluster_of,
    })
}

/// `spectral_decompose` at the default threshold.
pub fn spectral_decompose_default(h: &HermitianMatrix) -> Result<SpectralData> {
    spectral_decompose(h, default_cluster_tol(h))
}

/// Block-diagonal part `[A] = sum_k P_k A P_k`.
pub fn block_diagonal_part(a: &CMatrix, s: &SpectralData) -> Result<CMatrix> {
    s.check_dim(a)?;
    let mut tilde = s.to_eigenbasis(a);
    let c = s.cluster_of();
    for i in 0..tilde.nrows() {
        for j in 0..tilde.ncols() {
            if c[i] != c[j] {
                tilde[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    Ok(s.from_eigenbasis(&tilde))
}

/// Off-diagonal part `{A} = A - [A]`.
pub fn off_diagonal_part(a: &CMatrix, s: &SpectralData) -> Result<CMatrix> {
    Ok(a - block_diagonal_part(a, s)?)
}

/// Cached eigendecomposition for repeated evaluation of `e^{-itH}`.
#[derive(Debug, Clone)]
pub struct Evolution {
    basis: CMatrix,
    values: DVector<f64>,
}

impl Evolution {
    pub fn new(h: &HermitianMatrix) -> Result<Self> {
        let eig = h
            .matrix()
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 100_000)
            .ok_or(KamError::EigenFailed { dim: h.dim() })?;
        Ok(Self {
            basis: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// `e^{-itH}` as a dense unitary.
    pub fn at(&self, t: f64) -> CMatrix {
        let mut scaled = self.basis.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let phase = C64::from_polar(1.0, -t * self.values[j]);
            for z in col.iter_mut() {
                *z *= phase;
            }
        }
        scaled * self.basis.adjoint()
    }

    /// `e^{-itH} - I` with the diagonal phases evaluated as
    /// `e^{i theta} - 1 = -2 sin^2(theta/2) + i sin(theta)`, which keeps full
    /// relative accuracy when the deviation is small (residual certificates
    /// subtract quantities of this size).
    pub fn deviation_from_identity(&self, t: f64) -> CMatrix {
        let mut scaled = self.basis.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let theta = -t * self.values[j];
            let half = 0.5 * theta;
            let phase_m1 = C64::new(-2.0 * half.sin() * half.sin(), theta.sin());
            for z in col.iter_mut() {
                *z *= phase_m1;
            }
        }
        scaled * self.basis.adjoint()
    }

    /// Apply `e^{-itH}` to a vector in `O(n^2)`.
    pub fn apply(&self, t: f64, psi: &crate::matrix::CVector) -> crate::matrix::CVector {
        let mut y = self.basis.adjoint() * psi;
        for (j, z) in y.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, -t * self.values[j]);
        }
        &self.basis * y
    }
}

/// One-shot `e^{-itH}`.
pub fn evolve(h: &HermitianMatrix, t: f64) -> Result<CMatrix> {
    Ok(Evolution::new(h)?.at(t))
}

/// Largest deviation from unitarity, `||U^dag U - I||`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    operator_norm(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::max_abs;

    #[test]
    fn diagonal_with_degeneracy() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 1.0, 1.0]);
        let s = spectral_decompose(&h, 1e-9).unwrap();
        assert_eq!(s.num_clusters(), 2);
        assert_eq!(s.clusters()[0].rank, 1);
        assert_eq!(s.clusters()[1].rank, 2);
        assert!((s.clusters()[0].value - 0.0).abs() < 1e-14);
        assert!((s.clusters()[1].value - 1.0).abs() < 1e-14);
        assert!((s.gap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_is_single_cluster() {
        let h = HermitianMatrix::identity(3);
        let s = spectral_decompose(&h, 1e-9).unwrap();
        assert_eq!(s.num_clusters(), 1);
        assert_eq!(s.clusters()[0].rank, 3);
        assert!(s.gap().is_infinite());
    }

    #[test]
    fn projector_axioms_and_reconstruction() {
        // fixed 4x4 Hermitian with a degenerate pair after conjugation
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 0.5, 0.5, 2.0]);
        let s = spectral_decompose(&h, 1e-9).unwrap();
        let n = 4;
        let mut sum = CMatrix::zeros(n, n);
        for (k, ck) in s.clusters().iter().enumerate() {
            let p = &ck.projector;
            assert!(max_abs(&(p * p - p)) < 1e-10, "idempotent");
            assert!(hermitian_defect_small(p), "hermitian");
            for (l, cl) in s.clusters().iter().enumerate() {
                if k != l {
                    assert!(max_abs(&(p * &cl.projector)) < 1e-10, "orthogonal");
                }
            }
            sum += p;
        }
        assert!(
            max_abs(&(sum - CMatrix::identity(n, n))) < 1e-10,
            "complete"
        );
        let recon = s.reconstruct();
        assert!(operator_norm(&(recon - h.matrix())) < 1e-10 * (1.0 + h.operator_norm()));
    }

    fn hermitian_defect_small(p: &CMatrix) -> bool {
        crate::matrix::hermiticity_defect(p) < 1e-12
    }

    #[test]
    fn block_parts_on_diag_spectrum() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]);
        let s = spectral_decompose(&h, 1e-9).unwrap();
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let bd = block_diagonal_part(&a, &s).unwrap();
        assert!(max_abs(&bd) < 1e-13, "purely off-diagonal input has [A]=0");
        let off = off_diagonal_part(&a, &s).unwrap();
        assert!(max_abs(&(off - &a)) < 1e-13);
        // diagonal input is untouched
        let d = CMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(1.0 + i as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let bdd = block_diagonal_part(&d, &s).unwrap();
        assert!(max_abs(&(bdd - &d)) < 1e-13);
    }

    #[test]
    fn block_part_zeroes_the_off_blocks() {
        // S from diag(0,0,1): [A] equals A with the two 2x1 off-blocks zeroed
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 0.0, 1.0]);
        let s = spectral_decompose(&h, 1e-9).unwrap();
        let a = CMatrix::from_fn(3, 3, |i, j| {
            C64::new((1 + i * 3 + j) as f64, (i as f64) - 2.0 * (j as f64))
        });
        let bd = block_diagonal_part(&a, &s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if (i < 2) == (j < 2) {
                    a[(i, j)]
                } else {
                    C64::new(0.0, 0.0)
                };
                assert!((bd[(i, j)] - expect).norm() < 1e-12, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]);
        let s = spectral_decompose(&h, 1e-9).unwrap();
        let a = CMatrix::zeros(3, 3);
        assert!(matches!(
            block_diagonal_part(&a, &s),
            Err(KamError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn evolve_special_values() {
        let h = HermitianMatrix::from_real_diagonal(&[0.0, std::f64::consts::PI]);
        let u0 = evolve(&h, 0.0).unwrap();
        assert!(max_abs(&(u0 - CMatrix::identity(2, 2))) < 1e-14);
        let u1 = evolve(&h, 1.0).unwrap();
        let expect = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!(max_abs(&(u1 - expect.matrix())) < 1e-12);
    }

    #[test]
    fn negative_cluster_tol_rejected() {
        let h = HermitianMatrix::identity(2);
        assert!(spectral_decompose(&h, -1.0).is_err());
    }
}
