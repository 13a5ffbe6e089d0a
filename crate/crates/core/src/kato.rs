//! Degenerate perturbation data for linear families `H + eps V`: perturbed
//! spectral decomposition with continuity pairing, the limit projections
//! `P_n(0)`, the intertwining unitary `U(eps)`, Lipschitz constants `c_k`,
//! and the wandering-range constants for eigenvector states and finite-rank
//! symmetries.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{KamError, Result};
use crate::matrix::{operator_norm, CMatrix, CVector, HermitianMatrix};
use crate::spectral::{spectral_decompose, SpectralData};

/// Ratio of second-best to best overlap above which the continuity pairing is
/// declared ambiguous.
const AMBIGUITY_RATIO: f64 = 0.9;

/// Perturbed spectral data at one `eps`, paired to the unperturbed clusters.
#[derive(Debug, Clone)]
pub struct PerturbedSpectral {
    pub epsilon: f64,
    /// Clusters of `H + eps V` (ascending eigenvalue).
    pub clusters_eps: SpectralData,
    /// Perturbed cluster index `n` -> unperturbed cluster index `k` with
    /// `Range P_n(0) <= Range P_k`.
    pub pairing: Vec<usize>,
    /// Limit projections `P_n(0)`, aligned with `clusters_eps`.
    pub p0_refinement: Vec<CMatrix>,
    /// The unperturbed decomposition used for the pairing.
    pub unperturbed: SpectralData,
}

/// Options for the limit-projection construction.
#[derive(Debug, Clone, Copy)]
pub struct KatoOptions {
    /// Resolve splittings that are degenerate at first order by
    /// second-order perturbation theory.
    pub second_order: bool,
    /// Relative tolerance used to decide that first-order eigenvalues of the
    /// block coincide.
    pub splitting_tol: f64,
}

impl Default for KatoOptions {
    fn default() -> Self {
        Self {
            second_order: false,
            splitting_tol: 1e-9,
        }
    }
}

/// Eigendecompose `H + eps V`, pair each perturbed cluster to the
/// unperturbed cluster maximizing the overlap `tr(P_n(eps) P_k)`, and build
/// the limit projections `P_n(0)` by degenerate perturbation theory within
/// each unperturbed block.
pub fn perturbed_spectral(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    eps: f64,
    cluster_tol: f64,
) -> Result<PerturbedSpectral> {
    perturbed_spectral_with(h, v, eps, cluster_tol, KatoOptions::default())
}

pub fn perturbed_spectral_with(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    eps: f64,
    cluster_tol: f64,
    opts: KatoOptions,
) -> Result<PerturbedSpectral> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(KamError::InvalidParameter(format!(
            "eps must lie in [0, 1], got {eps}"
        )));
    }
    if h.dim() != v.dim() {
        return Err(KamError::DimensionMismatch {
            expected: h.dim(),
            got: v.dim(),
        });
    }
    let s0 = spectral_decompose(h, cluster_tol)?;
    let h_eps = HermitianMatrix::symmetrize(h.matrix() + v.matrix().scale(eps))?;
    let s_eps = spectral_decompose(&h_eps, cluster_tol)?;

    // overlap pairing: perturbed cluster n -> unperturbed cluster k
    let mut pairing = Vec::with_capacity(s_eps.num_clusters());
    for cn in s_eps.clusters() {
        let mut best = (0usize, f64::NEG_INFINITY);
        let mut second = f64::NEG_INFINITY;
        for (k, ck) in s0.clusters().iter().enumerate() {
            let ov = (&cn.projector * &ck.projector).trace().re;
            if ov > best.1 {
                second = best.1;
                best = (k, ov);
            } else if ov > second {
                second = ov;
            }
        }
        if second > 0.0 && second >= AMBIGUITY_RATIO * best.1 {
            return Err(KamError::CrossingSuspected {
                epsilon: eps,
                ratio: second / best.1,
            });
        }
        pairing.push(best.0);
    }

    // rank bookkeeping: children of each unperturbed cluster
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); s0.num_clusters()];
    for (n, &k) in pairing.iter().enumerate() {
        children[k].push(n);
    }
    for (k, ck) in s0.clusters().iter().enumerate() {
        let total: usize = children[k].iter().map(|&n| s_eps.clusters()[n].rank).sum();
        if total != ck.rank {
            return Err(KamError::CrossingSuspected {
                epsilon: eps,
                ratio: 1.0,
            });
        }
    }

    // limit projections P_n(0) within each unperturbed block
    let mut p0: Vec<Option<CMatrix>> = vec![None; s_eps.num_clusters()];
    for (k, ck) in s0.clusters().iter().enumerate() {
        if children[k].len() == 1 {
            // no splitting: the limit projection is the whole block
            p0[children[k][0]] = Some(ck.projector.clone());
            continue;
        }
        let sub = split_block(&s0, k, v, opts)?;
        // match sub-projectors to perturbed children by overlap
        let mut used = vec![false; sub.len()];
        for &n in &children[k] {
            let pn = &s_eps.clusters()[n].projector;
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            let mut second = f64::NEG_INFINITY;
            for (m, pm) in sub.iter().enumerate() {
                if used[m] {
                    continue;
                }
                let ov = (pn * pm).trace().re;
                if ov > best.1 {
                    second = best.1;
                    best = (m, ov);
                } else if ov > second {
                    second = ov;
                }
            }
            if best.0 == usize::MAX {
                return Err(KamError::CrossingSuspected {
                    epsilon: eps,
                    ratio: 1.0,
                });
            }
            if second > 0.0 && second >= AMBIGUITY_RATIO * best.1 {
                return Err(KamError::CrossingSuspected {
                    epsilon: eps,
                    ratio: second / best.1,
                });
            }
            used[best.0] = true;
            p0[n] = Some(sub[best.0].clone());
        }
    }

    let p0_refinement: Vec<CMatrix> = p0
        .into_iter()
        .map(|p| p.expect("pairing is total"))
        .collect();

    Ok(PerturbedSpectral {
        epsilon: eps,
        clusters_eps: s_eps,
        pairing,
        p0_refinement,
        unperturbed: s0,
    })
}

/// Split the degenerate block `k` by first-order perturbation theory
/// (diagonalize `Q^dag V Q` on the block), with an optional second-order
/// fallback `Q^dag V R_k V Q`, `R_k = sum_{l != k} P_l / (h_k - h_l)`, when
/// the first-order eigenvalues are themselves degenerate.
fn split_block(
    s0: &SpectralData,
    k: usize,
    v: &HermitianMatrix,
    opts: KatoOptions,
) -> Result<Vec<CMatrix>> {
    let ck = &s0.clusters()[k];
    let q = s0.basis().columns(ck.columns.start, ck.rank).into_owned();
    let m1 = q.adjoint() * v.matrix() * &q;
    let m1 = (&m1 + m1.adjoint()).scale(0.5);
    let groups = block_eigenprojectors(&m1, opts.splitting_tol)?;
    if groups.iter().all(|(_, r)| *r == 1) || groups.len() == ck.rank {
        return Ok(groups
            .into_iter()
            .map(|(w, _)| {
                let qw = &q * w;
                let p = &qw * qw.adjoint();
                (&p + p.adjoint()).scale(0.5)
            })
            .collect());
    }
    // first order did not fully split
    if !opts.second_order {
        if groups.len() > 1 {
            // partial split is fine: the perturbed clusters will match ranks
            return Ok(groups
                .into_iter()
                .map(|(w, _)| {
                    let qw = &q * w;
                    let p = &qw * qw.adjoint();
                    (&p + p.adjoint()).scale(0.5)
                })
                .collect());
        }
        return Err(KamError::DegenerateSplitting { order: 2 });
    }
    // second-order effective matrix on each still-degenerate group
    let n = s0.source_dim();
    let mut reduced = CMatrix::zeros(n, n);
    let h_k = ck.value;
    for (l, cl) in s0.clusters().iter().enumerate() {
        if l != k {
            reduced += cl.projector.scale(1.0 / (h_k - cl.value));
        }
    }
    let mut out = Vec::new();
    for (w, rank) in groups {
        if rank == 1 {
            let qw = &q * &w;
            let p = &qw * qw.adjoint();
            out.push((&p + p.adjoint()).scale(0.5));
            continue;
        }
        let qw = &q * &w; // n x rank basis of the degenerate group
        let m2 = qw.adjoint() * v.matrix() * &reduced * v.matrix() * &qw;
        let m2 = (&m2 + m2.adjoint()).scale(0.5);
        let subgroups = block_eigenprojectors(&m2, opts.splitting_tol)?;
        if subgroups.len() == 1 && rank > 1 {
            return Err(KamError::DegenerateSplitting { order: 3 });
        }
        for (w2, _) in subgroups {
            let qww = &qw * w2;
            let p = &qww * qww.adjoint();
            out.push((&p + p.adjoint()).scale(0.5));
        }
    }
    Ok(out)
}

/// Eigenprojector column groups of a small Hermitian matrix, grouped by
/// eigenvalue at relative tolerance.
fn block_eigenprojectors(m: &CMatrix, tol: f64) -> Result<Vec<(CMatrix, usize)>> {
    let r = m.nrows();
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or(KamError::EigenFailed { dim: r })?;
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let scale = eig
        .eigenvalues
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        .max(1.0);
    let thr = tol * scale;
    let mut groups: Vec<(CMatrix, usize)> = Vec::new();
    let mut start = 0usize;
    for i in 1..=r {
        let new_group = i == r || eig.eigenvalues[order[i]] - eig.eigenvalues[order[i - 1]] > thr;
        if new_group {
            let cols = &order[start..i];
            let mut w = CMatrix::zeros(r, cols.len());
            for (dst, &src) in cols.iter().enumerate() {
                w.set_column(dst, &eig.eigenvectors.column(src));
            }
            groups.push((w, cols.len()));
            start = i;
        }
    }
    Ok(groups)
}

/// The intertwining unitary `U(eps)` and its measured unitarity defect.
#[derive(Debug, Clone)]
pub struct KatoUnitary {
    pub epsilon: f64,
    pub u: CMatrix,
    pub unitarity_residual: f64,
}

/// `U(eps) = sum_n (I - R_n)^{-1/2} P_n(eps) P_n(0)` with
/// `R_n = (P_n(eps) - P_n(0))^2`; errors out when some `||R_n|| >= 1`.
pub fn kato_unitary(ps: &PerturbedSpectral) -> Result<KatoUnitary> {
    let n = ps.clusters_eps.source_dim();
    let mut u = CMatrix::zeros(n, n);
    for (idx, cn) in ps.clusters_eps.clusters().iter().enumerate() {
        let p_eps = &cn.projector;
        let p0 = &ps.p0_refinement[idx];
        let diff = p_eps - p0;
        let r = &diff * &diff;
        let r = (&r + r.adjoint()).scale(0.5);
        let inv_sqrt = hermitian_inv_sqrt(&(CMatrix::identity(n, n) - &r))?;
        u += inv_sqrt * p_eps * p0;
    }
    let unitarity_residual = crate::spectral::unitarity_defect(&u);
    Ok(KatoUnitary {
        epsilon: ps.epsilon,
        u,
        unitarity_residual,
    })
}

/// `M^{-1/2}` for Hermitian positive definite `M`, via eigendecomposition.
pub fn hermitian_inv_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let n = m.nrows();
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or(KamError::EigenFailed { dim: n })?;
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        // I - R_n lost positivity: the projections are too far apart
        return Err(KamError::ProjectionsTooFar { r_norm: 1.0 - min });
    }
    let mut scaled = eig.eigenvectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let f = C64::new(eig.eigenvalues[j].powf(-0.5), 0.0);
        for z in col.iter_mut() {
            *z *= f;
        }
    }
    Ok(scaled * eig.eigenvectors.adjoint())
}

/// Lipschitz evidence for one unperturbed cluster.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzEstimate {
    pub cluster: usize,
    /// `c_k = max over the grid of ||(U(eps) - I) P_k|| / eps`.
    pub c_k: f64,
    /// `(eps, ratio)` samples.
    pub samples: Vec<(f64, f64)>,
    /// Max-over-min ratio across the grid.
    pub spread: f64,
    /// `spread <= 1.2` (ratios flat within 20%).
    pub flat: bool,
}

/// Grid maxima of `||(U(eps) - I) P_k|| / eps` for every cluster, reusing a
/// single Kato unitary per grid point.
pub fn lipschitz_constants(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    eps_grid: &[f64],
    cluster_tol: f64,
) -> Result<Vec<LipschitzEstimate>> {
    if eps_grid.is_empty() {
        return Err(KamError::EmptyGrid);
    }
    let s0 = spectral_decompose(h, cluster_tol)?;
    let n = h.dim();
    let mut samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); s0.num_clusters()];
    for &eps in eps_grid {
        if eps <= 0.0 {
            return Err(KamError::InvalidParameter(
                "lipschitz grid needs strictly positive eps".into(),
            ));
        }
        let ps = perturbed_spectral(h, v, eps, cluster_tol)?;
        let ku = kato_unitary(&ps)?;
        let u_minus_i = &ku.u - CMatrix::identity(n, n);
        for (k, ck) in s0.clusters().iter().enumerate() {
            let ratio = operator_norm(&(&u_minus_i * &ck.projector)) / eps;
            samples[k].push((eps, ratio));
        }
    }
    Ok(samples
        .into_iter()
        .enumerate()
        .map(|(cluster, samples)| {
            let c_k = samples.iter().map(|&(_, r)| r).fold(0.0, f64::max);
            let lo = samples
                .iter()
                .map(|&(_, r)| r)
                .fold(f64::INFINITY, f64::min);
            let spread = if lo > 0.0 {
                c_k / lo
            } else if c_k == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            LipschitzEstimate {
                cluster,
                c_k,
                samples,
                spread,
                flat: spread <= 1.2,
            }
        })
        .collect())
}

/// One row of the perturbation ledger: per `eps` and perturbed cluster `n`,
/// the projection drift and the unitary deviation on the parent cluster.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KatoLedgerRow {
    pub epsilon: f64,
    pub n: usize,
    /// `||P_n(eps) - P_n(0)||`.
    pub p_diff_norm: f64,
    /// `||(U(eps) - I) P_k||` for the parent cluster `k` of `n`.
    pub u_dev_norm: f64,
}

/// Tabulate the ledger across an epsilon grid.
pub fn kato_ledger(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    eps_grid: &[f64],
    cluster_tol: f64,
) -> Result<Vec<KatoLedgerRow>> {
    if eps_grid.is_empty() {
        return Err(KamError::EmptyGrid);
    }
    let n_dim = h.dim();
    let mut rows = Vec::new();
    for &eps in eps_grid {
        let ps = perturbed_spectral(h, v, eps, cluster_tol)?;
        let ku = kato_unitary(&ps)?;
        let u_minus_i = &ku.u - CMatrix::identity(n_dim, n_dim);
        for (n, cn) in ps.clusters_eps.clusters().iter().enumerate() {
            let p_diff_norm = operator_norm(&(&cn.projector - &ps.p0_refinement[n]));
            let parent = ps.unperturbed.projector(ps.pairing[n]);
            let u_dev_norm = operator_norm(&(&u_minus_i * parent));
            rows.push(KatoLedgerRow {
                epsilon: eps,
                n,
                p_diff_norm,
                u_dev_norm,
            });
        }
    }
    Ok(rows)
}

/// Single-cluster convenience wrapper.
pub fn lipschitz_constant(
    h: &HermitianMatrix,
    v: &HermitianMatrix,
    k: usize,
    eps_grid: &[f64],
    cluster_tol: f64,
) -> Result<LipschitzEstimate> {
    let mut all = lipschitz_constants(h, v, eps_grid, cluster_tol)?;
    if k >= all.len() {
        return Err(KamError::InvalidParameter(format!(
            "cluster index {k} out of range ({} clusters)",
            all.len()
        )));
    }
    Ok(all.swap_remove(k))
}

/// `C_psi = 4 ||S|| ||psi|| sum_j c_{k_j}` for a state supported on the
/// listed clusters.
pub fn wandering_bound_eigenstate(
    spectral: &SpectralData,
    s_matrix: &CMatrix,
    psi: &CVector,
    support_clusters: &[usize],
    c_list: &[f64],
) -> Result<f64> {
    if support_clusters.len() != c_list.len() {
        return Err(KamError::InvalidParameter(
            "support_clusters and c_list must have equal length".into(),
        ));
    }
    let n = spectral.source_dim();
    if psi.len() != n {
        return Err(KamError::DimensionMismatch {
            expected: n,
            got: psi.len(),
        });
    }
    let mut projected = CVector::zeros(n);
    for &k in support_clusters {
        projected += spectral.projector(k) * psi;
    }
    let residual = (psi - projected).norm();
    if residual > 1e-10 * psi.norm().max(1.0) {
        return Err(KamError::SupportViolation { residual });
    }
    let c_sum: f64 = c_list.iter().sum();
    Ok(4.0 * operator_norm(s_matrix) * psi.norm() * c_sum)
}

/// `C = 4 ||S|| sum_m c_{k_m}` for a finite-rank symmetry supported on the
/// listed clusters (`S = sum_m P_{k_m} S P_{k_m}`).
pub fn wandering_bound_finite_rank(
    spectral: &SpectralData,
    s_matrix: &CMatrix,
    support_clusters: &[usize],
    c_list: &[f64],
) -> Result<f64> {
    if support_clusters.len() != c_list.len() {
        return Err(KamError::InvalidParameter(
            "support_clusters and c_list must have equal length".into(),
        ));
    }
    let n = spectral.source_dim();
    if s_matrix.nrows() != n || s_matrix.ncols() != n {
        return Err(KamError::DimensionMismatch {
            expected: n,
            got: s_matrix.nrows().max(s_matrix.ncols()),
        });
    }
    let mut supported = CMatrix::zeros(n, n);
    for &k in support_clusters {
        let p = spectral.projector(k);
        supported += p * s_matrix * p;
    }
    let residual = operator_norm(&(s_matrix - supported));
    if residual > 1e-10 * operator_norm(s_matrix).max(1.0) {
        return Err(KamError::SupportViolation { residual });
    }
    let c_sum: f64 = c_list.iter().sum();
    Ok(4.0 * operator_norm(s_matrix) * c_sum)
}
