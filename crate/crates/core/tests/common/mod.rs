//! Independent oracles and ensemble helpers shared by the integration and
//! acceptance suites. Everything here recomputes the quantities under test
//! by a different route than the library (vectorization in the original
//! basis, literal projector arithmetic, literal multi-index enumeration).

#![allow(dead_code)]

use kamrange::matrix::{CMatrix, CVector, HermitianMatrix};
use kamrange::models::ModelInstance;
use kamrange::spectral::SpectralData;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Literal `sum_k P_k A P_k` from the stored projectors.
pub fn block_diag_projector_oracle(a: &CMatrix, s: &SpectralData) -> CMatrix {
    let n = s.source_dim();
    let mut acc = CMatrix::zeros(n, n);
    for c in s.clusters() {
        acc += &c.projector * a * &c.projector;
    }
    acc
}

/// Column-major vectorization.
fn vec_of(m: &CMatrix) -> CVector {
    let n = m.nrows();
    CVector::from_fn(n * n, |idx, _| m[(idx % n, idx / n)])
}

fn unvec(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| v[j * n + i])
}

/// Minimum-norm least-squares solution of `i[X, H] = {B}` by vectorizing the
/// commutation map in the ORIGINAL basis and pseudo-inverting it through a
/// Hermitian eigendecomposition of the n^2 x n^2 map.
///
/// `i[X,H] = i(XH - HX)`; with column-major vec, `vec(XH) = (H^T (x) I) vec X`
/// and `vec(HX) = (I (x) H) vec X`. The map `A = H^T (x) I - I (x) H` is
/// Hermitian; the min-norm solution is `-i A^+ vec({B})`, and its kernel
/// (within-cluster pairs) is exactly the block-diagonal gauge, so the
/// pseudo-inverse reproduces the `[X] = 0` solution.
pub fn homological_vectorized_oracle(h: &CMatrix, s: &SpectralData, b: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let nn = n * n;
    let ht = h.transpose();
    let id = CMatrix::identity(n, n);
    let mut a = CMatrix::zeros(nn, nn);
    // kron(H^T, I) - kron(I, H)
    for bi in 0..n {
        for bj in 0..n {
            let hij = ht[(bi, bj)];
            for k in 0..n {
                a[(bi * n + k, bj * n + k)] += hij;
            }
        }
    }
    for bi in 0..n {
        for k in 0..n {
            for l in 0..n {
                a[(bi * n + k, bi * n + l)] -= h[(k, l)] * id[(bi, bi)];
            }
        }
    }
    let eig = a
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 200_000)
        .expect("vectorized map eigendecomposition");
    // spectral threshold: anything below eta/2 is the gauge kernel
    let eta = s.gap();
    let thr = if eta.is_finite() {
        eta / 2.0
    } else {
        f64::INFINITY
    };

    let off = b - block_diag_projector_oracle(b, s);
    let rhs = vec_of(&off);
    let y = eig.eigenvectors.adjoint() * rhs;
    let mut x_coeff = CVector::zeros(nn);
    for i in 0..nn {
        let lambda = eig.eigenvalues[i];
        if lambda.abs() > thr.min(1e10) && lambda.abs() > 1e-10 {
            x_coeff[i] = y[i] / C64::new(lambda, 0.0);
        }
    }
    let x_vec = &eig.eigenvectors * x_coeff;
    // i[X,H] = {B}  <=>  A vec(X) = -i vec({B}); fold the -i in at the end
    unvec(&x_vec, n).map(|z| z * C64::new(0.0, -1.0))
}

/// Literal multi-index enumeration of the `B_s` definition:
/// `B_s = sum_{n=2}^{s} (-i)^n/n! sum_{|l|=s} adK_{l1}..adK_{ln}(H)
///      + sum_{n=1}^{s-1} (-i)^n/n! sum_{|l|=s-1} adK_{l1}..adK_{ln}(V)`.
pub fn multi_index_bs_oracle(h: &CMatrix, v: &CMatrix, ks: &[CMatrix], s_ord: usize) -> CMatrix {
    let n_dim = h.nrows();
    let mut total = CMatrix::zeros(n_dim, n_dim);
    if s_ord == 1 {
        return v.clone();
    }
    // first sum: n in 2..=s, compositions of s
    for n in 2..=s_ord {
        let coeff = minus_i_pow(n) / factorial(n);
        for comp in compositions(s_ord, n) {
            total += nested_ad(ks, &comp, h).map(|z| z * coeff);
        }
    }
    // second sum: n in 1..=s-1, compositions of s-1
    for n in 1..=(s_ord - 1) {
        let coeff = minus_i_pow(n) / factorial(n);
        for comp in compositions(s_ord - 1, n) {
            total += nested_ad(ks, &comp, v).map(|z| z * coeff);
        }
    }
    total
}

fn minus_i_pow(n: usize) -> C64 {
    let mut z = C64::new(1.0, 0.0);
    for _ in 0..n {
        z *= C64::new(0.0, -1.0);
    }
    z
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
}

/// `[K_{l1}, [K_{l2}, ... [K_{ln}, A]]]`.
fn nested_ad(ks: &[CMatrix], comp: &[usize], a: &CMatrix) -> CMatrix {
    let mut acc = a.clone();
    for &l in comp.iter().rev() {
        let k = &ks[l - 1];
        acc = k * &acc - &acc * k;
    }
    acc
}

/// All compositions of `s` into `n` positive parts.
pub fn compositions(s: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(s: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            let mut c = prefix.clone();
            c.push(s);
            out.push(c);
            return;
        }
        for first in 1..=(s - n + 1) {
            prefix.push(first);
            rec(s - first, n - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n >= 1 && n <= s {
        rec(s, n, &mut Vec::new(), &mut out);
    }
    out
}

/// Dimension of `{A : [A, P_k] = 0 for all k}` by the nullspace of the
/// stacked vectorized commutation maps (guards the structural commutant
/// construction against clustering bugs).
pub fn commutant_dimension_oracle(s: &SpectralData) -> usize {
    let n = s.source_dim();
    let nn = n * n;
    // stack M_k = P_k^T (x) I - I (x) P_k; nullspace of sum_k M_k^dag M_k
    let mut gram = CMatrix::zeros(nn, nn);
    for c in s.clusters() {
        let m = kron(&c.projector.transpose(), &CMatrix::identity(n, n))
            - kron(&CMatrix::identity(n, n), &c.projector);
        gram += m.adjoint() * &m;
    }
    let eig = gram
        .try_symmetric_eigen(f64::EPSILON, 200_000)
        .expect("gram eigendecomposition");
    eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-8).count()
}

/// Dimension of the bicommutant by the same nullspace construction against
/// every commutant basis element.
pub fn bicommutant_dimension_oracle(s: &SpectralData) -> usize {
    let n = s.source_dim();
    let nn = n * n;
    let mut gram = CMatrix::zeros(nn, nn);
    for b in kamrange::commutant::commutant_basis(s) {
        let m = kron(&b.transpose(), &CMatrix::identity(n, n)) - kron(&CMatrix::identity(n, n), &b);
        gram += m.adjoint() * &m;
    }
    let gram = (&gram + gram.adjoint()).scale(0.5);
    let eig = gram
        .try_symmetric_eigen(f64::EPSILON, 200_000)
        .expect("gram eigendecomposition");
    eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-8).count()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    CMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Random partition of `dim` into cluster ranks (at least one rank >= 2 when
/// `force_degenerate`), deterministic in the rng.
pub fn random_ranks(rng: &mut ChaCha8Rng, dim: usize, force_degenerate: bool) -> Vec<usize> {
    loop {
        let mut remaining = dim;
        let mut ranks = Vec::new();
        while remaining > 0 {
            let r = rng.random_range(1..=remaining.min(3));
            ranks.push(r);
            remaining -= r;
        }
        if ranks.len() >= 2 && (!force_degenerate || ranks.iter().any(|&r| r >= 2)) {
            return ranks;
        }
    }
}

/// Random unit vector supported on the given eigenbasis columns.
pub fn random_unit_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let mut v = CVector::from_fn(n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let norm = v.norm();
    v /= C64::new(norm, 0.0);
    v
}

/// Seeded instance from the models ensemble with random mixed degeneracies.
pub fn random_instance(
    seed: u64,
    dim: usize,
    min_gap: f64,
    force_degenerate: bool,
) -> ModelInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let ranks = random_ranks(&mut rng, dim, force_degenerate);
    kamrange::models::random_gapped(dim, &ranks, min_gap, seed).expect("valid ensemble parameters")
}

/// Random Hermitian with entries O(1) (not normalized).
pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    (&g + g.adjoint()).scale(0.5)
}

/// Assert helper: `||a - b|| <= tol`, with a readable message.
pub fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64, what: &str) {
    let d = kamrange::matrix::operator_norm(&(a - b));
    assert!(d <= tol, "{what}: difference {d:.3e} > {tol:.3e}");
}

/// `H + eps V` as a HermitianMatrix.
pub fn perturbed(h: &HermitianMatrix, v: &HermitianMatrix, eps: f64) -> HermitianMatrix {
    HermitianMatrix::symmetrize(h.matrix() + v.matrix().scale(eps)).expect("square")
}
