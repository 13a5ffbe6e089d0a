//! Built-in Hamiltonian / perturbation / symmetry instances: the truncated
//! harmonic oscillator with parity, the Josephson junction in an inductive
//! loop in both representations, and seeded random gapped ensembles.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{KamError, Result};
use crate::matrix::{commutator, operator_norm, CMatrix, HermitianMatrix};

/// A candidate symmetry shipped with a model.
#[derive(Debug, Clone)]
pub struct NamedSymmetry {
    pub name: String,
    pub matrix: CMatrix,
    /// Commutes with `H` but expected to fail the robustness criterion for
    /// this model's perturbation (heuristic flag).
    pub fragile_candidate: bool,
}

/// A concrete instance: Hamiltonian, perturbation (entering as `eps * V`
/// with the declared `eps`), candidate symmetries and physical metadata.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub name: String,
    pub h: HermitianMatrix,
    pub v: HermitianMatrix,
    /// Physical strength multiplying `V` (e.g. `E_J` for the line junction).
    pub epsilon: f64,
    pub symmetries: Vec<NamedSymmetry>,
    /// The model's declared minimal spectral gap.
    pub eta_declared: f64,
    /// KAM-regime check of the model's inequality, when one applies.
    pub applicability: Option<bool>,
    pub metadata: BTreeMap<String, f64>,
}

impl ModelInstance {
    pub fn dim(&self) -> usize {
        self.h.dim()
    }
}

/// Truncated lowering operator: `a |k> = sqrt(k) |k-1>`.
fn lowering(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `cos(M)` of a Hermitian matrix through its eigendecomposition.
pub fn cos_hermitian(m: &HermitianMatrix) -> Result<CMatrix> {
    let eig = m
        .matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or(KamError::EigenFailed { dim: m.dim() })?;
    let mut scaled = eig.eigenvectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let f = C64::new(eig.eigenvalues[j].cos(), 0.0);
        for z in col.iter_mut() {
            *z *= f;
        }
    }
    Ok(scaled * eig.eigenvectors.adjoint())
}

/// Harmonic oscillator in the number basis (`m = omega = 1`):
/// `H = diag(k + 1/2)`, parity `Pi = diag((-1)^k)`, the parity-sector
/// projector `S = (1 - Pi)/2`, and the truncated momentum
/// `p = (a^dag - a)/(i sqrt(2))` as the perturbation.
pub fn harmonic_oscillator(n: usize) -> Result<ModelInstance> {
    if n < 4 {
        return Err(KamError::InvalidParameter(
            "harmonic oscillator needs N >= 4".into(),
        ));
    }
    let diag: Vec<f64> = (0..n).map(|k| k as f64 + 0.5).collect();
    let h = HermitianMatrix::from_real_diagonal(&diag);
    let a = lowering(n);
    // (a^dag - a)/(i sqrt(2)) = i (a - a^dag)/sqrt(2)
    let p = (a.clone() - a.adjoint()).map(|z| z * C64::new(0.0, 1.0 / 2.0f64.sqrt()));
    let v = HermitianMatrix::symmetrize(p)?;
    let parity: Vec<f64> = (0..n)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let pi = HermitianMatrix::from_real_diagonal(&parity);
    let s_diag: Vec<f64> = parity.iter().map(|&x| (1.0 - x) / 2.0).collect();
    let s = HermitianMatrix::from_real_diagonal(&s_diag);
    let mut metadata = BTreeMap::new();
    metadata.insert("N".into(), n as f64);
    metadata.insert("omega".into(), 1.0);
    Ok(ModelInstance {
        name: "harmonic_oscillator".into(),
        h,
        v,
        epsilon: 1.0,
        symmetries: vec![
            NamedSymmetry {
                name: "odd_parity_projector".into(),
                matrix: s.into_matrix(),
                fragile_candidate: false,
            },
            NamedSymmetry {
                name: "parity".into(),
                matrix: pi.into_matrix(),
                fragile_candidate: false,
            },
        ],
        eta_declared: 1.0,
        applicability: None,
        metadata,
    })
}

/// Josephson junction on the line: harmonic part
/// `H = omega (N_hat + 1/2)` with `omega = sqrt(8 E_C E_L)` in its number
/// basis, phase operator `phi = (2 E_C / E_L)^{1/4} (a + a^dag)`, and
/// perturbation `eps V = -E_J cos(phi - phi_ext)` (stored as
/// `V = -cos(phi - phi_ext)` with `eps = E_J`).
pub fn josephson_line(
    n: usize,
    e_c: f64,
    e_l: f64,
    e_j: f64,
    phi_ext: f64,
) -> Result<ModelInstance> {
    if n < 8 {
        return Err(KamError::InvalidParameter(
            "josephson_line needs N >= 8".into(),
        ));
    }
    if e_c <= 0.0 || e_l <= 0.0 || e_j < 0.0 {
        return Err(KamError::InvalidParameter(
            "energies must be positive (E_J >= 0)".into(),
        ));
    }
    let omega = (8.0 * e_c * e_l).sqrt();
    let diag: Vec<f64> = (0..n).map(|k| omega * (k as f64 + 0.5)).collect();
    let h = HermitianMatrix::from_real_diagonal(&diag);
    let a = lowering(n);
    let scale = (2.0 * e_c / e_l).powf(0.25);
    let phi = (a.clone() + a.adjoint()).scale(scale);
    let arg = HermitianMatrix::symmetrize(phi - CMatrix::identity(n, n).scale(phi_ext))?;
    let v_mat = -cos_hermitian(&arg)?;
    let v = HermitianMatrix::symmetrize(v_mat)?;

    let consts = bounds::constants();
    let ratio = (e_j / e_c) / (e_l / e_c).sqrt();
    let applicability = ratio <= 2.0 * 2.0f64.sqrt() / consts.rho;

    let parity: Vec<f64> = (0..n)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let pi = HermitianMatrix::from_real_diagonal(&parity);
    let fragile =
        operator_norm(&commutator(pi.matrix(), v.matrix())) > 1e-8 * v.operator_norm().max(1.0);

    let mut metadata = BTreeMap::new();
    metadata.insert("N".into(), n as f64);
    metadata.insert("E_C".into(), e_c);
    metadata.insert("E_L".into(), e_l);
    metadata.insert("E_J".into(), e_j);
    metadata.insert("phi_ext".into(), phi_ext);
    metadata.insert("omega".into(), omega);
    Ok(ModelInstance {
        name: "josephson_line".into(),
        h,
        v,
        epsilon: e_j,
        symmetries: vec![NamedSymmetry {
            name: "parity".into(),
            matrix: pi.into_matrix(),
            fragile_candidate: fragile,
        }],
        eta_declared: omega,
        applicability: Some(applicability),
        metadata,
    })
}

/// Unitary discrete Fourier transform from the charge basis
/// `n = -(N-1)/2 .. (N-1)/2` to the uniform phase grid on `[0, 2pi)`:
/// `F[j, c] = e^{i n_c phi_j} / sqrt(N)`.
pub fn charge_to_phase_dft(n_charge: usize) -> CMatrix {
    let m = (n_charge - 1) / 2;
    let norm = 1.0 / (n_charge as f64).sqrt();
    CMatrix::from_fn(n_charge, n_charge, |j, c| {
        let phi_j = 2.0 * std::f64::consts::PI * j as f64 / n_charge as f64;
        let n_c = c as f64 - m as f64;
        C64::from_polar(norm, n_c * phi_j)
    })
}

/// Josephson junction on the circle: `H = 4 E_C n^2` diagonal in the charge
/// basis (doubly degenerate `n <-> -n` levels, minimal gap `4 E_C`), and
/// `V = (E_L/2) phi^2 - E_J cos(phi - phi_ext)` built as a multiplication
/// operator on the phase grid (branch `phi in [0, 2pi)`) transformed to the
/// charge basis.
pub fn josephson_circle(
    n_charge: usize,
    e_c: f64,
    e_l: f64,
    e_j: f64,
    phi_ext: f64,
) -> Result<ModelInstance> {
    if n_charge.is_multiple_of(2) {
        return Err(KamError::InvalidParameter(
            "charge basis needs odd N (n = -(N-1)/2 .. (N-1)/2)".into(),
        ));
    }
    if n_charge < 3 {
        return Err(KamError::InvalidParameter(
            "josephson_circle needs N >= 3".into(),
        ));
    }
    if e_c <= 0.0 || e_l < 0.0 || e_j < 0.0 {
        return Err(KamError::InvalidParameter(
            "E_C must be positive, E_L and E_J nonnegative".into(),
        ));
    }
    let m = (n_charge - 1) / 2;
    let diag: Vec<f64> = (0..n_charge)
        .map(|c| {
            let n = c as f64 - m as f64;
            4.0 * e_c * n * n
        })
        .collect();
    let h = HermitianMatrix::from_real_diagonal(&diag);

    let f = charge_to_phase_dft(n_charge);
    let g = CMatrix::from_fn(n_charge, n_charge, |i, j| {
        if i == j {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / n_charge as f64;
            C64::new(0.5 * e_l * phi * phi - e_j * (phi - phi_ext).cos(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let v = HermitianMatrix::symmetrize(f.adjoint() * g * &f)?;

    let consts = bounds::constants();
    let lhs = std::f64::consts::PI.powi(2) / 2.0 * e_l / e_c + e_j / (4.0 * e_c);
    let applicability = lhs < 1.0 / consts.rho;

    // parity n <-> -n: the exchange matrix, an exact symmetry of H
    let parity = CMatrix::from_fn(n_charge, n_charge, |i, j| {
        if i + j == n_charge - 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let parity_fragile =
        operator_norm(&commutator(&parity, v.matrix())) > 1e-8 * v.operator_norm().max(1.0);
    let mut p0 = CMatrix::zeros(n_charge, n_charge);
    p0[(m, m)] = C64::new(1.0, 0.0);
    let mut p1 = CMatrix::zeros(n_charge, n_charge);
    p1[(m - 1, m - 1)] = C64::new(1.0, 0.0);
    p1[(m + 1, m + 1)] = C64::new(1.0, 0.0);

    let mut metadata = BTreeMap::new();
    metadata.insert("N".into(), n_charge as f64);
    metadata.insert("E_C".into(), e_c);
    metadata.insert("E_L".into(), e_l);
    metadata.insert("E_J".into(), e_j);
    metadata.insert("phi_ext".into(), phi_ext);
    Ok(ModelInstance {
        name: "josephson_circle".into(),
        h,
        v,
        epsilon: 1.0,
        symmetries: vec![
            NamedSymmetry {
                name: "charge_parity".into(),
                matrix: parity,
                fragile_candidate: parity_fragile,
            },
            NamedSymmetry {
                name: "projector_n0".into(),
                matrix: p0,
                fragile_candidate: false,
            },
            NamedSymmetry {
                name: "projector_n1".into(),
                matrix: p1,
                fragile_candidate: false,
            },
        ],
        eta_declared: 4.0 * e_c,
        applicability: Some(applicability),
        metadata,
    })
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn ginibre(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    // fill in a fixed (row-major) order for seed determinism
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = C64::new(standard_normal(rng), standard_normal(rng));
        }
    }
    m
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre
/// matrix, with the R-diagonal phase fix.
pub fn haar_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let z = ginibre(rng, n);
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / C64::new(d.norm(), 0.0)
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random Hermitian (GUE-like) matrix normalized to unit operator norm.
pub fn random_hermitian_unit_norm(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let g = ginibre(rng, n);
    let herm = (&g + g.adjoint()).scale(0.5);
    let norm = operator_norm(&herm);
    HermitianMatrix::symmetrize(herm.scale(1.0 / norm.max(1e-300)))
        .expect("symmetrized matrix is square")
}

/// Random gapped instance: eigenvalues spaced >= `min_gap` with the
/// prescribed degeneracies (one gap forced to exactly `min_gap`), conjugated
/// by a Haar-random unitary; `V` random Hermitian with `||V|| = 1`.
/// Deterministic under the seed.
pub fn random_gapped(
    dim: usize,
    cluster_ranks: &[usize],
    min_gap: f64,
    seed: u64,
) -> Result<ModelInstance> {
    if cluster_ranks.is_empty() || cluster_ranks.contains(&0) {
        return Err(KamError::InvalidParameter(
            "cluster ranks must be nonempty and positive".into(),
        ));
    }
    if cluster_ranks.iter().sum::<usize>() != dim {
        return Err(KamError::InvalidParameter(format!(
            "cluster ranks sum {} != dim {dim}",
            cluster_ranks.iter().sum::<usize>()
        )));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the guard
    if !(min_gap > 0.0) {
        return Err(KamError::InvalidParameter(
            "min_gap must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_clusters = cluster_ranks.len();

    let mut values = vec![0.0f64; n_clusters];
    if n_clusters > 1 {
        let mut gaps: Vec<f64> = (0..n_clusters - 1)
            .map(|_| min_gap * (1.0 + rng.random::<f64>()))
            .collect();
        let tight = rng.random_range(0..gaps.len());
        gaps[tight] = min_gap;
        for k in 1..n_clusters {
            values[k] = values[k - 1] + gaps[k - 1];
        }
    }

    let u = haar_unitary(&mut rng, dim);
    let mut diag = Vec::with_capacity(dim);
    for (k, &r) in cluster_ranks.iter().enumerate() {
        diag.extend(std::iter::repeat_n(values[k], r));
    }
    let d = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::new(diag[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let h = HermitianMatrix::symmetrize(&u * d * u.adjoint())?;
    let v = random_hermitian_unit_norm(&mut rng, dim);

    // cluster projectors straight from the construction
    let mut symmetries = Vec::new();
    let mut col = 0usize;
    let mut first_degenerate: Option<(usize, usize)> = None;
    for (k, &r) in cluster_ranks.iter().enumerate() {
        let uk = u.columns(col, r);
        let p = uk * uk.adjoint();
        symmetries.push(NamedSymmetry {
            name: format!("projector_{k}"),
            matrix: (&p + p.adjoint()).scale(0.5),
            fragile_candidate: false,
        });
        if r >= 2 && first_degenerate.is_none() {
            first_degenerate = Some((col, r));
        }
        col += r;
    }
    if let Some((start, r)) = first_degenerate {
        // a block-diagonal symmetry outside the bicommutant: alternating
        // signs inside the first degenerate cluster
        let mut sdiag = vec![0.0f64; dim];
        for (i, s) in sdiag.iter_mut().skip(start).take(r).enumerate() {
            *s = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let sd = CMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                C64::new(sdiag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let s = &u * sd * u.adjoint();
        symmetries.push(NamedSymmetry {
            name: "degenerate_block_asymmetry".into(),
            matrix: (&s + s.adjoint()).scale(0.5),
            fragile_candidate: true,
        });
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("dim".into(), dim as f64);
    metadata.insert("min_gap".into(), min_gap);
    metadata.insert("seed".into(), seed as f64);
    let eta_declared = if n_clusters > 1 {
        min_gap
    } else {
        f64::INFINITY
    };
    Ok(ModelInstance {
        name: "random_gapped".into(),
        h,
        v,
        epsilon: 1.0,
        symmetries,
        eta_declared,
        applicability: None,
        metadata,
    })
}

/// External model specification, the JSON format
/// `{"model": "...", "params": {...}, "N": n}` accepted by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(rename = "N")]
    pub n: usize,
}

impl ModelSpec {
    fn param(&self, key: &str, default: f64) -> f64 {
        self.params
            .get(key)
            .and_then(|v| v.as_f64())
            .unwrap_or(default)
    }

    pub fn build(&self) -> Result<ModelInstance> {
        match self.model.as_str() {
            "harmonic_oscillator" => harmonic_oscillator(self.n),
            "josephson_line" => josephson_line(
                self.n,
                self.param("e_c", 1.0),
                self.param("e_l", 1.0),
                self.param("e_j", 0.01),
                self.param("phi_ext", 0.0),
            ),
            "josephson_circle" => josephson_circle(
                self.n,
                self.param("e_c", 1.0),
                self.param("e_l", 0.001),
                self.param("e_j", 0.01),
                self.param("phi_ext", 0.0),
            ),
            "random_gapped" => {
                let ranks: Vec<usize> = match self.params.get("ranks") {
                    Some(serde_json::Value::Array(a)) => a
                        .iter()
                        .map(|v| v.as_u64().map(|x| x as usize))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| {
                            KamError::InvalidParameter("ranks must be positive integers".into())
                        })?,
                    None => vec![1; self.n],
                    _ => return Err(KamError::InvalidParameter("ranks must be an array".into())),
                };
                random_gapped(
                    self.n,
                    &ranks,
                    self.param("min_gap", 1.0),
                    self.param("seed", 42.0) as u64,
                )
            }
            other => Err(KamError::InvalidParameter(format!(
                "unknown model {other:?}"
            ))),
        }
    }

    /// Relative norm change of `H` and `V` on the low-energy window when the
    /// truncation grows by 8. Small values mean the truncation is faithful
    /// where the physics lives.
    ///
    /// The window is the leading quarter of the basis (centered quarter for
    /// the charge basis): ladder-operator functions like `cos(phi)` carry
    /// O(1) artifacts within `~2 sqrt(N)` of the truncation edge at every
    /// `N`, so a full-block comparison would never converge.
    pub fn truncation_health(&self) -> Result<f64> {
        let small = self.build()?;
        let mut bigger = self.clone();
        bigger.n = self.n + 8;
        let large = bigger.build()?;
        let w = (self.n / 4).max(2);
        let (off_small, off_large) = match self.model.as_str() {
            // charge basis is centered: n = -(N-1)/2 .. (N-1)/2
            "josephson_circle" => ((self.n - w) / 2, (self.n + 8 - w) / 2),
            _ => (0usize, 0usize),
        };
        let window = |m: &CMatrix, off: usize| m.view((off, off), (w, w)).into_owned();
        let h_small = window(small.h.matrix(), off_small);
        let v_small = window(small.v.matrix(), off_small);
        let h_big = window(large.h.matrix(), off_large);
        let v_big = window(large.v.matrix(), off_large);
        let h_rel = operator_norm(&(&h_big - &h_small)) / operator_norm(&h_small).max(1e-300);
        let v_rel = operator_norm(&(&v_big - &v_small)) / operator_norm(&v_small).max(1e-300);
        Ok(h_rel.max(v_rel))
    }
}
