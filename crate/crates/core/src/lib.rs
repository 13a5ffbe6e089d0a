//! Block diagonalization of perturbed Hermitian matrices by the
//! Schrieffer-Wolff / quantum-KAM iteration, with certified operator-norm
//! bounds on how far a robust symmetry can wander under the perturbed
//! evolution.
//!
//! The crate is organized around a small set of pipelines:
//!
//! * [`spectral`] — eigendecomposition with degeneracy clustering, spectral
//!   projectors, block decompositions, exact unitary evolution;
//! * [`commutant`] — commutant / bicommutant bases and the symmetry
//!   classification (symmetry, robust, completely robust);
//! * [`homological`] — closed-form solution of `i[X, H] = {B}` with `[X] = 0`;
//! * [`kam`] — the order-by-order expansion `B_s, K_s, V_hat_s`, assembly of
//!   `W(eps) = e^{iK(eps)}`, conjugation residuals and the eternal
//!   block-diagonal approximation;
//! * [`bounds`] — the certified constants `alpha, beta, rho`, Catalan
//!   majorants, and every closed-form bound evaluator;
//! * [`kato`] — degenerate perturbation data for `H + eps V`: limit
//!   projections, the intertwining unitary, Lipschitz constants;
//! * [`wandering`] — grid-sup wandering ranges and scaling-exponent fits;
//! * [`models`] — built-in instances (harmonic oscillator, Josephson junction
//!   on the line and on the circle, random gapped ensembles).

pub mod bounds;
pub mod commutant;
pub mod error;
pub mod grid;
pub mod homological;
pub mod kam;
pub mod kato;
pub mod matrix;
pub mod models;
pub mod report;
pub mod spectral;
pub mod wandering;

pub use error::{KamError, Result};
pub use matrix::{CMatrix, CVector, HermitianMatrix, MatrixJson};
pub use spectral::{spectral_decompose, spectral_decompose_default, SpectralData};
