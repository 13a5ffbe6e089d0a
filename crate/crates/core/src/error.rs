//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong in the numerical pipeline.
///
/// Errors carry the measured quantity that triggered them so callers
/// (and the CLI diagnostics) can report actionable numbers.
#[derive(Debug, Clone, Error)]
pub enum KamError {
    #[error("matrix is not Hermitian: max asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver failed to converge (dim {dim})")]
    EigenFailed { dim: usize },

    #[error("no off-diagonal sector: single spectral cluster but ||{{B}}|| = {off_norm:.3e} > 0")]
    NoOffDiagonalSector { off_norm: f64 },

    #[error("spectral gap vanished after clustering (eta = {eta:.3e})")]
    GapVanished { eta: f64 },

    #[error("robustness check requires a refinement (the P_n(0) family from the kato module)")]
    RefinementRequired,

    #[error("crossing suspected at epsilon = {epsilon:.3e} (overlap ratio {ratio:.3} within 10%), reduce epsilon")]
    CrossingSuspected { epsilon: f64, ratio: f64 },

    #[error("perturbed projections too far from unperturbed (||R_n|| = {r_norm:.3e} >= 1), reduce epsilon")]
    ProjectionsTooFar { r_norm: f64 },

    #[error("splitting still degenerate at perturbative order {order}; higher-order theory not implemented")]
    DegenerateSplitting { order: usize },

    #[error("input not supported on the listed clusters (residual {residual:.3e})")]
    SupportViolation { residual: f64 },

    #[error("empty grid")]
    EmptyGrid,

    #[error("not enough data points: {got} usable, need {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl KamError {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            KamError::EigenFailed { .. }
                | KamError::NoOffDiagonalSector { .. }
                | KamError::GapVanished { .. }
                | KamError::CrossingSuspected { .. }
                | KamError::ProjectionsTooFar { .. }
                | KamError::DegenerateSplitting { .. }
        )
    }

    /// Machine-readable kind tag used by CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            KamError::NotHermitian { .. } => "not_hermitian",
            KamError::NotSquare { .. } => "not_square",
            KamError::DimensionMismatch { .. } => "dimension_mismatch",
            KamError::EigenFailed { .. } => "eigen_failed",
            KamError::NoOffDiagonalSector { .. } => "no_off_diagonal_sector",
            KamError::GapVanished { .. } => "gap_vanished",
            KamError::RefinementRequired => "refinement_required",
            KamError::CrossingSuspected { .. } => "crossing_suspected",
            KamError::ProjectionsTooFar { .. } => "projections_too_far",
            KamError::DegenerateSplitting { .. } => "degenerate_splitting",
            KamError::SupportViolation { .. } => "support_violation",
            KamError::EmptyGrid => "empty_grid",
            KamError::InsufficientData { .. } => "insufficient_data",
            KamError::Domain(_) => "domain",
            KamError::InvalidParameter(_) => "invalid_parameter",
        }
    }
}

pub type Result<T> = std::result::Result<T, KamError>;
