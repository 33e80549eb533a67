use thiserror::Error;

/// Errors produced by structure validation and the numerical kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid structure data: {0}")]
    InvalidStructure(String),

    #[error("invalid representation data: {0}")]
    InvalidRepresentation(String),

    #[error("direction is not in p (theta residual {residual:.3e})")]
    NotInP { residual: f64 },

    #[error("projective point must be nonzero")]
    ZeroProjectivePoint,

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("directions do not commute (bracket residual {residual:.3e})")]
    NotCommuting { residual: f64 },

    #[error("maximal weight did not converge or diverge by t = {t_max}")]
    IndeterminateLimit { t_max: f64 },

    #[error("rational rank is ambiguous (best relation residual {residual:.3e})")]
    IndeterminateRank { residual: f64 },

    #[error("numerical rank is ambiguous near the tolerance")]
    IndeterminateRankGap,

    #[error("unknown preset: {0}")]
    UnknownPreset(String),
}
