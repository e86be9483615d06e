//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped so that callers (notably the CLI) can map them to
/// stable exit codes: configuration/validation problems, domain refusals
/// (a dynamic that does not admit an ergodic transformation), and numeric
/// failures during simulation or estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("expression parse error: {0}")]
    Parse(String),

    #[error("invalid dynamics: {0}")]
    InvalidDynamics(String),

    #[error("diffusion not strictly positive at x = {x}: b(x) = {value}")]
    NonPositiveDiffusion { x: f64, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value at path {path}, step {step} (t = {t})")]
    NonFinite { path: usize, step: usize, t: f64 },

    #[error(
        "dynamic does not admit an ergodic transformation \
         (residual {residual:.6e} exceeds tolerance {tolerance:.1e})"
    )]
    NotErgodizable { residual: f64, tolerance: f64 },

    #[error("transform undefined at x = {x} (path {path}, step {step}): {reason}")]
    TransformDomain {
        x: f64,
        path: usize,
        step: usize,
        reason: String,
    },

    #[error("quadrature failed to converge on [{lo}, {hi}]")]
    QuadratureFailure { lo: f64, hi: f64 },

    #[error("undefined rate at t = 0")]
    UndefinedRate,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported transform form for this operation: {0}")]
    UnsupportedForm(String),

    #[error("ensemble mismatch: {0}")]
    EnsembleMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for the CLI: 2 config/validation error,
    /// 3 domain refusal, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::InvalidDynamics(_)
            | Error::NonPositiveDiffusion { .. }
            | Error::Config(_)
            | Error::Precondition(_)
            | Error::UnsupportedForm(_)
            | Error::EnsembleMismatch(_)
            | Error::Io(_)
            | Error::Serialize(_) => 2,
            Error::NotErgodizable { .. } => 3,
            Error::NonFinite { .. }
            | Error::TransformDomain { .. }
            | Error::QuadratureFailure { .. }
            | Error::UndefinedRate
            | Error::InsufficientData(_) => 4,
        }
    }
}
