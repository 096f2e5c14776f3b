use thiserror::Error;

/// Errors surfaced by the library.
///
/// Numerical failures carry enough context to diagnose the offending
/// evaluation; validation failures of structural model conditions are *not*
/// errors (they are report entries, see [`crate::model::ValidationReport`]).
#[derive(Debug, Error)]
pub enum LevyError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Quadrature did not converge. `partial` holds the trailing partial
    /// sums so the divergence pattern can be inspected.
    #[error("quadrature failed in {what}: {detail} (trailing partial sums {partial:?})")]
    Quadrature {
        what: String,
        detail: String,
        partial: Vec<f64>,
    },

    /// The exponential of the Levy exponent is not integrable at this time.
    #[error("exp(-t psi) not integrable at t={t}: {detail}")]
    ExpL { t: f64, detail: String },

    #[error("failed to bracket {what} at target {target}")]
    Bracket { what: String, target: f64 },

    #[error("simulation configuration: {0}")]
    SimConfig(String),
}

pub type Result<T> = std::result::Result<T, LevyError>;
