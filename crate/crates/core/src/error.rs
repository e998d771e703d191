//! Error types shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The point does not lie on the constant-energy section (discriminant <= 0).
    #[error("point outside the energy shell (discriminant {discriminant:.6e})")]
    OutsideEnergyShell { discriminant: f64 },

    /// The orbit never re-crossed the section within the configured time cap.
    #[error("no section return within t_max = {t_max}")]
    NoReturn { t_max: f64 },

    #[error("integration diverged to a non-finite state at t = {t}")]
    IntegrationDiverged { t: f64 },

    /// Sampling region rejected nearly every draw.
    #[error("region infeasible: {accepted} of {attempts} draws accepted")]
    RegionInfeasible { accepted: usize, attempts: usize },

    #[error("training diverged at epoch {epoch} (loss = {loss:.6e})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("operation not supported for baseline MLP models")]
    UnsupportedForBaseline,

    #[error("matrix is not an involution (max |R^2 - I| = {residual:.3e})")]
    NotAnInvolution { residual: f64 },

    #[error("matrix is not anti-symplectic (max |R^T J R + J| = {residual:.3e})")]
    NotAntiSymplectic { residual: f64 },

    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("dataset file: {0}")]
    DatasetFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            why: why.into(),
        }
    }
}
