use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("non-finite value for {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("{what} out of range: {value} ({constraint})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("|v| = {v} V is outside the direct-tunneling regime (barrier {phi_bar} eV)")]
    OutOfRegime { v: f64, phi_bar: f64 },

    #[error("calibration targets are infeasible; relative residuals {residuals:?}")]
    Infeasible { residuals: Vec<f64> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("data is not in the expected conduction regime: {0}")]
    WrongRegime(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e} A)")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub(crate) fn finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite { what, value })
    }
}
