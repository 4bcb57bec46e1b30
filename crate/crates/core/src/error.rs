use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid fit window ({xi_min}, {xi_max}): {reason}")]
    InvalidWindow { xi_min: f64, xi_max: f64, reason: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("non-finite value {value} at node {index} while sampling")]
    NonFiniteSample { index: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical integrity: imaginary residue {residue:e} exceeds tolerance")]
    NumericalIntegrity { residue: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("singular at t = {singular_time} (requested t = {t})")]
    Singularity { t: f64, singular_time: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
