use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("composite dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("factor {index} is not a {expected} factor")]
    FactorKind { index: usize, expected: &'static str },

    #[error("index {index} out of range for {len} factors")]
    FactorIndex { index: usize, len: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sensor coupling {coupling} exceeds the weak-coupling bound {bound}")]
    SensorCoupling { coupling: f64, bound: f64 },

    #[error("steady state is not unique: {0}")]
    DegenerateKernel(String),

    #[error("steady state did not converge: residual {residual:e}")]
    NonConvergence { residual: f64 },

    #[error("operator is not Hermitian (defect {0:e})")]
    NotHermitian(f64),

    #[error("grid must be strictly ascending")]
    GridOrder,

    #[error("boson truncation n_max = {n_max} is too small; {needed} required")]
    Truncation { n_max: usize, needed: usize },

    #[error("quantity is undefined: {0}")]
    Undefined(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
