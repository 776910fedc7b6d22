use thiserror::Error;

pub type Result<T> = std::result::Result<T, NeckError>;

#[derive(Debug, Error)]
pub enum NeckError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mesh would need more than {cap} vertices (estimated {estimated}); use eps >= {eps_floor:.3e}")]
    Capacity {
        cap: usize,
        estimated: usize,
        eps_floor: f64,
    },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("Newton stagnated at eta = {eta:e} after {iterations} iterations (residual {residual:e})")]
    Stagnation {
        residual: f64,
        eta: f64,
        iterations: usize,
    },
    #[error("unsupported branch: {0}")]
    UnsupportedBranch(String),
    #[error("accuracy not reached: {0}")]
    Accuracy(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NeckError {
    pub fn domain(msg: impl Into<String>) -> Self {
        NeckError::Domain(msg.into())
    }
}
