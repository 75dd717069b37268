use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative of order {order} unavailable for {activation} activation (smoothness order {smoothness})")]
    DerivativeUnavailable {
        activation: &'static str,
        order: u8,
        smoothness: u8,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero curvature: completing the square needs xi != 0")]
    ZeroCurvature,
    #[error("integral does not converge: {0}")]
    NonIntegrable(String),
    #[error("grid spacing {spacing} too coarse for scale k = {k_max} (need <= {required})")]
    GridTooCoarse {
        spacing: f64,
        k_max: i32,
        required: f64,
    },
    #[error("dictionary is empty")]
    DictionaryEmpty,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("Gauss-Newton diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<crate::inverse::GaussNewtonTrace>,
    },
    #[error("Jacobian rank collapse at iteration {iteration}: sigma_min/sigma_max = {ratio:e}")]
    RankCollapse {
        iteration: usize,
        ratio: f64,
        trace: Box<crate::inverse::GaussNewtonTrace>,
    },
    #[error("fixture missing or unreadable: {0}")]
    FixtureMissing(String),
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
