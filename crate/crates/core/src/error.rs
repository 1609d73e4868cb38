use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid body representation: {0}")]
    InvalidBody(String),
    #[error("lattice cloud is empty: body too small for k = {k}")]
    EmptyCloud { k: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("size mismatch: {what} ({left} vs {right})")]
    SizeMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("{what} too large: {size} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("precision loss in {0}")]
    PrecisionLoss(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("input is not convex: second difference {value:e} at node {node}")]
    NonConvex { node: usize, value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("step-size violation: drift magnitude {drift:e} exceeds 1/dt = {limit:e}")]
    StepSize { drift: f64, limit: f64 },
    #[error("optimality certificate failed: {0}")]
    Certificate(String),
    #[error("expression error at column {pos}: {msg}")]
    Expr { pos: usize, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Whether the error stems from the numerics rather than from the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PrecisionLoss(_)
                | Error::NonFinite(_)
                | Error::NonConvergence { .. }
                | Error::StepSize { .. }
                | Error::Certificate(_)
        )
    }
}
