use thiserror::Error;

/// Errors produced by the annealtrack library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("size limit exceeded: {what} is {actual}, limit is {limit}")]
    SizeLimit {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("association matrix is not feasible")]
    Infeasible,

    #[error("spectrum is degenerate at s = {s}: gap {gap:e} below tolerance")]
    Degenerate { s: f64, gap: f64 },

    #[error(
        "integration accuracy lost: norm drift {drift:e} with {steps} steps; \
         retry with at least {suggested_steps} steps"
    )]
    Accuracy {
        drift: f64,
        steps: usize,
        suggested_steps: usize,
    },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("no feasible association state in the run")]
    EmptyPosterior,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
