use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of bounds for {family}: {detail}")]
    ParameterOutOfBounds { family: String, detail: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("collinear conditioning set: {0}")]
    Collinear(String),

    #[error("empty candidate set")]
    EmptyCandidates,
}

pub type Result<T> = std::result::Result<T, Error>;
