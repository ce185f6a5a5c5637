use thiserror::Error;

/// Errors raised while building proximity data, clustering, or reading files.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("not a valid kernel: squared distance {value} between objects {i} and {j} is negative")]
    NotKernel { i: usize, j: usize, value: f64 },

    #[error("contiguity graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("size mismatch: expected {expected} objects, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
