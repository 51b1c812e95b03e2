use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Two or more exponential rates are too close for the distinct-rate
    /// hypoexponential density.
    #[error("degenerate exponential rates {0} and {1}")]
    DegenerateRates(f64, f64),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("internal consistency violated: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
