use thiserror::Error;

/// Errors produced by the estimation library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("design is rank deficient: numerical rank {rank}, need {needed}")]
    RankDeficient { rank: usize, needed: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("argument outside of domain: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no confidence interval at level alpha = {0}")]
    MissingAlpha(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed data file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from the
    /// user's input (the CLI maps these to a distinct exit code).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::DegenerateDesign(_) | Error::Domain(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
