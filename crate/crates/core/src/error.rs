use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// An evaluation produced NaN or infinity.
    #[error("non-finite {what} at evaluation point{}", coordinate.map(|i| format!(" (coordinate {i})")).unwrap_or_default())]
    NonFinite {
        what: &'static str,
        coordinate: Option<usize>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cached evaluation does not belong to the current iterate")]
    CacheMismatch,
    #[error("negative multiplier {value} at index {index}")]
    NegativeMultiplier { index: usize, value: f64 },
    #[error("damped Newton system could not be factorized")]
    SingularSystem,
    #[error("problem file: {0}")]
    Parse(serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
