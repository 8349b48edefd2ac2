use thiserror::Error;

pub type Result<T, E = DpiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DpiError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("point {index}: {source}")]
    Point {
        index: usize,
        #[source]
        source: Box<DpiError>,
    },

    #[error("iteration {iteration} ({phase}): {source}")]
    Iteration {
        iteration: usize,
        phase: &'static str,
        #[source]
        source: Box<DpiError>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DpiError {
    pub(crate) fn at_point(self, index: usize) -> Self {
        DpiError::Point {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_iteration(self, iteration: usize, phase: &'static str) -> Self {
        DpiError::Iteration {
            iteration,
            phase,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(DpiError::Shape { expected, got })
    }
}
