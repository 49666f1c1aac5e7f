use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input lies outside the range an operation is defined on.
    #[error("{param} = {value} is outside the valid range [{min}, {max}]")]
    Domain {
        param: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// The caller supplied inconsistent or insufficient input.
    #[error("{0}")]
    Usage(String),

    /// A least-squares fit could not be carried out.
    #[error("fit failed: {0}")]
    Fit(String),

    /// A simulation produced a non-finite state.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model file {path} has schema version {found}, expected {expected}")]
    Schema {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }

    /// True for errors caused by the caller rather than by the computation.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}

/// Checks `min <= value <= max`, naming `param` in the error otherwise.
pub(crate) fn check_range(param: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value.is_finite() && value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::Domain {
            param,
            value,
            min,
            max,
        })
    }
}
