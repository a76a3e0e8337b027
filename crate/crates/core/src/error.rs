use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An intermediate value left the finite floating-point range.
    #[error("range error: {0}")]
    Range(String),

    /// The input lies outside the region where the computation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested enumeration exceeds the configured size cap.
    #[error("resource error: {what} needs 2^{log2} entries, cap is 2^{cap_log2}")]
    Resource {
        what: &'static str,
        log2: u32,
        cap_log2: u32,
    },

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("density did not converge at {z} after {levels} levels (last ratio {last_ratio})")]
    NonConvergence {
        z: String,
        levels: usize,
        last_ratio: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("threshold {threshold} not attained by p = {p_max} (best normalized value {best})")]
    NotAttained {
        threshold: f64,
        p_max: usize,
        best: f64,
    },

    /// Failure attributed to one element of a batch (cover center, lattice row, trial).
    #[error("{context} {index}: {source}")]
    At {
        context: &'static str,
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(context: &'static str, index: usize, source: Error) -> Self {
        Error::At {
            context,
            index,
            source: Box::new(source),
        }
    }

    /// The innermost error, with any batch attribution stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            other => other,
        }
    }
}
