use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core. `Usage` covers caller contract violations
/// (shape mismatches, bad indices); `Config` covers infeasible experiment
/// settings; `NonFinite` signals numeric divergence during training.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    Dimension {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{op}: index {index} out of range (limit {limit})")]
    OutOfRange {
        op: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("{op}: parameter layout mismatch")]
    Layout { op: &'static str },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(op: &'static str, expected: usize, found: usize) -> Self {
        Error::Dimension {
            op,
            expected,
            found,
        }
    }
}

pub(crate) fn ensure_dim(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::dim(op, expected, found))
    }
}
