// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series has length {n}; at least {min} observations are required")]
    TooShort { n: usize, min: usize },

    #[error("non-finite observation at index {index}")]
    NonFinite { index: usize },

    #[error("insufficient blocks: n = {n}, k_n = {k} gives fewer than two blocks")]
    InsufficientBlocks { n: usize, k: usize },

    #[error("invalid range {first}..={last} for a series of length {n}")]
    InvalidRange { first: usize, last: usize, n: usize },

    #[error("degenerate block {block}: zero within-block variation")]
    DegenerateBlock { block: usize },

    #[error("degenerate scan at j = {j}: zero self-normalizer")]
    DegenerateScan { j: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bootstrap gave up after {attempts} draws without {required} usable replicates")]
    BootstrapExhausted { attempts: usize, required: usize },
}

impl Error {
    /// True for failures caused by the data rather than by the caller's parameters.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateBlock { .. }
                | Error::DegenerateScan { .. }
                | Error::Degenerate(_)
                | Error::BootstrapExhausted { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
