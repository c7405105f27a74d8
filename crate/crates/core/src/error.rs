use thiserror::Error;

use crate::construction::SizeBound;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0} is not an odd prime")]
    NotPrime(u64),

    #[error("resource limit exceeded: {what} (estimate {estimate}, cap {cap}; size bound {size_bound})")]
    ResourceLimit {
        what: String,
        estimate: SizeBound,
        cap: u128,
        size_bound: SizeBound,
    },

    #[error("not certifiable at p = {p}: the almost-invariant set does not fit in half of F_p; use p >= {advisory_min_p}")]
    NotCertifiable {
        p: u64,
        /// `None` when the construction was refused by the resource cap.
        x_len: Option<u64>,
        advisory_min_p: SizeBound,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
