use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coordinate {coord:?} is outside a grid of side {side} in {dims} dimension(s)")]
    Coordinate {
        coord: Vec<usize>,
        side: usize,
        dims: usize,
    },

    #[error("block of side {block} at offset {offset:?} overruns a grid of side {side}")]
    Range {
        offset: Vec<usize>,
        block: usize,
        side: usize,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sieve invariant violated: {0}")]
    Invariant(String),

    #[error("state label is not in final form {{0, 2^(n-1)}}^d")]
    NotFinal,

    #[error("low-bit recovery did not reach full rank after {attempts} sieve run(s)")]
    RecoveryFailed { attempts: usize },

    #[error("shift recovery failed in round {round}: {source}")]
    Round { round: u32, source: Box<Error> },

    #[error("input violates the algorithm contract: {0}")]
    Contract(String),

    #[error("instance too large: {0}")]
    Size(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
