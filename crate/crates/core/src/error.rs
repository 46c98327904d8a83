use num_bigint::BigUint;
use thiserror::Error;

use crate::grammar::GrammarError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Grammar(#[from] GrammarError),

    #[error("unknown token `{token}` at position {position}")]
    UnknownToken { token: String, position: usize },

    #[error("porous string is empty")]
    EmptyString,

    #[error("index {index} out of bounds for {count} trees")]
    IndexOutOfBounds { index: BigUint, count: BigUint },

    #[error("incomplete probability vector: no weight for rule `{rule}`")]
    IncompleteWeights { rule: String },

    #[error("invalid rule weights: {0}")]
    InvalidWeights(String),

    #[error("requested {requested} distinct trees but only {count} exist")]
    TooManySamples { requested: BigUint, count: BigUint },

    #[error("oracle instance too large: {0}")]
    OracleTooLarge(String),
}
