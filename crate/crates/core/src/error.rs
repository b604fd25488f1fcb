use alloc::string::String;

use crate::expr::{DslError, EvalError};
use crate::index::{Index, IndexSet};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("weight undefined at level {k}, index {index}: {source}")]
    Eval { k: u64, index: Index, source: EvalError },
    #[error("index sets differ: {0:?} vs {1:?}")]
    IndexSetMismatch(IndexSet, IndexSet),
    #[error("level {0} does not exist")]
    NoSuchLevel(u64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("search budget exhausted: {0}")]
    Budget(String),
}

pub type Result<T> = core::result::Result<T, Error>;
