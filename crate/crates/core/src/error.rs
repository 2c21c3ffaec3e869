use thiserror::Error;

/// Errors raised by the numeric kernels and the table/formula tooling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,

    #[error("square root of a negative number")]
    NegativeSqrt,

    #[error("lattice basis is rank deficient")]
    RankDeficient,

    #[error("basis values are known to {available} bits but {required} bits are needed")]
    PrecisionExhausted { required: u64, available: u64 },

    #[error("{0} is not smooth over the basis")]
    NotSmooth(String),

    #[error("relation matrix is singular")]
    SingularMatrix,

    #[error("candidate pool has rank {rank}, need {needed}")]
    InsufficientRank { rank: usize, needed: usize },

    #[error("no built-in {kind} formula for n = {n}")]
    UnsupportedN { kind: &'static str, n: usize },

    #[error("log({0}) is needed but was not supplied")]
    MissingDependency(u64),

    #[error("requested {requested} bits but the context supports at most {capacity}")]
    ContextTooSmall { requested: u64, capacity: u64 },

    #[error("context has no {0} basis")]
    MissingBasis(&'static str),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("tan argument is too close to a pole")]
    NearPole,

    #[error("series argument too large for truncation order {order}")]
    SeriesArgument { order: usize },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
