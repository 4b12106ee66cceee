use thiserror::Error;

/// Errors produced by code construction, penalty evaluation and the codec.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for an alphabet of {len} symbols")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("series diverges: {0}")]
    Divergent(String),

    #[error("pointwise redundancy is unbounded")]
    UnboundedRedundancy,

    #[error("empty input")]
    EmptyInput,

    #[error("weights are not sorted in nondecreasing order")]
    UnsortedInput,

    #[error("source is not light-tailed enough for a unary-ended code (searched r <= {r_max})")]
    NotLightTailed { r_max: usize },

    #[error("stability violated: {0}")]
    Stability(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error("symbol {symbol} cannot be encoded: alphabet has {alphabet} symbols")]
    SymbolOutOfRange { symbol: u64, alphabet: usize },

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported container version {0}")]
    BadVersion(u8),

    #[error("malformed code descriptor: {0}")]
    BadDescriptor(String),

    #[error("truncated input")]
    Truncated,

    #[error("nonzero padding bits")]
    NonzeroPadding,

    #[error("{0} trailing bytes after payload")]
    TrailingData(usize),

    #[error("no finite bound found: {0}")]
    NoFiniteBound(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
