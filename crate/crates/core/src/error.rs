use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// A numeric argument is out of its domain (non-finite, non-positive scale, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A combination of sizes that cannot be satisfied, e.g. an alphabet too
    /// large to give every symbol a nonzero mass under the admissibility cap.
    #[error("configuration error: {0}")]
    Configuration(String),
    /// A mass outside `[1, 2^(M-1))` reached the coder.
    #[error("coder contract violation: symbol {symbol} has mass {mass} at precision {precision}")]
    InadmissibleMass {
        symbol: usize,
        mass: u32,
        precision: u32,
    },
    #[error("table entry not representable: {0}")]
    Representability(String),
    #[error("table verification failed for distribution {dist}, symbol {symbol}, state {state}")]
    TableVerification {
        dist: usize,
        symbol: usize,
        state: u32,
    },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("bit stream underflow")]
    StreamUnderflow,
    /// A decoded stream did not end at the initial state with every bit consumed.
    #[error("corrupt stream in lane {lane}")]
    CorruptStream { lane: usize },
    #[error("coder state {0} outside the resting range")]
    StateOutOfRange(u32),
    #[error("symbol {symbol} or distribution {dist} out of range")]
    IndexOutOfRange { symbol: usize, dist: usize },
    #[error("lane count mismatch: expected {expected}, found {found}")]
    LaneMismatch { expected: usize, found: usize },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("normal equations are singular")]
    SingularFit,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("model error: {0}")]
    Model(String),
}
