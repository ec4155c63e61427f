use thiserror::Error;

/// Errors raised by the quantizers and the transform.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension must be at least 1")]
    EmptyInput,
    #[error("input contains a non-finite value at coordinate {0}")]
    NonFinite(usize),
    #[error("argument is NaN")]
    NaN,
    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("argument {arg} is outside the domain [{lo}, {hi}]")]
    OutOfDomain { arg: f64, lo: f64, hi: f64 },
    #[error("bucket count {0} must be a power of two and at least 2")]
    InvalidBucketCount(usize),
    #[error("bit width {0} outside the supported range 1..=16")]
    InvalidBitWidth(u32),
    #[error("dither offset {0} outside [0, 1)")]
    InvalidOffset(f64),
    #[error("codebook for B={buckets}, U={offset} has a non-finite reconstruction value in a reachable bucket")]
    DegenerateCodebook { buckets: usize, offset: f64 },
    #[error("bucket index {index} out of range for {buckets} buckets")]
    IndexOutOfRange { index: usize, buckets: usize },
    #[error("negative scale {0}")]
    NegativeScale(f64),
    #[error("residual norm {0} exceeds 2")]
    ResidualTooLarge(f64),
    #[error("input norm {0} is not within 1e-9 of 1")]
    NotUnit(f64),
    #[error("malformed code: {0}")]
    MalformedCode(String),
    #[error("enumeration dimension {0} exceeds the limit of 12")]
    DimensionTooLarge(usize),
    #[error("quadrature on [{a}, {b}] did not converge")]
    NonConvergence { a: f64, b: f64 },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
