//! Crate-wide error type.
//!
//! Calibration failure gets its own variant because the CLI maps it to a
//! dedicated exit code: a sweep where every point fails calibration is a
//! different kind of failure than a malformed config.

use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("modulation order m must be even and within 2..=16, got {0}")]
    InvalidModulationOrder(u32),

    #[error("{0} is not a constellation point")]
    NotAConstellationPoint(Complex64),

    #[error("ring elements have different moduli ({0} vs {1})")]
    RingModulusMismatch(u32, u32),

    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("noise variance must be non-negative, got {0}")]
    NegativeNoiseVariance(f64),

    #[error("estimation-error variance gamma must be non-negative, got {0}")]
    NegativeGamma(f64),

    #[error("masses must be non-negative and sum to 1 (got sum {0})")]
    InvalidPmf(f64),

    #[error("empty or fully guarded support after restriction")]
    EmptySupport,

    #[error("channel estimate is zero; broadcast cannot be equalized")]
    ZeroChannelEstimate,

    #[error("node state is missing {0}")]
    IncompleteNodeState(&'static str),

    #[error("sample streams disagree in length: {0} vs {1}")]
    SampleLengthMismatch(usize, usize),

    #[error("sample at index {index} lies inside the guard band")]
    SampleInGuardBand { index: u64 },

    #[error("conditioning sample lies inside the guard band; selection only applies to consensus samples")]
    ConditioningSampleInBand,

    #[error("no sample held for consensus index {0}")]
    MissingSample(u64),

    #[error(
        "guard-band calibration cannot reach mismatch target {target} at {snr_db} dB \
         (best achieved {best})"
    )]
    CalibrationFailure { target: f64, snr_db: f64, best: f64 },

    #[error("log-likelihood ratio undefined: both conditional masses are zero")]
    UndefinedLlr,

    #[error("parity-check matrix: {0}")]
    BadParityCheck(String),

    #[error("alist parse error at line {line}: {reason}")]
    AlistParse { line: usize, reason: String },

    #[error("{context}: length {got} does not match expected {expected}")]
    LengthMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    #[error(
        "mutual-information estimate needs at least {needed} samples for a \
         {alphabet}-cell joint alphabet, got {got}"
    )]
    InsufficientSamples {
        needed: usize,
        got: usize,
        alphabet: usize,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
