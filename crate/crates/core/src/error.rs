use std::io;

/// Every fallible operation in this crate returns one of these.
///
/// Errors split into two classes. Validation errors mean the inputs were
/// unusable (bad files, off-grid values, nonsense options) and map to CLI
/// exit code 1. Computation errors mean the inputs parsed fine but a
/// precondition of the analysis failed partway through (degenerate
/// percentile band, no surviving settings, too many skipped resamples) and
/// map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("curve is empty")]
    EmptyCurve,

    #[error("final-return window {window} exceeds curve length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("run set contains no records")]
    EmptyRunSet,

    #[error("{path}:{line}: {msg}")]
    MalformedRow {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: value {value} for axis {axis} is not on the declared grid")]
    OffGridValue {
        path: String,
        line: usize,
        axis: String,
        value: String,
    },

    #[error("{path}:{line}: duplicate run for alg={alg} env={env} seed={seed}")]
    DuplicateRun {
        path: String,
        line: usize,
        alg: String,
        env: String,
        seed: u64,
    },

    #[error("invalid hyperparameter space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("environment {env}: percentile band is degenerate (p{q_lo} == p{q_hi})")]
    DegenerateNormalization { env: String, q_lo: f64, q_hi: f64 },

    #[error("environment {env}: {count} retained cell(s), need at least 2 to form a percentile band")]
    TooFewCells { env: String, count: usize },

    #[error("environment {env} has no normalization constants")]
    MissingEnvNorm { env: String },

    #[error("algorithm {alg} has no retained setting in environment {env}")]
    NoRetainedSettings { alg: String, env: String },

    #[error("algorithm {alg} has no setting retained in every environment")]
    NoEligibleSetting { alg: String },

    #[error("environment {env}: no retained setting matches the frozen coordinates")]
    NoFeasibleSetting { env: String },

    #[error("space has {n} axes, subset enumeration is capped at {max}")]
    TooManyAxes { n: usize, max: usize },

    #[error("cannot take percentiles of an empty sample")]
    EmptySamples,

    #[error("cannot normalize an empty batch")]
    EmptyBatch,

    #[error("need at least 2 returns to estimate a percentile spread, got {len}")]
    TooFewReturns { len: usize },

    #[error("percentile spread is zero; cannot scale")]
    ZeroDenominator,

    #[error("dimension mismatch: state tracks {expected}, observation has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{skipped} of {total} bootstrap replicates failed preconditions (more than 10%)")]
    TooManyReplicateFailures { skipped: usize, total: usize },

    #[error("problem too large: {what} = {size} exceeds cap {max}")]
    TooLarge {
        what: &'static str,
        size: usize,
        max: usize,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// CLI exit code class: 1 for input/validation problems, 2 for failures
    /// arising during computation on valid inputs.
    pub fn exit_class(&self) -> i32 {
        match self {
            Error::EmptyCurve
            | Error::WindowTooLarge { .. }
            | Error::EmptyRunSet
            | Error::MalformedRow { .. }
            | Error::OffGridValue { .. }
            | Error::DuplicateRun { .. }
            | Error::InvalidSpace(_)
            | Error::InvalidConfig(_)
            | Error::TooManyAxes { .. }
            | Error::TooLarge { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Toml(_) => 1,
            Error::DegenerateNormalization { .. }
            | Error::TooFewCells { .. }
            | Error::MissingEnvNorm { .. }
            | Error::NoRetainedSettings { .. }
            | Error::NoEligibleSetting { .. }
            | Error::NoFeasibleSetting { .. }
            | Error::EmptySamples
            | Error::EmptyBatch
            | Error::TooFewReturns { .. }
            | Error::ZeroDenominator
            | Error::DimensionMismatch { .. }
            | Error::TooManyReplicateFailures { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
