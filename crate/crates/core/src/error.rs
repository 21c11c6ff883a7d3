use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("small divisor |k·n| = {divisor:.3e} below tolerance {tol:.1e} for harmonic k = {k:?}")]
    SmallDivisor { k: [i32; 3], divisor: f64, tol: f64 },

    #[error("resonant secular frequency: |k·ω| = {divisor:.3e} for k = {k:?} (tolerance {tol:.1e})")]
    ResonantFrequency { k: [i32; 3], divisor: f64, tol: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("series term count {count} exceeds the configured limit {limit}")]
    TermLimit { count: usize, limit: usize },

    #[error("degenerate quadratic form: {0}")]
    Degenerate(String),

    #[error("invalid orbit: {0}")]
    InvalidOrbit(String),

    #[error("close encounter between planets {i} and {j} at t = {t:.3} yr (distance {dist:.3e} AU)")]
    CloseEncounter { i: usize, j: usize, t: f64, dist: f64 },

    #[error("missing remainder for order {0}")]
    MissingRemainder(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
