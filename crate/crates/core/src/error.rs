use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory {trajectory} diverged at simulated time {time} (non-finite state)")]
    Diverged { trajectory: usize, time: f64 },

    #[error("non-finite values encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("delay depth {m} needs at least {needed} rows per trajectory, found {rows}")]
    DelayTooLarge { m: usize, needed: usize, rows: usize },

    #[error(
        "feature matrix is rank deficient: {rank} of {columns} columns independent \
         (smallest pivot ratio {ratio:.3e}); add ridge regularization or lower the degree"
    )]
    RankDeficient {
        rank: usize,
        columns: usize,
        ratio: f64,
    },

    #[error("multi-index {0} is not part of the dictionary")]
    TargetNotInDictionary(String),

    #[error("Crank-Nicolson operator (I - dt/2 A) is singular for dt = {dt}")]
    SingularPropagator { dt: f64 },

    #[error("matrix exponential overflow (t*|A|_1 = {scaled_norm:.3e})")]
    ExpmOverflow { scaled_norm: f64 },

    #[error("index {index} out of range for basis of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("duplicate index {0} in observed set")]
    DuplicateIndex(usize),

    #[error("generalized Langevin integration unstable at t = {time}: |c_O| grew by {growth:.3e}")]
    Unstable { time: f64, growth: f64 },

    #[error(
        "power-law fit did not converge after {iterations} iterations \
         (best iterate alpha1={alpha1}, alpha2={alpha2}, alpha3={alpha3})"
    )]
    FitNotConverged {
        iterations: usize,
        alpha1: f64,
        alpha2: f64,
        alpha3: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
