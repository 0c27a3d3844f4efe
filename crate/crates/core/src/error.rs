use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("overlap matrix is ill-conditioned (condition estimate {condition:.3e} > {limit:.1e})")]
    Conditioning { condition: f64, limit: f64 },

    #[error("{0} did not converge")]
    NoConvergence(String),

    #[error("lambda = {0} is not a non-negative integer or half-integer")]
    NotAlgebraic(f64),

    #[error(
        "momentum p = {p} needs at least {required_nodes} position nodes per panel layout, \
         rule provides {available}"
    )]
    NodeDensity {
        p: f64,
        required_nodes: usize,
        available: usize,
    },

    #[error("series at p = {p} loses {lost_digits:.1} digits to cancellation")]
    Cancellation { p: f64, lost_digits: f64 },

    #[error("densities are not normalized (integral = {0})")]
    Normalization(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no sign change of E_{n} on [{lo}, {hi}]")]
    NoSignChange { n: usize, lo: f64, hi: f64 },

    #[error("state is not trapped: no root in the rescaled well band for n = {0}")]
    NotTrapped(usize),

    #[error("parity mismatch: {0}")]
    ParityMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
