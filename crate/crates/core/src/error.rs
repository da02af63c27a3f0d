use thiserror::Error;

/// Errors raised by mesh construction, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("incompressible material: poisson ratio {0} must lie in (-1, 0.5)")]
    Incompressible(f64),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver failure after {iterations} iterations: {reason} (violation {violation:.3e}, stationarity {stationarity:.3e})")]
    SolverFailure {
        reason: String,
        iterations: usize,
        violation: f64,
        stationarity: f64,
    },

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("unsupported in this loading mode: {0}")]
    UnsupportedMode(String),

    #[error("interpolant query: {0}")]
    Interpolant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension {
            what,
            got,
            expected,
        });
    }
    Ok(())
}
