use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// Non-convergence of the Newton solver is not an error: it is returned as a
/// [`BreatherSolution`](crate::solver::BreatherSolution) with `converged == false`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: {got} points, need at least {min}")]
    GridTooSmall { got: usize, min: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("CFL violation: dt = {dt} exceeds limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("blow-up: non-finite field after step {step}")]
    BlowUp { step: usize },

    #[error("aliasing: {samples} time samples cannot resolve {n_max} modes (need a power of two >= {required})")]
    Aliasing {
        samples: usize,
        n_max: usize,
        required: usize,
    },

    #[error("ambiguous dominant mode: modes {first} and {second} carry energies within {ratio:.4} of each other")]
    AmbiguousDominance {
        first: usize,
        second: usize,
        ratio: f64,
    },

    #[error("domain too small: boundary amplitude {value:e} exceeds {limit:e}")]
    DomainTooSmall { value: f64, limit: f64 },

    #[error("singular Jacobian ({0}); check the gauge settings")]
    Gauge(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
