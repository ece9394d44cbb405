use thiserror::Error;

/// Errors raised by the numerical and physical layers of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("spectral density singular at band edge (omega = {omega})")]
    BandEdge { omega: f64 },

    #[error("quadrature did not converge: estimate {re}{im:+}i, error {error} > tolerance {tolerance}")]
    Quadrature { re: f64, im: f64, error: f64, tolerance: f64 },

    #[error("Bessel order {order} exceeds configured cap {cap}")]
    BesselOrder { order: i64, cap: i64 },

    #[error("integrator step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {max_steps} steps at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("hierarchy size {size} exceeds cap {cap}")]
    HierarchyTooLarge { size: usize, cap: usize },

    #[error("fixed point did not converge after {iterations} iterations (residual {residual})")]
    FixedPoint { iterations: usize, residual: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("output field evaluated at t = {t} beyond t_out = {t_out}")]
    BeyondOutputTime { t: f64, t_out: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain { what, detail: detail.into() }
    }
}
