use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {context}")]
    NonFiniteValue { context: String },
    #[error("convexity violated: {what} = {value} at u = {at}")]
    ConvexityViolation { what: &'static str, value: f64, at: f64 },
    #[error("quadrature did not converge on [{a}, {b}] (estimated error {error:e})")]
    QuadratureFailure { a: f64, b: f64, error: f64 },
    #[error("degenerate shock: u_minus == u_plus == {0}")]
    DegenerateShock(f64),
    #[error("profile left (u_plus, u_minus) at xi = {xi}: {detail}")]
    ProfileEscape { xi: f64, detail: String },
    #[error("ODE integration failed at xi = {xi}: {detail}")]
    IntegrationFailure { xi: f64, detail: String },
    #[error("insufficient domain: {0}")]
    InsufficientDomain(String),
    #[error("shift {shift} out of range (|X| must stay below {limit})")]
    ShiftOutOfRange { shift: f64, limit: f64 },
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64 },
    #[error("{what} = {value:e} is negative beyond round-off")]
    SignViolation { what: &'static str, value: f64 },
    #[error("could not invert eta' at target {target} (bracket [{lo}, {hi}])")]
    InversionFailure { target: f64, lo: f64, hi: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn finite(value: f64, context: impl FnOnce() -> String) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteValue { context: context() })
    }
}
