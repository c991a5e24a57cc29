use thiserror::Error;

/// Errors raised by model construction, simulation and pricing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The Esscher exponent left the region where the driver's moment
    /// generating function is finite.
    #[error("exponent h = {h} outside the admissible domain: {constraint}")]
    Domain { h: f64, constraint: String },

    /// A mixer evaluated on the prior support leaves the driver's admissible
    /// domain. `u` and `x` locate the witness.
    #[error("inadmissible mixer at u = {u}, x = {x}: h = {h} violates {constraint}")]
    Inadmissible {
        u: f64,
        x: f64,
        h: f64,
        constraint: String,
    },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    /// All posterior log-weights are -inf.
    #[error("degenerate posterior at t = {t}: every weight vanished")]
    DegeneratePosterior { t: f64 },

    /// The integrand is not decaying at the quadrature horizon.
    #[error(
        "integrand does not decay at horizon {horizon}; increase u_horizon (tail ratio {ratio})"
    )]
    Horizon { horizon: f64, ratio: f64 },

    #[error("initial curve admits arbitrage at t = {t}: rho = {rho}")]
    CurveArbitrage { t: f64, rho: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("time ordering violated: {0}")]
    TimeOrder(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}
