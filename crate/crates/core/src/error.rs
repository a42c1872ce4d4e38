use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("numerical integration did not converge: {0}")]
    QuadratureNonConvergent(String),

    #[error("series or continued fraction did not converge: {0}")]
    NonConvergent(String),

    #[error("moment exponent {nu} exceeds the cap {cap}")]
    ExponentCap { nu: f64, cap: f64 },

    #[error("QoS point infeasible for this channel: {0}")]
    QosInfeasible(String),

    #[error("degenerate channel: every SNR sample is zero")]
    DegenerateChannel,

    #[error("rate {rate} bit/s is below the minimum representation {min_rate} bit/s")]
    BelowMinimumRate { rate: f64, min_rate: f64 },

    #[error("quality {quality} outside the curve range [{min}, {max})")]
    QualityOutOfRange { quality: f64, min: f64, max: f64 },

    #[error("slope {slope} below the smallest slope of the curve ({min_slope})")]
    SlopeBelowRange { slope: f64, min_slope: f64 },

    #[error("allocation infeasible: minimum bandwidths exceed the budget by {deficit_hz} Hz")]
    AllocationInfeasible { deficit_hz: f64 },

    #[error("inconsistent allocation: {0}")]
    InconsistentAllocation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
