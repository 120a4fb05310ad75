use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid pulse timing: {0}")]
    Timing(String),

    #[error("sequence with {0} pulse(s) has no CPMG/Hahn split")]
    Decomposition(usize),

    #[error("free diffusion has no correlation time")]
    NoCorrelationTime,

    #[error("free diffusion has no Lorentzian spectrum")]
    NoSpectrum,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimated error {error:.3e} vs target {target:.3e}")]
    Quadrature { error: f64, target: f64 },

    #[error("time step too large: {reason} (try dt <= {suggested_dt:.3e} s)")]
    StepSize { reason: String, suggested_dt: f64 },

    #[error("walk duration {duration:.3e} s is shorter than the required {required:.3e} s")]
    BurnIn { duration: f64, required: f64 },

    #[error("cannot normalize a curve whose first point is {0}")]
    Normalization(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no fit start converged: {0}")]
    NonConvergence(String),
}
