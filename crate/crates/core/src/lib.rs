//! Diffusion-driven decoherence of spins under selective dynamical
//! recoupling (SDR) pulse trains in a constant field gradient.
//!
//! The crate covers the forward problem (pulse timing, filter functions,
//! Gaussian-phase decay in closed form and by spectral quadrature), a
//! reflecting random-walk Monte Carlo used as ground truth, and the inverse
//! problem of recovering a pore diameter from an SDR scan.

pub mod decay;
pub mod eigenmodes;
pub mod error;
pub mod estimation;
pub mod filters;
pub mod lsq;
pub mod montecarlo;
pub mod noise;
pub mod quadrature;
pub mod sequence;

pub use decay::{
    delta_m_sdr, restricted_asymptote, sdr_decay, sdr_scan, variance_exact, variance_quadrature, DecayResult, SdrDecay,
};
pub use error::{Error, Result};
pub use estimation::{fit_diameter, normalize_first_point, DecayCurve, FitOptions, FitResult};
pub use filters::{filter, sdr_filter_squared, SdrFilter};
pub use noise::{
    build_spectrum, correlation_time, restriction_length, AcquisitionParams, Geometry, GeometryKind, NoiseSpectrum,
    SpectrumMode, GAMMA_PROTON,
};
pub use sequence::{ModulationFunction, PulseSequence};
