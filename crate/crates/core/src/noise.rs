//! Diffusion-driven frequency noise: restriction geometry, correlation
//! times, the autocorrelation `g(τ)` and the Lorentzian spectral density `S(ω)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::eigenmodes;
use crate::error::{Error, Result};

/// ¹H gyromagnetic ratio in rad/(s·T).
pub const GAMMA_PROTON: f64 = 2.675221e8;

/// `τ_c d⁻² D0` for cylinders.
pub const CYLINDER_TAU_COEFF: f64 = 0.26 * 0.26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    Free,
    Slab,
    Cylinder,
    Sphere,
}

impl GeometryKind {
    pub fn is_restricted(self) -> bool {
        self != GeometryKind::Free
    }

    /// Number of spatial dimensions the walker explores.
    pub fn dimension(self) -> usize {
        match self {
            GeometryKind::Free | GeometryKind::Slab => 1,
            GeometryKind::Cylinder => 2,
            GeometryKind::Sphere => 3,
        }
    }

    /// `τ_c D0 / d²`.
    ///
    /// Cylinders use the 0.26² rule. Slabs and spheres use the same convention
    /// that rule encodes: `Δω² τ_c = γ²G² D0 τ_c²` reproduces the exact
    /// long-time decay rate `γ²G² ∫<x(0)x(t)>dt`, i.e. `τ_c² = ∫<x x(t)>dt / D0`.
    pub fn tau_coefficient(self) -> Option<f64> {
        match self {
            GeometryKind::Free => None,
            GeometryKind::Cylinder => Some(CYLINDER_TAU_COEFF),
            kind => Some(eigenmodes::correlation_integral(kind).sqrt()),
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GeometryKind::Free => "free",
            GeometryKind::Slab => "slab",
            GeometryKind::Cylinder => "cylinder",
            GeometryKind::Sphere => "sphere",
        };
        f.write_str(s)
    }
}

impl FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "free" => Ok(GeometryKind::Free),
            "slab" => Ok(GeometryKind::Slab),
            "cylinder" => Ok(GeometryKind::Cylinder),
            "sphere" => Ok(GeometryKind::Sphere),
            other => Err(Error::InvalidParameter(format!("unknown geometry kind {other:?}"))),
        }
    }
}

/// Restricting domain plus the free diffusion coefficient.
///
/// Slabs have width `d`, cylinders and spheres diameter `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub kind: GeometryKind,
    /// meters
    pub size_d: f64,
    /// m²/s
    pub d0: f64,
}

impl Geometry {
    pub fn new(kind: GeometryKind, size_d: f64, d0: f64) -> Result<Self> {
        let g = Geometry { kind, size_d, d0 };
        g.validate()?;
        Ok(g)
    }

    pub fn free(d0: f64) -> Result<Self> {
        Self::new(GeometryKind::Free, 0.0, d0)
    }

    pub fn cylinder(diameter: f64, d0: f64) -> Result<Self> {
        Self::new(GeometryKind::Cylinder, diameter, d0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(Error::InvalidParameter(format!("D0 must be positive, got {}", self.d0)));
        }
        if self.kind.is_restricted() && !(self.size_d.is_finite() && self.size_d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "restriction size must be positive, got {}",
                self.size_d
            )));
        }
        Ok(())
    }

    /// Variance of the gradient-axis coordinate under the uniform distribution.
    pub fn coordinate_variance(&self) -> Option<f64> {
        self.kind
            .is_restricted()
            .then(|| eigenmodes::coordinate_variance(self.kind) * self.size_d * self.size_d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionParams {
    /// rad/(s·T)
    pub gamma: f64,
    /// T/m
    pub gradient: f64,
}

impl AcquisitionParams {
    pub fn new(gamma: f64, gradient: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        if !(gradient.is_finite() && gradient >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gradient must be non-negative, got {gradient}"
            )));
        }
        Ok(Self { gamma, gradient })
    }

    pub fn proton(gradient: f64) -> Result<Self> {
        Self::new(GAMMA_PROTON, gradient)
    }

    /// `γ G`, in rad/(s·m).
    pub fn gamma_g(&self) -> f64 {
        self.gamma * self.gradient
    }
}

/// Correlation time of the gradient-axis motion.
pub fn correlation_time(geom: &Geometry) -> Result<f64> {
    let coeff = geom.kind.tau_coefficient().ok_or(Error::NoCorrelationTime)?;
    Ok(coeff * geom.size_d * geom.size_d / geom.d0)
}

/// `l_c = sqrt(2 D0 τ_c)`.
pub fn restriction_length(tau_c: f64, d0: f64) -> f64 {
    (2.0 * d0 * tau_c).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumMode {
    /// One Lorentzian with `τ_c` from [`correlation_time`] and `Δω² = γ²G²D0τ_c`.
    #[default]
    Single,
    /// `K` Lorentzians from the geometry's eigenmode expansion, `Δω² = γ²G² Var(x)`.
    Multi(usize),
}

impl fmt::Display for SpectrumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumMode::Single => f.write_str("single"),
            SpectrumMode::Multi(k) => write!(f, "multi:{k}"),
        }
    }
}

impl FromStr for SpectrumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "single" {
            return Ok(SpectrumMode::Single);
        }
        let k = s
            .strip_prefix("multi:")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .ok_or_else(|| Error::InvalidParameter(format!("spectrum mode must be single or multi:<K>, got {s:?}")))?;
        Ok(SpectrumMode::Multi(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianComponent {
    pub weight: f64,
    /// seconds
    pub tau: f64,
}

/// `Δω² S(ω)` with `S = Σ c_k τ_k / (π (1 + ω² τ_k²))`; every component has unit area.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    components: Vec<LorentzianComponent>,
    delta_omega_sq: f64,
}

impl NoiseSpectrum {
    pub fn new(components: Vec<LorentzianComponent>, delta_omega_sq: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("spectrum needs at least one component".into()));
        }
        if components
            .iter()
            .any(|c| !(c.weight > 0.0 && c.tau > 0.0 && c.tau.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "weights and correlation times must be positive".into(),
            ));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, expected 1")));
        }
        if !(delta_omega_sq.is_finite() && delta_omega_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Δω² must be non-negative, got {delta_omega_sq}"
            )));
        }
        Ok(Self {
            components,
            delta_omega_sq,
        })
    }

    pub fn single(tau_c: f64, delta_omega_sq: f64) -> Result<Self> {
        Self::new(
            vec![LorentzianComponent {
                weight: 1.0,
                tau: tau_c,
            }],
            delta_omega_sq,
        )
    }

    pub fn components(&self) -> &[LorentzianComponent] {
        &self.components
    }

    pub fn delta_omega_sq(&self) -> f64 {
        self.delta_omega_sq
    }

    pub fn tau_min(&self) -> f64 {
        self.components.iter().map(|c| c.tau).fold(f64::INFINITY, f64::min)
    }

    pub fn tau_max(&self) -> f64 {
        self.components.iter().map(|c| c.tau).fold(0.0, f64::max)
    }

    /// `g(τ) = Δω² Σ c_k exp(-|τ|/τ_k)`.
    pub fn g_of_tau(&self, tau: f64) -> f64 {
        let tau = tau.abs();
        self.delta_omega_sq
            * self
                .components
                .iter()
                .map(|c| c.weight * (-tau / c.tau).exp())
                .sum::<f64>()
    }

    /// Unit-area spectral density `S(ω)`.
    pub fn s_of_omega(&self, omega: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.tau / (PI * (1.0 + (omega * c.tau).powi(2))))
            .sum()
    }

    /// `∫_0^∞ g dτ = Δω² Σ c_k τ_k`, the long-time decay rate of any refocused train.
    pub fn long_time_rate(&self) -> f64 {
        self.delta_omega_sq * self.components.iter().map(|c| c.weight * c.tau).sum::<f64>()
    }

    /// `Δω² Σ c_k τ_k²`; one unit of the N-dependent intercept shift.
    pub fn shift_unit(&self) -> f64 {
        self.delta_omega_sq * self.components.iter().map(|c| c.weight * c.tau * c.tau).sum::<f64>()
    }

    pub fn with_delta_omega_sq(&self, delta_omega_sq: f64) -> Result<Self> {
        Self::new(self.components.clone(), delta_omega_sq)
    }
}

pub fn build_spectrum(geom: &Geometry, acq: &AcquisitionParams, mode: SpectrumMode) -> Result<NoiseSpectrum> {
    geom.validate()?;
    if !geom.kind.is_restricted() {
        return Err(Error::NoSpectrum);
    }
    let gg2 = acq.gamma_g().powi(2);
    match mode {
        SpectrumMode::Single => {
            let tau_c = correlation_time(geom)?;
            NoiseSpectrum::single(tau_c, gg2 * geom.d0 * tau_c)
        }
        SpectrumMode::Multi(k) => {
            if k == 0 {
                return Err(Error::InvalidParameter("multi-Lorentzian mode needs K >= 1".into()));
            }
            let scale = geom.size_d * geom.size_d / geom.d0;
            let components = eigenmodes::truncated_modes(geom.kind, k)
                .into_iter()
                .map(|m| LorentzianComponent {
                    weight: m.weight,
                    tau: m.time * scale,
                })
                .collect();
            let var = geom.coordinate_variance().expect("restricted geometry");
            NoiseSpectrum::new(components, gg2 * var)
        }
    }
}
