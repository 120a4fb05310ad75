//! Pore-diameter estimation from an SDR scan `M(x)` at fixed `TE`, `N`, `G`.
//!
//! The model is `A · M_SDR(x; d, D0)` with the Gaussian-phase decay of the
//! chosen spectrum. Parameters are fitted in `(ln d, A [, ln D0])` by
//! multi-start damped least squares.

use crate::decay::variance_exact;
use crate::error::{Error, Result};
use crate::lsq::{minimize, LsqOptions, LsqOutcome};
use crate::noise::{build_spectrum, correlation_time, AcquisitionParams, Geometry, GeometryKind, SpectrumMode};
use crate::sequence::PulseSequence;

const MIN_POINTS: usize = 5;
const AMPLITUDE_MIN: f64 = 1e-6;
const AMPLITUDE_MAX: f64 = 2.0;
/// Fitted `D0` may move at most this factor away from the supplied value.
const D0_RANGE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    /// seconds, strictly increasing
    pub x_values: Vec<f64>,
    pub signal: Vec<f64>,
    /// seconds
    pub te: f64,
    pub n_pulses: usize,
    pub acq: AcquisitionParams,
}

impl DecayCurve {
    pub fn new(x_values: Vec<f64>, signal: Vec<f64>, te: f64, n_pulses: usize, acq: AcquisitionParams) -> Result<Self> {
        let curve = Self {
            x_values,
            signal,
            te,
            n_pulses,
            acq,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_values.len() != self.signal.len() {
            return Err(Error::InvalidParameter(format!(
                "{} x values but {} signal values",
                self.x_values.len(),
                self.signal.len()
            )));
        }
        if self.x_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("x values must be strictly increasing".into()));
        }
        if let Some(s) = self.signal.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "signal values must be positive, got {s}"
            )));
        }
        for &x in &self.x_values {
            PulseSequence::sdr(self.n_pulses, x, self.te)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_values.is_empty()
    }
}

/// Divides the signal by its first sample.
pub fn normalize_first_point(curve: &DecayCurve) -> Result<DecayCurve> {
    let first = curve.signal.first().copied().unwrap_or(0.0);
    if !(first > 0.0 && first.is_finite()) {
        return Err(Error::Normalization(first));
    }
    let mut out = curve.clone();
    out.signal.iter_mut().for_each(|s| *s /= first);
    out.signal[0] = 1.0;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub spectrum_mode: SpectrumMode,
    /// meters
    pub d_min: f64,
    /// meters
    pub d_max: f64,
    pub n_starts: usize,
    pub fit_d0: bool,
    pub lsq: LsqOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            spectrum_mode: SpectrumMode::Single,
            d_min: 0.1e-6,
            d_max: 100e-6,
            n_starts: 8,
            fit_d0: false,
            lsq: LsqOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    /// meters
    pub diameter: f64,
    pub amplitude: f64,
    /// m²/s
    pub d0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// meters
    pub diameter: f64,
    pub amplitude: f64,
    /// m²/s
    pub d0: f64,
    pub d0_fitted: bool,
    /// `sqrt(mean((model - data)²))`
    pub residual_rms: f64,
    pub iterations: usize,
    /// Gradient or step criterion met before the iteration cap.
    pub converged: bool,
    /// Variances of `(d [m²], A [, D0 [m⁴/s²]])`; empty when the Jacobian is singular.
    pub covariance_diag: Vec<f64>,
    /// Model evaluated at the curve's x values.
    pub model: Vec<f64>,
}

impl FitResult {
    pub fn params(&self) -> FitParams {
        FitParams {
            diameter: self.diameter,
            amplitude: self.amplitude,
            d0: self.d0,
        }
    }
}

/// `A · M_SDR(x)` at each `x`.
pub fn model_signal(
    x_values: &[f64],
    n_pulses: usize,
    te: f64,
    acq: &AcquisitionParams,
    kind: GeometryKind,
    mode: SpectrumMode,
    params: &FitParams,
) -> Result<Vec<f64>> {
    let geom = Geometry::new(kind, params.diameter, params.d0)?;
    let spec = build_spectrum(&geom, acq, mode)?;
    x_values
        .iter()
        .map(|&x| {
            let seq = PulseSequence::sdr(n_pulses, x, te)?;
            Ok(params.amplitude * variance_exact(&seq, &spec).magnetization)
        })
        .collect()
}

/// Pointwise `model - data`.
pub fn residuals(curve: &DecayCurve, kind: GeometryKind, mode: SpectrumMode, params: &FitParams) -> Result<Vec<f64>> {
    let model = model_signal(
        &curve.x_values,
        curve.n_pulses,
        curve.te,
        &curve.acq,
        kind,
        mode,
        params,
    )?;
    Ok(model.iter().zip(&curve.signal).map(|(m, s)| m - s).collect())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

struct Start {
    outcome: LsqOutcome,
}

/// Recovers the diameter (and amplitude, optionally `D0`) from an SDR scan.
///
/// Seeds are log-spaced over `[d_min, d_max]`; each is polished by damped
/// least squares and the lowest objective wins, ties going to the smaller `d`.
pub fn fit_diameter(curve: &DecayCurve, kind: GeometryKind, d0: f64, options: &FitOptions) -> Result<FitResult> {
    curve.validate()?;
    if !kind.is_restricted() {
        return Err(Error::InvalidParameter(
            "diameter fits need a restricted geometry".into(),
        ));
    }
    if !(d0.is_finite() && d0 > 0.0) {
        return Err(Error::InvalidParameter(format!("D0 must be positive, got {d0}")));
    }
    if !(options.d_min > 0.0 && options.d_max > options.d_min && options.n_starts >= 1) {
        return Err(Error::InvalidParameter(
            "need 0 < d_min < d_max and at least one start".into(),
        ));
    }
    if curve.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points, need at least {MIN_POINTS}",
            curve.len()
        )));
    }
    let seeds = log_grid(options.d_min, options.d_max, options.n_starts);
    let (x_lo, x_hi) = (curve.x_values[0], curve.x_values[curve.len() - 1]);
    let bracketed = seeds.iter().any(|&d| {
        Geometry::new(kind, d, d0)
            .and_then(|g| correlation_time(&g))
            .is_ok_and(|tau| x_lo < tau && tau < x_hi)
    });
    if !bracketed {
        return Err(Error::InsufficientData(format!(
            "x range [{x_lo:.3e}, {x_hi:.3e}] s does not straddle τ_c for any seed diameter"
        )));
    }

    let mode = options.spectrum_mode;
    let unpack = |p: &[f64]| FitParams {
        diameter: p[0].exp(),
        amplitude: p[1],
        d0: if options.fit_d0 { p[2].exp() } else { d0 },
    };
    let objective = |p: &[f64]| residuals(curve, kind, mode, &unpack(p)).ok();
    let mut lower = vec![options.d_min.ln(), AMPLITUDE_MIN];
    let mut upper = vec![options.d_max.ln(), AMPLITUDE_MAX];
    if options.fit_d0 {
        lower.push((d0 / D0_RANGE).ln());
        upper.push((d0 * D0_RANGE).ln());
    }

    let run = |&d: &f64| -> Option<Start> {
        let shape = model_signal(
            &curve.x_values[..1],
            curve.n_pulses,
            curve.te,
            &curve.acq,
            kind,
            mode,
            &FitParams {
                diameter: d,
                amplitude: 1.0,
                d0,
            },
        )
        .ok()?;
        let amplitude = (curve.signal[0] / shape[0]).clamp(AMPLITUDE_MIN, AMPLITUDE_MAX);
        let mut x0 = vec![d.ln(), amplitude];
        if options.fit_d0 {
            x0.push(d0.ln());
        }
        minimize(objective, &x0, &lower, &upper, &options.lsq).map(|outcome| Start { outcome })
    };

    #[cfg(feature = "parallel")]
    let starts: Vec<Option<Start>> = {
        use rayon::prelude::*;
        seeds.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let starts: Vec<Option<Start>> = seeds.iter().map(run).collect();

    let best = starts
        .into_iter()
        .flatten()
        .filter(|s| s.outcome.cost.is_finite())
        .min_by(|a, b| {
            a.outcome
                .cost
                .total_cmp(&b.outcome.cost)
                .then(a.outcome.params[0].total_cmp(&b.outcome.params[0]))
        })
        .ok_or_else(|| Error::NonConvergence(format!("none of {} starts could be evaluated", seeds.len())))?;

    let out = best.outcome;
    let params = unpack(&out.params);
    let model: Vec<f64> = out.residuals.iter().zip(&curve.signal).map(|(r, s)| r + s).collect();
    let residual_rms = (2.0 * out.cost / curve.len() as f64).sqrt();
    let covariance_diag = out
        .covariance_diagonal()
        .map(|v| {
            let mut c = vec![v[0] * params.diameter.powi(2), v[1]];
            if options.fit_d0 {
                c.push(v[2] * params.d0.powi(2));
            }
            c
        })
        .unwrap_or_default();
    Ok(FitResult {
        diameter: params.diameter,
        amplitude: params.amplitude,
        d0: params.d0,
        d0_fitted: options.fit_d0,
        residual_rms,
        iterations: out.iterations,
        converged: out.converged(),
        covariance_diag,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const D0: f64 = 2.3e-9;
    const TE: f64 = 0.08;
    const N: usize = 8;

    fn acq() -> AcquisitionParams {
        AcquisitionParams::proton(0.216).unwrap()
    }

    fn x_grid(n: usize) -> Vec<f64> {
        log_grid(0.1e-3, TE / N as f64, n)
    }

    fn synthetic(d: f64, amplitude: f64, n: usize, mode: SpectrumMode) -> DecayCurve {
        let xs = x_grid(n);
        let p = FitParams {
            diameter: d,
            amplitude,
            d0: D0,
        };
        let signal = model_signal(&xs, N, TE, &acq(), GeometryKind::Cylinder, mode, &p).unwrap();
        DecayCurve::new(xs, signal, TE, N, acq()).unwrap()
    }

    #[test]
    fn normalize_constant_and_scaled() {
        let c = DecayCurve::new(x_grid(5), vec![0.7; 5], TE, N, acq()).unwrap();
        assert_eq!(normalize_first_point(&c).unwrap().signal, vec![1.0; 5]);
        let a = synthetic(5e-6, 1.0, 10, SpectrumMode::Single);
        let mut b = a.clone();
        b.signal.iter_mut().for_each(|s| *s *= 0.5);
        let na = normalize_first_point(&a).unwrap();
        let nb = normalize_first_point(&b).unwrap();
        for (u, v) in na.signal.iter().zip(&nb.signal) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_bad_first_point() {
        let c = DecayCurve {
            x_values: vec![1e-3],
            signal: vec![0.0],
            te: TE,
            n_pulses: N,
            acq: acq(),
        };
        assert_eq!(normalize_first_point(&c), Err(Error::Normalization(0.0)));
    }

    #[test]
    fn curve_validation() {
        assert!(DecayCurve::new(vec![2e-3, 1e-3], vec![1.0, 1.0], TE, N, acq()).is_err());
        assert!(DecayCurve::new(vec![1e-3, 2e-3], vec![1.0], TE, N, acq()).is_err());
        assert!(DecayCurve::new(vec![1e-3, 0.02], vec![1.0, 0.9], TE, N, acq()).is_err());
        assert!(DecayCurve::new(vec![1e-3, 2e-3], vec![1.0, -0.1], TE, N, acq()).is_err());
    }

    #[test]
    fn perfect_data_has_zero_residuals() {
        let c = synthetic(5e-6, 0.9, 12, SpectrumMode::Single);
        let p = FitParams {
            diameter: 5e-6,
            amplitude: 0.9,
            d0: D0,
        };
        let r = residuals(&c, GeometryKind::Cylinder, SpectrumMode::Single, &p).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));
        // Amplitude mismatch alone: constant relative residual.
        let q = FitParams { amplitude: 0.45, ..p };
        let r = residuals(&c, GeometryKind::Cylinder, SpectrumMode::Single, &q).unwrap();
        for (ri, s) in r.iter().zip(&c.signal) {
            assert!((ri / s + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_round_trip() {
        for mode in [SpectrumMode::Single, SpectrumMode::Multi(4)] {
            let c = synthetic(5e-6, 1.0, 20, mode);
            let opts = FitOptions {
                spectrum_mode: mode,
                ..Default::default()
            };
            let fit = fit_diameter(&c, GeometryKind::Cylinder, D0, &opts).unwrap();
            assert!((fit.diameter / 5e-6 - 1.0).abs() < 0.01, "{mode}: {}", fit.diameter);
            assert!((fit.amplitude - 1.0).abs() < 0.01);
            assert!(fit.converged);
            assert!(fit.residual_rms < 1e-6);
        }
    }

    #[test]
    fn amplitude_absorbed() {
        let c = synthetic(5e-6, 0.83, 20, SpectrumMode::Single);
        let fit = fit_diameter(&c, GeometryKind::Cylinder, D0, &FitOptions::default()).unwrap();
        assert!((fit.diameter / 5e-6 - 1.0).abs() < 0.01);
        assert!((fit.amplitude - 0.83).abs() < 0.005);
        let normalized = normalize_first_point(&c).unwrap();
        let fit_n = fit_diameter(&normalized, GeometryKind::Cylinder, D0, &FitOptions::default()).unwrap();
        assert!((fit_n.diameter / fit.diameter - 1.0).abs() < 1e-4);
    }

    #[test]
    fn scale_invariance_after_normalization() {
        let c = synthetic(4e-6, 1.0, 15, SpectrumMode::Single);
        let mut s = c.clone();
        s.signal.iter_mut().for_each(|v| *v *= 0.37);
        let a = fit_diameter(
            &normalize_first_point(&c).unwrap(),
            GeometryKind::Cylinder,
            D0,
            &Default::default(),
        )
        .unwrap();
        let b = fit_diameter(
            &normalize_first_point(&s).unwrap(),
            GeometryKind::Cylinder,
            D0,
            &Default::default(),
        )
        .unwrap();
        assert!((a.diameter / b.diameter - 1.0).abs() < 1e-6);
        assert!((a.residual_rms - b.residual_rms).abs() < 1e-9);
    }

    #[test]
    fn noisy_median_within_five_percent() {
        let clean = synthetic(5e-6, 1.0, 20, SpectrumMode::Single);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut ds: Vec<f64> = (0..100)
            .map(|_| {
                let mut c = clean.clone();
                c.signal.iter_mut().for_each(|s| *s += noise.sample(&mut rng));
                let fit = fit_diameter(&c, GeometryKind::Cylinder, D0, &FitOptions::default()).unwrap();
                // Residuals should sit at the injected noise level.
                assert!(fit.residual_rms < 0.015, "rms {}", fit.residual_rms);
                fit.diameter
            })
            .collect();
        ds.sort_by(f64::total_cmp);
        let median = 0.5 * (ds[49] + ds[50]);
        assert!((median / 5e-6 - 1.0).abs() < 0.05, "median {median}");
    }

    #[test]
    fn joint_d0_fit_round_trip() {
        let c = synthetic(5e-6, 1.0, 25, SpectrumMode::Single);
        let opts = FitOptions {
            fit_d0: true,
            ..Default::default()
        };
        let fit = fit_diameter(&c, GeometryKind::Cylinder, 1.5e-9, &opts).unwrap();
        assert!(fit.d0_fitted);
        assert!(fit.residual_rms < 1e-5, "rms {}", fit.residual_rms);
        assert_eq!(fit.covariance_diag.len(), 3);
    }

    #[test]
    fn insufficient_data() {
        let c = synthetic(5e-6, 1.0, 4, SpectrumMode::Single);
        assert!(matches!(
            fit_diameter(&c, GeometryKind::Cylinder, D0, &Default::default()),
            Err(Error::InsufficientData(_))
        ));
        // All x far below every seed's τ_c.
        let xs: Vec<f64> = (1..=6).map(|i| i as f64 * 1e-9).collect();
        let c = DecayCurve::new(xs, vec![1.0; 6], TE, N, acq()).unwrap();
        let opts = FitOptions {
            d_min: 10e-6,
            ..Default::default()
        };
        assert!(matches!(
            fit_diameter(&c, GeometryKind::Cylinder, D0, &opts),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn free_geometry_rejected() {
        let c = synthetic(5e-6, 1.0, 10, SpectrumMode::Single);
        assert!(fit_diameter(&c, GeometryKind::Free, D0, &Default::default()).is_err());
    }
}
