//! Gaussian-phase decay of the echo signal, `M = exp(-½<φ²>)`.
//!
//! Two independent routes to the phase variance:
//!
//! * [`variance_exact`] integrates `½ ∫∫ f(t1) f(t2) g(|t1-t2|)` in closed
//!   form over every pair of constant-sign segments, one exponential
//!   component at a time;
//! * [`variance_quadrature`] integrates `Δω² ∫_0^∞ S(ω) |F(ω)|² dω`
//!   numerically with an analytic correction for the truncated tail.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::filters::FilterPower;
use crate::noise::NoiseSpectrum;
use crate::quadrature::integrate_panels;
use crate::sequence::{ModulationFunction, PulseSequence, Segment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayResult {
    /// `½<φ²>`
    pub variance_half: f64,
    pub magnetization: f64,
}

impl DecayResult {
    pub fn from_variance(variance_half: f64) -> Self {
        Self {
            variance_half,
            magnetization: (-variance_half).exp(),
        }
    }

    /// Applies a uniform `exp(-TE/T2)` weighting. Fits never see this factor.
    pub fn with_t2(self, total_time: f64, t2: f64) -> Self {
        Self::from_variance(self.variance_half + total_time / t2)
    }
}

/// `u - (1 - e^{-u})`, accurate for small `u`.
fn phi2(u: f64) -> f64 {
    if u < 1.0 {
        series_tail(u, 2)
    } else {
        u + (-u).exp_m1()
    }
}

/// `u - (1 - e^{-u}) - u²/2`, accurate for small `u`.
fn phi3(u: f64) -> f64 {
    if u < 1.0 {
        series_tail(u, 3)
    } else {
        u + (-u).exp_m1() - 0.5 * u * u
    }
}

/// `Σ_{n ≥ first} (-u)^n / n!`
fn series_tail(u: f64, first: u32) -> f64 {
    let mut term = 1.0;
    for n in 1..=first {
        term *= -u / n as f64;
    }
    let mut sum = term;
    let mut n = first;
    while term.abs() > 1e-18 * sum.abs() && n < 40 {
        n += 1;
        term *= -u / n as f64;
        sum += term;
    }
    sum
}

/// `Σ_{a∈A, b∈B} s_a s_b ∫_a ∫_b e^{-|t1-t2|/τ} dt1 dt2`.
///
/// With `same = true`, `B` is `A` itself; otherwise every segment of `A` ends
/// before every segment of `B` starts. For `τ` beyond the time span the
/// kernel is taken as `e^{-|t|/τ} - 1` and the constant part is added back
/// as a product of signed areas, which avoids cancellation in the free limit.
fn pair_sum(a: &[Segment], b: &[Segment], same: bool, tau: f64) -> f64 {
    let start = a
        .first()
        .map_or(0.0, |s| s.start)
        .min(b.first().map_or(0.0, |s| s.start));
    let end = a.last().map_or(0.0, |s| s.end).max(b.last().map_or(0.0, |s| s.end));
    let subtract = tau > end - start;

    let disjoint = |p: &Segment, q: &Segment| -> f64 {
        let gap = (q.start - p.end).max(0.0);
        let (lp, lq) = (p.len(), q.len());
        let (up, uq) = (lp / tau, lq / tau);
        let ap = -tau * (-up).exp_m1();
        let aq = -tau * (-uq).exp_m1();
        let v = if subtract {
            (-gap / tau).exp_m1() * ap * aq - tau * phi2(up) * aq - lp * tau * phi2(uq)
        } else {
            (-gap / tau).exp() * ap * aq
        };
        p.sign * q.sign * v
    };

    let mut total = 0.0;
    if same {
        for (i, p) in a.iter().enumerate() {
            let u = p.len() / tau;
            total += 2.0 * tau * tau * if subtract { phi3(u) } else { phi2(u) };
            for q in &a[i + 1..] {
                total += 2.0 * disjoint(p, q);
            }
        }
    } else {
        for p in a {
            for q in b {
                total += disjoint(p, q);
            }
        }
    }
    if subtract {
        let area_a: f64 = a.iter().map(|s| s.sign * s.len()).sum();
        let area_b: f64 = if same {
            area_a
        } else {
            b.iter().map(|s| s.sign * s.len()).sum()
        };
        total += area_a * area_b;
    }
    total
}

fn block_variance(spec: &NoiseSpectrum, a: &[Segment], b: &[Segment], same: bool) -> f64 {
    let weighted: f64 = spec
        .components()
        .iter()
        .map(|c| c.weight * pair_sum(a, b, same, c.tau))
        .sum();
    let factor = if same { 0.5 } else { 1.0 };
    factor * spec.delta_omega_sq() * weighted
}

pub fn variance_exact_modulation(f: &ModulationFunction, spec: &NoiseSpectrum) -> DecayResult {
    let segs: Vec<Segment> = f.segments().collect();
    DecayResult::from_variance(block_variance(spec, &segs, &segs, true))
}

/// Closed-form `½<φ²>` for a pulse train under a sum-of-exponentials correlation.
pub fn variance_exact(seq: &PulseSequence, spec: &NoiseSpectrum) -> DecayResult {
    variance_exact_modulation(&seq.modulation(), spec)
}

/// Relative accuracy requested from [`variance_quadrature`].
pub const QUADRATURE_RTOL: f64 = 1e-7;

/// `(1/π)∫_Ω^∞ τ / ((1 + ω²τ²) ω²) dω`.
fn lorentzian_tail_over_omega_sq(tau: f64, omega: f64) -> f64 {
    let z = 1.0 / (omega * tau);
    // 1 - atan(z)/z
    let bracket = if z < 1e-2 {
        let z2 = z * z;
        z2 * (1.0 / 3.0 - z2 * (1.0 / 5.0 - z2 * (1.0 / 7.0 - z2 / 9.0)))
    } else {
        1.0 - z.atan() / z
    };
    tau * bracket / (PI * omega)
}

/// `Δω² ∫_0^∞ S(ω) |F(ω)|² dω` for an arbitrary set of signed segments.
pub(crate) fn spectral_variance<I: IntoIterator<Item = Segment>>(segments: I, spec: &NoiseSpectrum) -> Result<f64> {
    if spec.delta_omega_sq() == 0.0 {
        return Ok(0.0);
    }
    let power = FilterPower::new(segments);
    let span = power.duration();
    if span <= 0.0 {
        return Ok(0.0);
    }
    let n_flips = power.jump_power().max(1.0);
    let omega_max = (100.0 / spec.tau_min()).max(100.0 * n_flips / span);
    let tau_max = spec.tau_max();
    // GK15 resolves about two periods of the slowest oscillation per panel.
    let h_max = 4.0 * PI / span;

    let mut breaks = vec![0.0];
    let mut w = 0.0;
    while w < omega_max {
        let h = h_max.min(0.5 * w.max(1.0 / tau_max));
        w = (w + h).min(omega_max);
        breaks.push(w);
    }
    let initial = breaks.len();
    let integrand = |w: f64| spec.s_of_omega(w) * power.eval(w);
    let body = integrate_panels(integrand, &breaks, QUADRATURE_RTOL, 0.0, initial + 200_000)?;
    let tail: f64 = spec
        .components()
        .iter()
        .map(|c| c.weight * lorentzian_tail_over_omega_sq(c.tau, omega_max))
        .sum::<f64>()
        * power.jump_power();
    Ok(spec.delta_omega_sq() * (body.value + tail))
}

/// `½<φ²>` from the filter-function overlap with the noise spectrum.
pub fn variance_quadrature(seq: &PulseSequence, spec: &NoiseSpectrum) -> Result<DecayResult> {
    spectral_variance(seq.modulation().segments(), spec).map(DecayResult::from_variance)
}

/// Long-time approximation `½<φ²> ≈ Σ_k Δω² c_k τ_k (TE - (1 + 2N) τ_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptote {
    pub result: DecayResult,
    /// `(1 + 2N) Δω² Σ c_k τ_k²`
    pub shift: f64,
    /// `false` when a delay is shorter than five correlation times.
    pub within_validity: bool,
}

pub fn restricted_asymptote(seq: &PulseSequence, spec: &NoiseSpectrum) -> Asymptote {
    let n = seq.n_pulses() as f64;
    let shift = (1.0 + 2.0 * n) * spec.shift_unit();
    let variance = spec.long_time_rate() * seq.total_time() - shift;
    let floor = 5.0 * spec.tau_max();
    let x_ok = seq.n_pulses() == 1 || seq.x_delay() >= floor;
    Asymptote {
        result: DecayResult::from_variance(variance),
        shift,
        within_validity: x_ok && seq.y_delay() >= floor,
    }
}

/// CPMG over Hahn signal excess at equal `TE`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaMSdr {
    /// `exp{2(N-1) Δω² Σ c_k τ_k²} - 1`
    pub closed_form: f64,
    /// `M_CPMG(TE, N) / M_Hahn(TE) - 1` from [`variance_exact`].
    pub numeric: f64,
    /// `ln(closed_form + 1)`
    pub log_ratio: f64,
}

pub fn delta_m_sdr(n_pulses: usize, spec: &NoiseSpectrum, total_time: f64) -> Result<DeltaMSdr> {
    let cpmg = PulseSequence::cpmg(n_pulses, total_time)?;
    let hahn = PulseSequence::hahn(total_time)?;
    let log_ratio = 2.0 * (n_pulses as f64 - 1.0) * spec.shift_unit();
    let v_cpmg = variance_exact(&cpmg, spec).variance_half;
    let v_hahn = variance_exact(&hahn, spec).variance_half;
    Ok(DeltaMSdr {
        closed_form: log_ratio.exp_m1(),
        numeric: (v_hahn - v_cpmg).exp_m1(),
        log_ratio,
    })
}

/// `(N-1) l_c⁶ γ²G² / (4 D0²)`, the single-Lorentzian log-ratio in terms of the restriction length.
pub fn log_ratio_from_length(n_pulses: usize, l_c: f64, gamma_g: f64, d0: f64) -> f64 {
    (n_pulses as f64 - 1.0) * l_c.powi(6) * gamma_g * gamma_g / (4.0 * d0 * d0)
}

/// Variance contributions of the CPMG block, the Hahn block and their interference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrDecay {
    pub cpmg_variance: f64,
    pub hahn_variance: f64,
    pub cross_variance: f64,
}

impl SdrDecay {
    pub fn total(&self) -> DecayResult {
        DecayResult::from_variance(self.cpmg_variance + self.hahn_variance + self.cross_variance)
    }

    /// `M_CPMG((N-1)x, N-1)`
    pub fn cpmg_factor(&self) -> f64 {
        (-self.cpmg_variance).exp()
    }

    /// `M_Hahn(y)`
    pub fn hahn_factor(&self) -> f64 {
        (-self.hahn_variance).exp()
    }

    /// `M_cross`; may exceed one when the blocks interfere constructively.
    pub fn cross_factor(&self) -> f64 {
        (-self.cross_variance).exp()
    }
}

/// `M_SDR = M_CPMG((N-1)x, N-1) · M_Hahn(y) · M_cross`, each factor in closed form.
pub fn sdr_decay(seq: &PulseSequence, spec: &NoiseSpectrum) -> Result<SdrDecay> {
    let d = seq.decompose()?;
    let cpmg: Vec<Segment> = d.cpmg.segments().collect();
    let hahn: Vec<Segment> = d.hahn_segments().collect();
    Ok(SdrDecay {
        cpmg_variance: block_variance(spec, &cpmg, &cpmg, true),
        hahn_variance: block_variance(spec, &hahn, &hahn, true),
        cross_variance: block_variance(spec, &cpmg, &hahn, false),
    })
}

/// The same three contributions, each from its own filter term by spectral quadrature.
pub fn sdr_decay_quadrature(seq: &PulseSequence, spec: &NoiseSpectrum) -> Result<SdrDecay> {
    let d = seq.decompose()?;
    let cpmg_variance = spectral_variance(d.cpmg.segments(), spec)?;
    let hahn_variance = spectral_variance(d.hahn.segments(), spec)?;
    let total = spectral_variance(seq.modulation().segments(), spec)?;
    // |F_c + F_h|² - |F_c|² - |F_h|² isolates the interference term.
    Ok(SdrDecay {
        cpmg_variance,
        hahn_variance,
        cross_variance: total - cpmg_variance - hahn_variance,
    })
}

/// `M_SDR(x)` at fixed `N` and `TE`; points are independent and order-stable.
pub fn sdr_scan(n_pulses: usize, total_time: f64, spec: &NoiseSpectrum, x_values: &[f64]) -> Result<Vec<DecayResult>> {
    let eval = |&x: &f64| -> Result<DecayResult> {
        let seq = PulseSequence::sdr(n_pulses, x, total_time)?;
        Ok(variance_exact(&seq, spec))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        x_values.par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        x_values.iter().map(eval).collect()
    }
}

/// Checks every x value against the timing constraints without evaluating anything.
pub fn validate_scan(n_pulses: usize, total_time: f64, x_values: &[f64]) -> Result<()> {
    for &x in x_values {
        PulseSequence::sdr(n_pulses, x, total_time)?;
    }
    if x_values.is_empty() {
        return Err(Error::InvalidParameter("empty x grid".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::LorentzianComponent;
    use proptest::prelude::*;

    fn hahn_closed_form(y: f64, tau: f64, dw2: f64) -> f64 {
        dw2 * tau * (y - tau * (3.0 + (-y / tau).exp() - 4.0 * (-y / (2.0 * tau)).exp()))
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn series_helpers() {
        for &u in &[1e-8f64, 1e-3, 0.3, 0.999, 1.0, 3.0] {
            let direct2 = u + (-u).exp_m1();
            let direct3 = direct2 - 0.5 * u * u;
            assert!(rel(phi2(u), direct2) < 1e-7, "{u}");
            if u > 1e-2 {
                assert!(rel(phi3(u), direct3) < 1e-6, "{u}");
            }
        }
        assert!(rel(phi3(1e-6), -1e-18 / 6.0) < 1e-5);
    }

    #[test]
    fn hahn_matches_closed_form() {
        let tau = 1e-3;
        let s = NoiseSpectrum::single(tau, 1.0).unwrap();
        let v = variance_exact(&PulseSequence::hahn(10.0 * tau).unwrap(), &s).variance_half;
        assert!((v / (tau * tau) - 7.0269).abs() < 1e-4, "{}", v / (tau * tau));
        for &y in &[1e-6, 1e-4, 1e-3, 0.05, 2.0] {
            let v = variance_exact(&PulseSequence::hahn(y).unwrap(), &s).variance_half;
            let c = hahn_closed_form(y, tau, 1.0);
            // The closed form itself cancels catastrophically for y << τ; compare only where it is sound.
            if y >= 1e-4 {
                assert!(rel(v, c) < 1e-8, "y={y}: {v} vs {c}");
            }
        }
    }

    #[test]
    fn zero_noise_gives_unit_signal() {
        let s = NoiseSpectrum::single(1e-3, 0.0).unwrap();
        let r = variance_exact(&PulseSequence::sdr(8, 1e-3, 0.08).unwrap(), &s);
        assert_eq!(r.variance_half, 0.0);
        assert_eq!(r.magnetization, 1.0);
        assert_eq!(
            variance_quadrature(&PulseSequence::hahn(0.08).unwrap(), &s)
                .unwrap()
                .magnetization,
            1.0
        );
    }

    #[test]
    fn free_limit_hahn() {
        // Δω² = γ²G²D0τ_c; take γ²G²D0 = 1.
        let y = 1e-3;
        let tau = 100.0 * y;
        let s = NoiseSpectrum::single(tau, tau).unwrap();
        let v = variance_exact(&PulseSequence::hahn(y).unwrap(), &s).variance_half;
        let free = y.powi(3) / 12.0;
        assert!(rel(v, free) < 0.01, "{v} vs {free}");
    }

    #[test]
    fn exact_matches_quadrature_examples() {
        let cases = [
            (1usize, 1.0, 0.1),
            (2, 0.5, 1.0),
            (8, 1.0, 0.01),
            (8, 0.1, 3.0),
            (16, 0.3, 1e-3),
            (32, 0.9, 10.0),
        ];
        for (n, frac, tau_over_te) in cases {
            let te = 0.08;
            let seq = PulseSequence::sdr(n, frac * te / n as f64, te).unwrap();
            let s = NoiseSpectrum::single(tau_over_te * te, 1.0 / (tau_over_te * te).powi(2)).unwrap();
            let a = variance_exact(&seq, &s).variance_half;
            let b = variance_quadrature(&seq, &s).unwrap().variance_half;
            assert!(rel(a, b) < 1e-6, "N={n} frac={frac} τ/TE={tau_over_te}: {a} vs {b}");
        }
    }

    #[test]
    fn spectrum_linearity() {
        let seq = PulseSequence::sdr(5, 0.004, 0.05).unwrap();
        let tau = 2e-3;
        let two = NoiseSpectrum::new(
            vec![
                LorentzianComponent { weight: 0.5, tau },
                LorentzianComponent { weight: 0.5, tau },
            ],
            3.0,
        )
        .unwrap();
        let one = NoiseSpectrum::single(tau, 1.5).unwrap();
        let a = variance_quadrature(&seq, &two).unwrap().variance_half;
        let b = variance_quadrature(&seq, &one).unwrap().variance_half;
        assert!(rel(a, 2.0 * b) < 1e-9);
        assert!(
            rel(
                variance_exact(&seq, &two).variance_half,
                2.0 * variance_exact(&seq, &one).variance_half
            ) < 1e-12
        );
    }

    #[test]
    fn asymptote_examples() {
        let tau = 1e-3;
        let s = NoiseSpectrum::single(tau, 1.0).unwrap();
        let hahn = PulseSequence::hahn(10.0 * tau).unwrap();
        let a = restricted_asymptote(&hahn, &s);
        assert!(rel(a.result.variance_half, 7.0 * tau * tau) < 1e-12);
        let exact = variance_exact(&hahn, &s).variance_half;
        assert!(rel(a.result.variance_half, exact) < 0.005);
        assert!(a.within_validity);

        let cpmg = PulseSequence::cpmg(8, 100.0 * tau).unwrap();
        let a = restricted_asymptote(&cpmg, &s);
        assert!(rel(a.result.variance_half, 83.0 * tau * tau) < 1e-12);
        assert!(rel(a.shift, 17.0 * tau * tau) < 1e-12);

        let short = PulseSequence::sdr(8, 2.0 * tau, 100.0 * tau).unwrap();
        assert!(!restricted_asymptote(&short, &s).within_validity);
    }

    #[test]
    fn asymptote_converges_monotonically() {
        let tau = 1e-3;
        let s = NoiseSpectrum::single(tau, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for k in [10.0, 20.0, 40.0, 80.0, 160.0] {
            let seq = PulseSequence::cpmg(4, k * tau).unwrap();
            let gap =
                (variance_exact(&seq, &s).variance_half - restricted_asymptote(&seq, &s).result.variance_half).abs();
            assert!(gap < last, "TE/τ={k}");
            last = gap;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn delta_m_identity() {
        let tau = 7.35e-4;
        let s = NoiseSpectrum::single(tau, 0.0427 / 14.0 / (tau * tau)).unwrap();
        let d = delta_m_sdr(8, &s, 200.0 * tau).unwrap();
        assert!((d.log_ratio - 0.0427).abs() < 1e-9);
        assert!((d.closed_form - 0.0436).abs() < 5e-4);
        assert!(rel(d.numeric, d.closed_form) < 0.1);
        assert_eq!(delta_m_sdr(1, &s, 200.0 * tau).unwrap().closed_form, 0.0);
        assert!(delta_m_sdr(1, &s, 200.0 * tau).unwrap().numeric.abs() < 1e-15);
        let s4 = s.with_delta_omega_sq(4.0 * s.delta_omega_sq()).unwrap();
        let d4 = delta_m_sdr(8, &s4, 200.0 * tau).unwrap();
        assert!(rel(d4.log_ratio, 4.0 * d.log_ratio) < 1e-12);
    }

    #[test]
    fn log_ratio_from_length_matches_spectrum() {
        let (d0, gg, tau) = (2.3e-9, 5.78e7, 7.35e-4);
        let s = NoiseSpectrum::single(tau, gg * gg * d0 * tau).unwrap();
        let lc = crate::noise::restriction_length(tau, d0);
        let a = log_ratio_from_length(8, lc, gg, d0);
        let b = 2.0 * 7.0 * s.shift_unit();
        assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn sdr_factors_cpmg_consistency() {
        let te = 0.08;
        let s = NoiseSpectrum::single(7.35e-4, 5.6e3).unwrap();
        let seq = PulseSequence::cpmg(8, te).unwrap();
        let parts = sdr_decay(&seq, &s).unwrap();
        let exact = variance_exact(&seq, &s);
        assert!(rel(parts.total().variance_half, exact.variance_half) < 1e-12);
        assert!(
            rel(
                parts.cpmg_factor() * parts.hahn_factor() * parts.cross_factor(),
                exact.magnetization
            ) < 1e-12
        );
    }

    #[test]
    fn sdr_factors_fig3() {
        let te = 0.08;
        let s = NoiseSpectrum::single(7.35e-4, 5.6e3).unwrap();
        let seq = PulseSequence::sdr(8, te / 16.0, te).unwrap();
        let parts = sdr_decay(&seq, &s).unwrap();
        let exact = variance_exact(&seq, &s);
        assert!(rel(parts.total().variance_half, exact.variance_half) < 1e-6);
        let q = sdr_decay_quadrature(&seq, &s).unwrap();
        assert!(rel(q.cpmg_variance, parts.cpmg_variance) < 1e-6);
        assert!(rel(q.hahn_variance, parts.hahn_variance) < 1e-6);
        assert!((q.cross_variance - parts.cross_variance).abs() < 1e-6 * exact.variance_half);
    }

    #[test]
    fn cross_factor_vanishes_for_short_correlation() {
        let te = 0.08;
        let seq = PulseSequence::sdr(4, te / 10.0, te).unwrap();
        let rate = 3.0; // Δω² τ_c held fixed
        let tau = te / 1e4;
        let s = NoiseSpectrum::single(tau, rate / tau).unwrap();
        let parts = sdr_decay(&seq, &s).unwrap();
        assert!((parts.cross_factor() - 1.0).abs() < 1e-3, "{}", parts.cross_factor());
        assert!(sdr_decay(&PulseSequence::hahn(te).unwrap(), &s).is_err());
    }

    #[test]
    fn scan_endpoints_and_flat_curve() {
        let te = 0.08;
        let n = 8;
        let s = NoiseSpectrum::single(7.35e-4, 5.6e3).unwrap();
        let xs = [1e-7, 1e-3, 5e-3, te / n as f64];
        let curve = sdr_scan(n, te, &s, &xs).unwrap();
        let cpmg = variance_exact(&PulseSequence::cpmg(n, te).unwrap(), &s);
        assert!(rel(curve[3].magnetization, cpmg.magnetization) < 1e-12);
        let hahn = variance_exact(&PulseSequence::hahn(te).unwrap(), &s);
        assert!(rel(curve[0].magnetization, hahn.magnetization) < 1e-3);
        assert!(curve[0].magnetization < curve[2].magnetization);

        let flat = sdr_scan(n, te, &s.with_delta_omega_sq(0.0).unwrap(), &xs).unwrap();
        assert!(flat.iter().all(|r| r.magnetization == 1.0));
        assert!(matches!(sdr_scan(n, te, &s, &[0.02]), Err(Error::Timing(_))));
    }

    #[test]
    fn t2_weighting() {
        let r = DecayResult::from_variance(0.2).with_t2(0.08, 0.5);
        assert!(rel(r.magnetization, (-0.2f64).exp() * (-0.16f64).exp()) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn monotone_in_total_time(n in 1usize..=16, frac in 0.05f64..=1.0, tau_ms in 0.01f64..100.0, te_ms in 1.0f64..100.0) {
            let s = NoiseSpectrum::single(tau_ms * 1e-3, 1.0).unwrap();
            let a = PulseSequence::sdr(n, frac * te_ms * 1e-3 / n as f64, te_ms * 1e-3).unwrap();
            let b = PulseSequence::sdr(n, frac * 1.1 * te_ms * 1e-3 / n as f64, 1.1 * te_ms * 1e-3).unwrap();
            let ma = variance_exact(&a, &s).magnetization;
            let mb = variance_exact(&b, &s).magnetization;
            prop_assert!(mb <= ma * (1.0 + 1e-12));
            prop_assert!(ma > 0.0 && ma <= 1.0);
        }

        #[test]
        fn three_factor_sum(n in 2usize..=32, frac in 0.01f64..=1.0, log_tau in -4.0f64..1.0) {
            let te = 0.05;
            let s = NoiseSpectrum::single(te * 10f64.powf(log_tau), 1.0).unwrap();
            let seq = PulseSequence::sdr(n, frac * te / n as f64, te).unwrap();
            let parts = sdr_decay(&seq, &s).unwrap();
            let exact = variance_exact(&seq, &s).variance_half;
            prop_assert!(rel(parts.total().variance_half, exact) < 1e-6);
        }
    }
}
