//! Filter functions `F(ω) = ∫ f(t) e^{-iωt} dt`, evaluated exactly segment by segment.

use num_complex::Complex64;

use crate::error::Result;
use crate::sequence::{ModulationFunction, PulseSequence, Segment};

/// `sin(z)/z`, continuous at zero.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Transform of one constant segment: `s L sinc(ωL/2) e^{-iω t_mid}`.
fn segment_transform(seg: &Segment, omega: f64) -> Complex64 {
    let len = seg.len();
    let mid = 0.5 * (seg.start + seg.end);
    Complex64::from_polar(seg.sign * len * sinc(0.5 * omega * len), -omega * mid)
}

pub fn filter_segments<I: IntoIterator<Item = Segment>>(segments: I, omega: f64) -> Complex64 {
    segments.into_iter().map(|s| segment_transform(&s, omega)).sum()
}

/// `F(ω)` in seconds. At `ω = 0` this is the signed area.
pub fn filter(f: &ModulationFunction, omega: f64) -> Complex64 {
    filter_segments(f.segments(), omega)
}

pub fn filter_squared(f: &ModulationFunction, omega: f64) -> f64 {
    filter(f, omega).norm_sqr()
}

/// The three pieces of `|F_SDR|²`: CPMG block, Hahn block and their interference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrFilter {
    pub cpmg: f64,
    pub hahn: f64,
    pub cross: f64,
}

impl SdrFilter {
    pub fn total(&self) -> f64 {
        self.cpmg + self.hahn + self.cross
    }
}

/// `|F_CPMG(ω,(N-1)x)|² + |F_Hahn(ω,y)|² + (-1)^(N-1) 2 Re{e^{iω(TE-y)} F_CPMG conj(F_Hahn)}`.
pub fn sdr_filter_squared(seq: &PulseSequence, omega: f64) -> Result<SdrFilter> {
    let d = seq.decompose()?;
    let fc = filter(&d.cpmg, omega);
    let fh = filter(&d.hahn, omega);
    let phase = Complex64::from_polar(1.0, omega * d.offset);
    Ok(SdrFilter {
        cpmg: fc.norm_sqr(),
        hahn: fh.norm_sqr(),
        cross: d.parity * 2.0 * (phase * fc * fh.conj()).re,
    })
}

/// `|F(ω)|²` from the jump representation `F = Σ_j c_j e^{-iω b_j} / (iω)`.
///
/// One `sin_cos` per boundary instead of one per segment edge pair; used as
/// the inner loop of spectral quadrature. Falls back to the segment form
/// where the jump sum would cancel.
#[derive(Debug, Clone)]
pub(crate) struct FilterPower {
    segments: Vec<Segment>,
    edges: Vec<(f64, f64)>,
    duration: f64,
}

impl FilterPower {
    pub(crate) fn new<I: IntoIterator<Item = Segment>>(segments: I) -> Self {
        let segments: Vec<Segment> = segments.into_iter().filter(|s| !s.is_empty()).collect();
        let mut edges: Vec<(f64, f64)> = Vec::with_capacity(2 * segments.len());
        for s in &segments {
            edges.push((s.start, s.sign));
            edges.push((s.end, -s.sign));
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(edges.len());
        for (t, c) in edges {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += c,
                _ => merged.push((t, c)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        let duration = segments.iter().map(|s| s.end).fold(0.0, f64::max)
            - segments.iter().map(|s| s.start).fold(f64::INFINITY, f64::min);
        Self {
            segments,
            edges: merged,
            duration,
        }
    }

    pub(crate) fn eval(&self, omega: f64) -> f64 {
        if (omega * self.duration).abs() < 0.05 {
            return filter_segments(self.segments.iter().copied(), omega).norm_sqr();
        }
        let (mut re, mut im) = (0.0, 0.0);
        for &(t, c) in &self.edges {
            let (s, co) = (omega * t).sin_cos();
            re += c * co;
            im -= c * s;
        }
        (re * re + im * im) / (omega * omega)
    }

    /// `Σ c_j²`: the mean of `ω²|F(ω)|²` at high frequency.
    pub(crate) fn jump_power(&self) -> f64 {
        self.edges.iter().map(|e| e.1 * e.1).sum()
    }

    pub(crate) fn duration(&self) -> f64 {
        self.duration
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_panels;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Direct Riemann-free oracle: the transform of each segment by explicit exponentials.
    fn filter_by_exponentials(f: &ModulationFunction, omega: f64) -> Complex64 {
        let i = Complex64::i();
        f.segments()
            .map(|s| s.sign * ((-i * omega * s.start).exp() - (-i * omega * s.end).exp()) / (i * omega))
            .sum()
    }

    /// `1e-10` relative, except near zeros of `|F|²`, where round-off in the
    /// amplitudes (`~ε·TE`) and cancellation between the three terms dominate.
    fn three_term_tolerance(parts: &SdrFilter, direct: f64, te: f64) -> f64 {
        1e-10 * direct.max(parts.cpmg + parts.hahn) + 1e-13 * te * direct.sqrt() + 1e-30
    }

    #[test]
    fn hahn_closed_form() {
        let y = 0.04;
        let f = PulseSequence::hahn(y).unwrap().modulation();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let w: f64 = rng.random_range(0.1..5000.0);
            let expected = 16.0 / (w * w) * (w * y / 4.0).sin().powi(4);
            assert!((filter_squared(&f, w) - expected).abs() <= 1e-12 * expected.max(1e-12));
        }
    }

    #[test]
    fn matches_explicit_exponentials() {
        let f = PulseSequence::sdr(5, 0.003, 0.05).unwrap().modulation();
        for &w in &[1.0, 37.0, 1234.5, 98765.0] {
            let a = filter(&f, w);
            let b = filter_by_exponentials(&f, w);
            assert!((a - b).norm() < 1e-12 * b.norm().max(1e-6));
        }
    }

    #[test]
    fn zero_frequency_is_signed_area() {
        let f = PulseSequence::sdr(7, 0.01, 0.1).unwrap().modulation();
        assert!(filter(&f, 0.0).norm() < 1e-15);
        assert!(filter_squared(&f, 1e-12) < 1e-20);
    }

    #[test]
    fn hermitian_symmetry() {
        let f = PulseSequence::sdr(4, 0.02, 0.1).unwrap().modulation();
        for &w in &[3.0, 300.0, 3e4] {
            assert!((filter(&f, -w) - filter(&f, w).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn cpmg_decomposition_equals_direct() {
        let te = 0.08;
        let seq = PulseSequence::cpmg(8, te).unwrap();
        let f = seq.modulation();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let w: f64 = rng.random_range(0.0..20_000.0);
            let parts = sdr_filter_squared(&seq, w).unwrap();
            let direct = filter_squared(&f, w);
            assert!(
                (parts.total() - direct).abs() <= three_term_tolerance(&parts, direct, te),
                "{w}: {} vs {direct}",
                parts.total()
            );
        }
    }

    #[test]
    fn zero_frequency_terms_vanish() {
        let seq = PulseSequence::sdr(6, 0.004, 0.05).unwrap();
        let parts = sdr_filter_squared(&seq, 0.0).unwrap();
        assert!(parts.cpmg.abs() < 1e-30 && parts.hahn.abs() < 1e-30 && parts.cross.abs() < 1e-30);
    }

    #[test]
    fn cross_vanishes_at_hahn_zero() {
        // |F_Hahn(ω, y)| = 0 where sin(ωy/4) = 0.
        let seq = PulseSequence::sdr(3, 0.01, 0.1).unwrap();
        let y = seq.y_delay();
        let w = 4.0 * PI / y;
        let parts = sdr_filter_squared(&seq, w).unwrap();
        assert!(parts.hahn < 1e-25);
        assert!(parts.cross.abs() < 1e-12 * parts.cpmg.max(1e-12));
    }

    #[test]
    fn hahn_sequence_has_no_sdr_split() {
        let seq = PulseSequence::hahn(0.1).unwrap();
        assert!(sdr_filter_squared(&seq, 1.0).is_err());
    }

    #[test]
    fn cpmg_peak_near_pi_over_tau() {
        for n in [4usize, 8, 16, 32] {
            let te = 0.08;
            let tau = te / n as f64;
            let f = PulseSequence::cpmg(n, te).unwrap().modulation();
            let w_hi = 4.0 * PI / tau;
            let (best, _) = (1..=40_000)
                .map(|k| w_hi * k as f64 / 40_000.0)
                .map(|w| (w, filter_squared(&f, w)))
                .fold((0.0, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
            assert!((best / (PI / tau) - 1.0).abs() < 0.1, "N={n}: peak at {best}");
        }
    }

    fn parseval_ratio(seq: &PulseSequence) -> f64 {
        let te = seq.total_time();
        let power = FilterPower::new(seq.modulation().segments());
        let omega_max = 2e4 * seq.n_pulses() as f64 / te;
        let step = PI / te;
        let panels = (omega_max / step).ceil() as usize;
        let breaks: Vec<f64> = (0..=panels).map(|k| k as f64 * omega_max / panels as f64).collect();
        let body = integrate_panels(|w| power.eval(w), &breaks, 1e-9, 0.0, 10 * panels)
            .unwrap()
            .value;
        // Tail: |F|² averages Σc_j² / ω² beyond the last panel.
        let tail = power.jump_power() / omega_max;
        (body + tail) / PI / te
    }

    #[test]
    fn parseval_fixed_cases() {
        for (n, frac) in [(1, 1.0), (2, 0.5), (8, 1.0), (8, 0.2), (16, 0.05)] {
            let seq = PulseSequence::sdr(n, frac * 0.08 / n as f64, 0.08).unwrap();
            let r = parseval_ratio(&seq);
            assert!((r - 1.0).abs() < 1e-4, "N={n}: {r}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn three_term_sum_matches_direct(n in 2usize..=32, frac in 0.01f64..=1.0, wt in 0.0f64..200.0) {
            let te = 0.05;
            let seq = PulseSequence::sdr(n, frac * te / n as f64, te).unwrap();
            let w = wt / te;
            let parts = sdr_filter_squared(&seq, w).unwrap();
            let direct = filter_squared(&seq.modulation(), w);
            prop_assert!((parts.total() - direct).abs() <= three_term_tolerance(&parts, direct, te));
        }

        #[test]
        fn power_evaluator_matches_filter(n in 1usize..=32, frac in 0.01f64..=1.0, wt in 0.0f64..500.0) {
            let te = 0.05;
            let seq = PulseSequence::sdr(n, frac * te / n as f64, te).unwrap();
            let f = seq.modulation();
            let p = FilterPower::new(f.segments());
            let w = wt / te;
            let a = p.eval(w);
            let b = filter_squared(&f, w);
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1e-10 * te * te));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn parseval_random(n in 1usize..=16, frac in 0.05f64..=1.0) {
            let seq = PulseSequence::sdr(n, frac * 0.01 / n as f64, 0.01).unwrap();
            prop_assert!((parseval_ratio(&seq) - 1.0).abs() < 1e-4);
        }
    }
}
