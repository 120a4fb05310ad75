//! Pulse timing for selective dynamical recoupling (SDR) trains.
//!
//! An SDR train of `N` ideal π pulses over a fixed total time `TE` starts with
//! a CPMG block of `N - 1` pulses spaced by `x` (first pulse at `x/2`) and ends
//! with a Hahn block of length `y`, whose single pulse sits at `TE - y/2`.
//! The delays satisfy `TE = y + (N - 1) x`. `x = y = TE/N` is plain CPMG and
//! `N = 1` is the Hahn echo.

use crate::error::{Error, Result};

const TIMING_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSequence {
    n_pulses: usize,
    x_delay: f64,
    y_delay: f64,
    total_time: f64,
}

impl PulseSequence {
    /// Builds an SDR train; `y` follows from `TE = y + (N - 1) x`.
    ///
    /// For `n_pulses == 1` the `x_delay` argument is ignored and the result is
    /// a Hahn echo with `y = TE` (stored with `x_delay = 0`).
    pub fn sdr(n_pulses: usize, x_delay: f64, total_time: f64) -> Result<Self> {
        if n_pulses == 0 {
            return Err(Error::Timing("at least one pulse is required".into()));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::Timing(format!("total time must be positive, got {total_time}")));
        }
        if n_pulses == 1 {
            return Ok(Self {
                n_pulses,
                x_delay: 0.0,
                y_delay: total_time,
                total_time,
            });
        }
        if !(x_delay.is_finite() && x_delay > 0.0) {
            return Err(Error::Timing(format!("x delay must be positive, got {x_delay}")));
        }
        let x_max = total_time / n_pulses as f64;
        if x_delay > x_max * (1.0 + TIMING_RTOL) {
            return Err(Error::Timing(format!(
                "x delay {x_delay:.6e} s exceeds TE/N = {x_max:.6e} s"
            )));
        }
        let x_delay = x_delay.min(x_max);
        let y_delay = total_time - (n_pulses - 1) as f64 * x_delay;
        if y_delay <= 0.0 {
            return Err(Error::Timing(format!(
                "derived y delay {y_delay:.6e} s is not positive"
            )));
        }
        Ok(Self {
            n_pulses,
            x_delay,
            y_delay,
            total_time,
        })
    }

    pub fn hahn(total_time: f64) -> Result<Self> {
        Self::sdr(1, 0.0, total_time)
    }

    /// Equally spaced train, `x = y = TE/N`.
    pub fn cpmg(n_pulses: usize, total_time: f64) -> Result<Self> {
        if n_pulses == 0 {
            return Err(Error::Timing("at least one pulse is required".into()));
        }
        Self::sdr(n_pulses, total_time / n_pulses as f64, total_time)
    }

    pub fn n_pulses(&self) -> usize {
        self.n_pulses
    }

    pub fn x_delay(&self) -> f64 {
        self.x_delay
    }

    pub fn y_delay(&self) -> f64 {
        self.y_delay
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Duration of the leading CPMG block, `(N - 1) x`.
    pub fn cpmg_duration(&self) -> f64 {
        self.total_time - self.y_delay
    }

    /// Pulse instants `t_1 < ... < t_N`, all inside `(0, TE)`.
    pub fn pulse_times(&self) -> Vec<f64> {
        let n = self.n_pulses;
        let mut times = Vec::with_capacity(n);
        for i in 0..n - 1 {
            times.push(self.x_delay * (i as f64 + 0.5));
        }
        times.push(self.total_time - 0.5 * self.y_delay);
        times
    }

    pub fn modulation(&self) -> ModulationFunction {
        let mut boundaries = Vec::with_capacity(self.n_pulses + 2);
        boundaries.push(0.0);
        boundaries.extend(self.pulse_times());
        boundaries.push(self.total_time);
        ModulationFunction { boundaries }
    }

    /// Splits the train into its CPMG block over `[0, (N-1)x]` and its Hahn
    /// block over `[0, y]`. The Hahn block enters the full train shifted by
    /// `(N-1)x` and multiplied by `parity = (-1)^(N-1)`.
    pub fn decompose(&self) -> Result<Decomposition> {
        if self.n_pulses < 2 {
            return Err(Error::Decomposition(self.n_pulses));
        }
        let m = self.n_pulses - 1;
        let x = self.x_delay;
        let cpmg_len = m as f64 * x;
        let mut cpmg = Vec::with_capacity(m + 2);
        cpmg.push(0.0);
        cpmg.extend((0..m).map(|i| x * (i as f64 + 0.5)));
        cpmg.push(cpmg_len);
        let y = self.y_delay;
        Ok(Decomposition {
            cpmg: ModulationFunction { boundaries: cpmg },
            hahn: ModulationFunction {
                boundaries: vec![0.0, 0.5 * y, y],
            },
            parity: if m.is_multiple_of(2) { 1.0 } else { -1.0 },
            offset: cpmg_len,
        })
    }
}

/// One constant-sign piece of a modulation function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub sign: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn shifted(self, offset: f64, sign: f64) -> Self {
        Segment {
            start: self.start + offset,
            end: self.end + offset,
            sign: self.sign * sign,
        }
    }
}

/// Piecewise-constant ±1 sign history `f(t)` on `[0, T]`, starting at +1 and
/// flipping at every interior boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationFunction {
    boundaries: Vec<f64>,
}

impl ModulationFunction {
    /// Arbitrary flip times. Not exposed: only SDR trains are first-class.
    #[allow(dead_code)]
    pub(crate) fn from_flip_times(flips: &[f64], duration: f64) -> Result<Self> {
        let mut boundaries = Vec::with_capacity(flips.len() + 2);
        boundaries.push(0.0);
        boundaries.extend_from_slice(flips);
        boundaries.push(duration);
        if boundaries
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::Timing(
                "flip times must be strictly increasing inside (0, T)".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    /// Segment edges `0 = b_0 < b_1 < ... < b_{N+1} = T`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn duration(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    pub fn n_flips(&self) -> usize {
        self.boundaries.len() - 2
    }

    pub fn n_segments(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Sign of segment `k`, `(-1)^k`.
    pub fn sign(k: usize) -> f64 {
        if k.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.boundaries.windows(2).enumerate().map(|(k, w)| Segment {
            start: w[0],
            end: w[1],
            sign: Self::sign(k),
        })
    }

    /// `f(t)`; right-continuous at flips, zero outside `[0, T]`.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration() {
            return 0.0;
        }
        let k = self.boundaries.partition_point(|&b| b <= t);
        // k counts boundaries <= t, so the segment index is k - 1.
        Self::sign(k.saturating_sub(1).min(self.n_segments() - 1))
    }

    /// `∫ f dt`; zero for every refocused train.
    pub fn signed_area(&self) -> f64 {
        self.segments().map(|s| s.sign * s.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub cpmg: ModulationFunction,
    pub hahn: ModulationFunction,
    /// `(-1)^(N-1)`
    pub parity: f64,
    /// `(N-1) x`, where the Hahn block begins.
    pub offset: f64,
}

impl Decomposition {
    /// Reassembled `f(t) = f_cpmg(t) + parity * f_hahn(t - offset)`.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < self.offset {
            self.cpmg.value_at(t)
        } else {
            self.parity * self.hahn.value_at(t - self.offset)
        }
    }

    /// Hahn block segments placed on the absolute time axis with the parity applied.
    pub fn hahn_segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.hahn.segments().map(move |s| s.shifted(self.offset, self.parity))
    }
}
