//! Random-walk ground truth: Gaussian steps with specular reflection at the
//! walls, phase accumulation under a pulse train, mean-square displacement
//! and the stationary position autocorrelation.
//!
//! Every walker owns a ChaCha8 stream selected by `(seed, walker index)`, and
//! walkers are processed in fixed-size chunks whose partial sums are reduced
//! in index order. Results are therefore bit-identical for any thread count.

mod domain;

pub use domain::{Domain, Point};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::{correlation_time, AcquisitionParams, Geometry};
use crate::sequence::PulseSequence;

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSpec {
    pub geometry: Geometry,
    /// seconds
    pub dt: f64,
    pub n_walkers: usize,
    pub seed: u64,
    /// seconds
    pub duration: f64,
}

impl WalkSpec {
    /// Largest step allowed for `geom`: `dt ≤ τ_c/50` and `sqrt(2·dim·D0·dt) ≤ d/10`.
    pub fn max_dt(geom: &Geometry) -> Option<f64> {
        let tau = correlation_time(geom).ok()?;
        let dim = geom.kind.dimension() as f64;
        let step_limit = (0.1 * geom.size_d).powi(2) / (2.0 * dim * geom.d0);
        Some((tau / 50.0).min(step_limit))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.n_walkers == 0 {
            return Err(Error::InvalidParameter("need at least one walker".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::StepSize {
                reason: format!("dt must be positive, got {}", self.dt),
                suggested_dt: Self::max_dt(&self.geometry).unwrap_or(self.duration / 1000.0),
            });
        }
        if let Some(limit) = Self::max_dt(&self.geometry) {
            if self.dt > limit * (1.0 + 1e-9) {
                return Err(Error::StepSize {
                    reason: format!("dt = {:.3e} s resolves neither τ_c/50 nor d/10 per step", self.dt),
                    suggested_dt: limit,
                });
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    fn domain(&self) -> Domain {
        Domain::from_geometry(&self.geometry)
    }
}

/// RNG stream of one walker; depends only on the seed and the walker index.
pub fn walker_rng(seed: u64, walker: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walker);
    rng
}

/// Receives the trajectory of one walker.
trait Observer {
    fn start(&mut self, p: &Point);
    /// Step `k` moves the walker from `from` (at `k dt`) to `to` (at `(k+1) dt`).
    fn step(&mut self, k: usize, from: &Point, to: &Point);
}

fn run_walker<O: Observer>(spec: &WalkSpec, domain: &Domain, walker: usize, n_steps: usize, obs: &mut O) {
    let mut rng = walker_rng(spec.seed, walker as u64);
    let dim = domain.dimension();
    let sigma = (2.0 * spec.geometry.d0 * spec.dt).sqrt();
    let mut pos = domain.sample_uniform(&mut rng);
    obs.start(&pos);
    for k in 0..n_steps {
        let prev = pos;
        for v in pos.iter_mut().take(dim) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
        domain.reflect(&prev, &mut pos);
        debug_assert!(
            domain.contains(&pos),
            "walker {walker} left the domain at step {k}: {pos:?}"
        );
        obs.step(k, &prev, &pos);
    }
}

/// Maps chunks of walkers to partial results and reduces them pairwise in index order.
fn map_reduce_chunks<T, M, R>(n_walkers: usize, map: M, reduce: R) -> T
where
    T: Send,
    M: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    R: Fn(T, T) -> T,
{
    let n_chunks = n_walkers.div_ceil(CHUNK);
    let chunk = |c: usize| map(c * CHUNK..((c + 1) * CHUNK).min(n_walkers));
    #[cfg(feature = "parallel")]
    let mut parts: Vec<T> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut parts: Vec<T> = (0..n_chunks).map(chunk).collect();
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(reduce(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one chunk")
}

fn add_into(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Mean and standard error from running sums.
fn mean_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsdCurve {
    pub times: Vec<f64>,
    /// `<(x(t) - x(0))²>` along the gradient axis, m².
    pub msd: Vec<f64>,
    pub stderr: Vec<f64>,
}

struct MsdObserver<'a> {
    sample_steps: &'a [usize],
    next: usize,
    x0: f64,
    sums: &'a mut [f64],
}

impl Observer for MsdObserver<'_> {
    fn start(&mut self, p: &Point) {
        self.x0 = p[0];
        self.next = 0;
    }

    fn step(&mut self, k: usize, _from: &Point, to: &Point) {
        while self.next < self.sample_steps.len() && self.sample_steps[self.next] == k + 1 {
            let d2 = (to[0] - self.x0).powi(2);
            self.sums[2 * self.next] += d2;
            self.sums[2 * self.next + 1] += d2 * d2;
            self.next += 1;
        }
    }
}

/// Mean-square displacement along the gradient axis at `points` log-spaced times in `(0, duration]`.
pub fn simulate_msd(spec: &WalkSpec, points: usize) -> Result<MsdCurve> {
    spec.validate()?;
    let n_steps = spec.n_steps();
    let points = points.max(1);
    let mut steps: Vec<usize> = (0..points)
        .map(|i| {
            let f = if points == 1 {
                1.0
            } else {
                i as f64 / (points - 1) as f64
            };
            (n_steps as f64).powf(f).round().max(1.0) as usize
        })
        .collect();
    steps.dedup();
    let domain = spec.domain();
    let sums = map_reduce_chunks(
        spec.n_walkers,
        |range| {
            let mut sums = vec![0.0; 2 * steps.len()];
            for w in range {
                let mut obs = MsdObserver {
                    sample_steps: &steps,
                    next: 0,
                    x0: 0.0,
                    sums: &mut sums,
                };
                run_walker(spec, &domain, w, n_steps, &mut obs);
            }
            sums
        },
        add_into,
    );
    let mut curve = MsdCurve {
        times: Vec::new(),
        msd: Vec::new(),
        stderr: Vec::new(),
    };
    for (i, &s) in steps.iter().enumerate() {
        let (m, e) = mean_stderr(sums[2 * i], sums[2 * i + 1], spec.n_walkers);
        curve.times.push(s as f64 * spec.dt);
        curve.msd.push(m);
        curve.stderr.push(e);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    pub lags: Vec<f64>,
    /// `γ²G² <x(t) x(t+τ)>`, rad²/s².
    pub g: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Autocorrelation {
    /// Least-squares fit of `a exp(-τ/t)` over lags `≤ max_lag`; returns `(a, t)`.
    pub fn fit_exponential(&self, max_lag: f64) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .lags
            .iter()
            .zip(&self.g)
            .filter(|(l, _)| **l <= max_lag)
            .map(|(l, g)| (*l, *g))
            .collect();
        if pts.len() < 3 || self.g[0] <= 0.0 {
            return None;
        }
        let g0 = self.g[0];
        // Seed from the 1/e crossing.
        let t0 = pts
            .iter()
            .find(|p| p.1 < g0 / std::f64::consts::E)
            .map_or(max_lag / 3.0, |p| p.0.max(1e-30));
        let scale_t = t0;
        let f = |p: &[f64]| {
            Some(
                pts.iter()
                    .map(|(l, g)| p[0] * (-l / (p[1] * scale_t)).exp() - g / g0)
                    .collect(),
            )
        };
        let out = crate::lsq::minimize(f, &[1.0, 1.0], &[1e-6, 1e-6], &[10.0, 1e3], &Default::default())?;
        Some((out.params[0] * g0, out.params[1] * scale_t))
    }

    /// `∫_0^∞ g dτ`: trapezoid over the sampled lags plus an exponential tail
    /// continued from the last two lags.
    pub fn integral(&self) -> f64 {
        let n = self.lags.len();
        let mut s = 0.0;
        for i in 1..n {
            s += 0.5 * (self.g[i] + self.g[i - 1]) * (self.lags[i] - self.lags[i - 1]);
        }
        if n >= 2 && self.g[n - 1] > 0.0 && self.g[n - 2] > self.g[n - 1] {
            let t = (self.lags[n - 1] - self.lags[n - 2]) / (self.g[n - 2] / self.g[n - 1]).ln();
            s += self.g[n - 1] * t;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutocorrelationOptions {
    /// Spacing of stored positions, seconds (rounded to whole steps).
    pub sample_interval: f64,
    /// Largest lag, seconds.
    pub max_lag: f64,
}

struct PositionRecorder<'a> {
    burn_in: usize,
    stride: usize,
    xs: &'a mut Vec<f64>,
}

impl Observer for PositionRecorder<'_> {
    fn start(&mut self, p: &Point) {
        self.xs.clear();
        if self.burn_in == 0 {
            self.xs.push(p[0]);
        }
    }

    fn step(&mut self, k: usize, _from: &Point, to: &Point) {
        let k = k + 1;
        if k >= self.burn_in && (k - self.burn_in).is_multiple_of(self.stride) {
            self.xs.push(to[0]);
        }
    }
}

/// Stationary `g(τ)` by time-and-ensemble averaging after a `5 τ_c` burn-in.
///
/// Requires `duration ≥ 20 τ_c`. The domain is centred, so `<x> = 0` exactly.
pub fn simulate_autocorrelation(
    spec: &WalkSpec,
    acq: &AcquisitionParams,
    opts: &AutocorrelationOptions,
) -> Result<Autocorrelation> {
    spec.validate()?;
    let tau_c = correlation_time(&spec.geometry)?;
    if spec.duration < 20.0 * tau_c {
        return Err(Error::BurnIn {
            duration: spec.duration,
            required: 20.0 * tau_c,
        });
    }
    let burn_in = (5.0 * tau_c / spec.dt).ceil() as usize;
    let stride = ((opts.sample_interval / spec.dt).round() as usize).max(1);
    let n_steps = spec.n_steps();
    let n_samples = (n_steps - burn_in) / stride + 1;
    let max_lag = ((opts.max_lag / (stride as f64 * spec.dt)).round() as usize).min(n_samples - 1);
    let domain = spec.domain();
    let scale = acq.gamma_g().powi(2);
    let sums = map_reduce_chunks(
        spec.n_walkers,
        |range| {
            let mut sums = vec![0.0; 2 * (max_lag + 1)];
            let mut xs = Vec::with_capacity(n_samples);
            for w in range {
                let mut rec = PositionRecorder {
                    burn_in,
                    stride,
                    xs: &mut xs,
                };
                run_walker(spec, &domain, w, n_steps, &mut rec);
                for lag in 0..=max_lag {
                    let n = xs.len() - lag;
                    let c: f64 = xs[..n].iter().zip(&xs[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                    sums[2 * lag] += c;
                    sums[2 * lag + 1] += c * c;
                }
            }
            sums
        },
        add_into,
    );
    let mut out = Autocorrelation {
        lags: Vec::new(),
        g: Vec::new(),
        stderr: Vec::new(),
    };
    for lag in 0..=max_lag {
        let (m, e) = mean_stderr(sums[2 * lag], sums[2 * lag + 1], spec.n_walkers);
        out.lags.push(lag as f64 * stride as f64 * spec.dt);
        out.g.push(scale * m);
        out.stderr.push(scale * e);
    }
    Ok(out)
}

/// Ensemble magnetization for one sequence (and gradient).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPoint {
    /// `<cos φ>`
    pub magnetization: f64,
    pub stderr: f64,
    /// `<sin φ>`; should vanish within noise.
    pub imaginary: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSignal {
    /// Abscissa chosen by the caller: echo time or x delay, seconds.
    pub times: Vec<f64>,
    pub magnetization: Vec<f64>,
    pub stderr: Vec<f64>,
    pub imaginary: Vec<f64>,
}

impl EnsembleSignal {
    pub fn from_points(times: Vec<f64>, points: &[SignalPoint]) -> Self {
        Self {
            times,
            magnetization: points.iter().map(|p| p.magnetization).collect(),
            stderr: points.iter().map(|p| p.stderr).collect(),
            imaginary: points.iter().map(|p| p.imaginary).collect(),
        }
    }
}

struct SeqState {
    pulses: Vec<f64>,
    total_time: f64,
}

struct PhaseObserver<'a> {
    seqs: &'a [SeqState],
    dt: f64,
    /// `∫ f x dt` per sequence
    acc: Vec<f64>,
    sign: Vec<f64>,
    next: Vec<usize>,
}

impl PhaseObserver<'_> {
    fn reset(&mut self) {
        self.acc.iter_mut().for_each(|v| *v = 0.0);
        self.sign.iter_mut().for_each(|v| *v = 1.0);
        self.next.iter_mut().for_each(|v| *v = 0);
    }
}

impl Observer for PhaseObserver<'_> {
    fn start(&mut self, _p: &Point) {
        self.reset();
    }

    fn step(&mut self, k: usize, from: &Point, to: &Point) {
        let t0 = k as f64 * self.dt;
        let t1 = t0 + self.dt;
        let (x0, x1) = (from[0], to[0]);
        let slope = (x1 - x0) / self.dt;
        for (i, s) in self.seqs.iter().enumerate() {
            if t0 >= s.total_time {
                continue;
            }
            let end = t1.min(s.total_time);
            let mut next = self.next[i];
            if end == t1 && (next >= s.pulses.len() || s.pulses[next] >= t1) {
                self.acc[i] += self.sign[i] * 0.5 * (x0 + x1) * self.dt;
                continue;
            }
            // Split at pulses; midpoint position of each piece on the straight chord.
            let mut cur = t0;
            let mut sign = self.sign[i];
            let mut acc = 0.0;
            while next < s.pulses.len() && s.pulses[next] < end {
                let tp = s.pulses[next];
                acc += sign * (x0 + slope * (0.5 * (cur + tp) - t0)) * (tp - cur);
                sign = -sign;
                cur = tp;
                next += 1;
            }
            acc += sign * (x0 + slope * (0.5 * (cur + end) - t0)) * (end - cur);
            self.acc[i] += acc;
            self.sign[i] = sign;
            self.next[i] = next;
        }
    }
}

/// Magnetization for every `(gradient, sequence)` pair from one shared set of trajectories.
///
/// The phase is linear in the gradient, so all gradients reuse the same
/// `∫ f x dt`. Result is indexed `[gradient][sequence]`.
pub fn simulate_decay_batch(
    spec: &WalkSpec,
    seqs: &[PulseSequence],
    gamma: f64,
    gradients: &[f64],
) -> Result<Vec<Vec<SignalPoint>>> {
    spec.validate()?;
    let longest = seqs.iter().map(|s| s.total_time()).fold(0.0, f64::max);
    if longest > spec.duration * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "sequence of {longest:.3e} s exceeds walk duration {:.3e} s",
            spec.duration
        )));
    }
    let states: Vec<SeqState> = seqs
        .iter()
        .map(|s| SeqState {
            pulses: s.pulse_times(),
            total_time: s.total_time(),
        })
        .collect();
    let n_steps = (longest / spec.dt - 1e-9).ceil().max(0.0) as usize;
    let domain = spec.domain();
    let n_seq = seqs.len();
    let n_grad = gradients.len();
    let sums = map_reduce_chunks(
        spec.n_walkers,
        |range| {
            let mut sums = vec![0.0; 3 * n_seq * n_grad];
            let mut obs = PhaseObserver {
                seqs: &states,
                dt: spec.dt,
                acc: vec![0.0; n_seq],
                sign: vec![1.0; n_seq],
                next: vec![0; n_seq],
            };
            for w in range {
                run_walker(spec, &domain, w, n_steps, &mut obs);
                for (gi, g) in gradients.iter().enumerate() {
                    let gg = gamma * g;
                    for si in 0..n_seq {
                        let (s, c) = (gg * obs.acc[si]).sin_cos();
                        let base = 3 * (gi * n_seq + si);
                        sums[base] += c;
                        sums[base + 1] += c * c;
                        sums[base + 2] += s;
                    }
                }
            }
            sums
        },
        add_into,
    );
    Ok((0..n_grad)
        .map(|gi| {
            (0..n_seq)
                .map(|si| {
                    let base = 3 * (gi * n_seq + si);
                    let (m, e) = mean_stderr(sums[base], sums[base + 1], spec.n_walkers);
                    SignalPoint {
                        magnetization: m,
                        stderr: e,
                        imaginary: sums[base + 2] / spec.n_walkers as f64,
                    }
                })
                .collect()
        })
        .collect())
}

/// `M = <cos φ>` for one sequence, `φ = γG ∫ f(t) x(t) dt`.
pub fn simulate_decay(spec: &WalkSpec, seq: &PulseSequence, acq: &AcquisitionParams) -> Result<EnsembleSignal> {
    let pts = simulate_decay_batch(spec, std::slice::from_ref(seq), acq.gamma, &[acq.gradient])?;
    Ok(EnsembleSignal::from_points(vec![seq.total_time()], &pts[0]))
}
