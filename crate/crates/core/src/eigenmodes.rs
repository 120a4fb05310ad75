//! Diffusion eigenmode expansion of the stationary position autocorrelation
//! `<x(0) x(t)>` inside reflecting slabs, discs and balls.
//!
//! With `x` the coordinate along the gradient and uniform initial positions,
//!
//! * slab of width `d`: `Σ_{n odd} 8 d² / (n⁴ π⁴) exp(-n² π² D t / d²)`
//! * disc of radius `R`: `Σ_k 2 R² / (α_k² (α_k² - 1)) exp(-α_k² D t / R²)`, `J1'(α_k) = 0`
//! * ball of radius `R`: `Σ_k 2 R² / (α_k² (α_k² - 2)) exp(-α_k² D t / R²)`, `j1'(α_k) = 0`

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::noise::GeometryKind;

/// One exponential term of `<x(0) x(t)> / Var(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// Fraction of the coordinate variance carried by this mode.
    pub weight: f64,
    /// Decay time in units of `d² / D0`.
    pub time: f64,
}

/// Bessel function of the first kind of integer order.
///
/// Trapezoidal rule on the periodic Bessel integral, which converges
/// geometrically once the node count exceeds `|x|` by a few dozen.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = 64 + 2 * x.abs().ceil() as usize;
    let h = 2.0 * PI / m as f64;
    let s: f64 = (0..m)
        .map(|j| {
            let theta = j as f64 * h;
            (n as f64 * theta - x * theta.sin()).cos()
        })
        .sum();
    s / m as f64
}

fn bessel_j1_prime(x: f64) -> f64 {
    0.5 * (bessel_j(0, x) - bessel_j(2, x))
}

/// Proportional to the derivative of the spherical Bessel function `j1`.
fn spherical_j1_prime_scaled(x: f64) -> f64 {
    2.0 * x * x.cos() + (x * x - 2.0) * x.sin()
}

fn positive_roots(f: impl Fn(f64) -> f64, count: usize) -> Vec<f64> {
    let step = 0.05;
    let mut roots = Vec::with_capacity(count);
    let mut a = 0.5;
    let mut fa = f(a);
    while roots.len() < count {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    roots
}

const TABLE_LEN: usize = 64;

/// Positive roots of `J1'`.
pub fn disc_roots() -> &'static [f64] {
    static ROOTS: OnceLock<Vec<f64>> = OnceLock::new();
    ROOTS.get_or_init(|| positive_roots(bessel_j1_prime, TABLE_LEN))
}

/// Positive roots of `j1'`.
pub fn ball_roots() -> &'static [f64] {
    static ROOTS: OnceLock<Vec<f64>> = OnceLock::new();
    ROOTS.get_or_init(|| positive_roots(spherical_j1_prime_scaled, TABLE_LEN))
}

/// Modes in order of decreasing decay time, `count` of them, with infinite-series weights.
pub fn modes(kind: GeometryKind, count: usize) -> Vec<Mode> {
    let count = count.min(TABLE_LEN);
    match kind {
        GeometryKind::Free => Vec::new(),
        GeometryKind::Slab => (0..count)
            .map(|k| {
                let n = (2 * k + 1) as f64;
                Mode {
                    weight: 96.0 / (n.powi(4) * PI.powi(4)),
                    time: 1.0 / (n * n * PI * PI),
                }
            })
            .collect(),
        GeometryKind::Cylinder => disc_roots()[..count]
            .iter()
            .map(|&a| {
                let a2 = a * a;
                Mode {
                    weight: 8.0 / (a2 * (a2 - 1.0)),
                    time: 0.25 / a2,
                }
            })
            .collect(),
        GeometryKind::Sphere => ball_roots()[..count]
            .iter()
            .map(|&a| {
                let a2 = a * a;
                Mode {
                    weight: 10.0 / (a2 * (a2 - 2.0)),
                    time: 0.25 / a2,
                }
            })
            .collect(),
    }
}

/// `count` modes whose weights sum to one: the first `count - 1` are exact and
/// the last absorbs the weight of every truncated mode, so `g(0)` is preserved.
pub fn truncated_modes(kind: GeometryKind, count: usize) -> Vec<Mode> {
    let mut m = modes(kind, count.max(1));
    let head: f64 = m[..m.len() - 1].iter().map(|mode| mode.weight).sum();
    if let Some(last) = m.last_mut() {
        last.weight = 1.0 - head;
    }
    m
}

/// `Var(x) / d²` for a uniform distribution over the domain.
pub fn coordinate_variance(kind: GeometryKind) -> f64 {
    match kind {
        GeometryKind::Free => f64::INFINITY,
        GeometryKind::Slab => 1.0 / 12.0,
        GeometryKind::Cylinder => 1.0 / 16.0,
        GeometryKind::Sphere => 1.0 / 20.0,
    }
}

/// `∫_0^∞ <x(0) x(t)> dt` in units of `d⁴ / D0`.
pub fn correlation_integral(kind: GeometryKind) -> f64 {
    match kind {
        GeometryKind::Free => f64::INFINITY,
        GeometryKind::Slab => 1.0 / 120.0,
        GeometryKind::Cylinder => 7.0 / 1536.0,
        GeometryKind::Sphere => 1.0 / 350.0,
    }
}
