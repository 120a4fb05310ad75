//! Reflecting domains centred at the origin. Coordinate 0 is the gradient axis.

use std::f64::consts::PI;

use rand::Rng;

use crate::noise::{Geometry, GeometryKind};

pub type Point = [f64; 3];

const MAX_REFLECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Free,
    /// `|x| < half_width`
    Slab {
        half_width: f64,
    },
    /// `x² + y² < radius²`
    Disc {
        radius: f64,
    },
    /// `x² + y² + z² < radius²`
    Ball {
        radius: f64,
    },
}

impl Domain {
    pub fn from_geometry(geom: &Geometry) -> Self {
        let half = 0.5 * geom.size_d;
        match geom.kind {
            GeometryKind::Free => Domain::Free,
            GeometryKind::Slab => Domain::Slab { half_width: half },
            GeometryKind::Cylinder => Domain::Disc { radius: half },
            GeometryKind::Sphere => Domain::Ball { radius: half },
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Free | Domain::Slab { .. } => 1,
            Domain::Disc { .. } => 2,
            Domain::Ball { .. } => 3,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match *self {
            Domain::Free => true,
            Domain::Slab { half_width } => p[0].abs() < half_width,
            Domain::Disc { radius } => p[0] * p[0] + p[1] * p[1] < radius * radius,
            Domain::Ball { radius } => p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < radius * radius,
        }
    }

    /// Uniform over the interior. Free walkers start at the origin.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Point {
        match *self {
            Domain::Free => [0.0; 3],
            Domain::Slab { half_width } => [half_width * (2.0 * rng.random::<f64>() - 1.0), 0.0, 0.0],
            Domain::Disc { radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let theta = 2.0 * PI * rng.random::<f64>();
                let (s, c) = theta.sin_cos();
                [r * c, r * s, 0.0]
            }
            Domain::Ball { radius } => loop {
                let p = [
                    radius * (2.0 * rng.random::<f64>() - 1.0),
                    radius * (2.0 * rng.random::<f64>() - 1.0),
                    radius * (2.0 * rng.random::<f64>() - 1.0),
                ];
                if self.contains(&p) {
                    break p;
                }
            },
        }
    }

    /// Moves `to` back inside by specular reflection of the straight path
    /// `from -> to` off the boundary, repeated until the endpoint is interior.
    pub fn reflect(&self, from: &Point, to: &mut Point) {
        match *self {
            Domain::Free => {}
            Domain::Slab { half_width: a } => {
                let mut x = to[0];
                while x.abs() >= a {
                    x = if x >= a { 2.0 * a - x } else { -2.0 * a - x };
                }
                to[0] = x;
            }
            Domain::Disc { radius } => reflect_round(from, to, radius, 2),
            Domain::Ball { radius } => reflect_round(from, to, radius, 3),
        }
    }
}

fn norm2(p: &Point, dim: usize) -> f64 {
    p[..dim].iter().map(|v| v * v).sum()
}

fn reflect_round(from: &Point, to: &mut Point, radius: f64, dim: usize) {
    let r2 = radius * radius;
    if norm2(to, dim) < r2 {
        return;
    }
    let mut start = *from;
    let mut end = *to;
    for _ in 0..MAX_REFLECTIONS {
        let mut d = [0.0; 3];
        for i in 0..dim {
            d[i] = end[i] - start[i];
        }
        // |start + s d|² = R², exit root.
        let a = norm2(&d, dim);
        let b: f64 = (0..dim).map(|i| start[i] * d[i]).sum();
        let c = norm2(&start, dim) - r2;
        let disc = (b * b - a * c).max(0.0);
        let s = ((-b + disc.sqrt()) / a).clamp(0.0, 1.0);
        let mut hit = [0.0; 3];
        for i in 0..dim {
            hit[i] = start[i] + s * d[i];
        }
        let hn = norm2(&hit, dim).sqrt();
        let mut normal = [0.0; 3];
        for i in 0..dim {
            normal[i] = hit[i] / hn;
        }
        let mut rest = [0.0; 3];
        for i in 0..dim {
            rest[i] = end[i] - hit[i];
        }
        let proj: f64 = (0..dim).map(|i| rest[i] * normal[i]).sum();
        for i in 0..dim {
            end[i] = hit[i] + rest[i] - 2.0 * proj * normal[i];
        }
        start = hit;
        if norm2(&end, dim) < r2 {
            *to = end;
            return;
        }
    }
    // Grazing paths that keep skimming the wall: pull radially inside.
    let n = norm2(&end, dim).sqrt();
    let scale = radius * (1.0 - 1e-12) / n;
    for c in end.iter_mut().take(dim) {
        *c *= scale;
    }
    *to = end;
}
