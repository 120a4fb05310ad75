//! Box-constrained damped least squares (Levenberg-Marquardt) with a
//! central-difference Jacobian. Sized for the handful of parameters the
//! pore-size fit needs.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Stop when `max |Jᵀ r| < gtol`.
    pub gtol: f64,
    /// Stop when a step is smaller than `xtol (|x| + xtol)`.
    pub xtol: f64,
    /// Central-difference step, relative to `max(|x_i|, 1)`.
    pub rel_step: f64,
    pub initial_damping: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gtol: 1e-10,
            xtol: 1e-12,
            rel_step: 1e-6,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct LsqOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `½ Σ r²`
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Jacobian at `params`, row-major per residual.
    pub jacobian: DMatrix<f64>,
}

impl LsqOutcome {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxIterations
    }

    /// Diagonal of `σ² (JᵀJ)⁻¹` with `σ² = Σr² / (m - p)`; `None` if singular.
    pub fn covariance_diagonal(&self) -> Option<Vec<f64>> {
        let m = self.residuals.len();
        let p = self.params.len();
        if m <= p {
            return None;
        }
        let sigma2 = 2.0 * self.cost / (m - p) as f64;
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let inv = jtj.try_inverse()?;
        Some((0..p).map(|i| sigma2 * inv[(i, i)]).collect())
    }
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn jacobian<F>(f: &F, x: &[f64], m: usize, rel_step: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let up = f(&probe)?;
        probe[j] = x[j] - h;
        let down = f(&probe)?;
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

/// Minimizes `½ Σ r(x)²` over the box `[lower, upper]`.
///
/// `residuals` returns `None` where the model cannot be evaluated; such
/// trial points are rejected like any uphill step. Returns `None` only if the
/// starting point itself cannot be evaluated.
pub fn minimize<F>(residuals: F, x0: &[f64], lower: &[f64], upper: &[f64], options: &LsqOptions) -> Option<LsqOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let p = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..p {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut r = residuals(&x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let m = r.len();
    let mut cost = cost_of(&r);
    let mut lambda = options.initial_damping;
    let mut jac = jacobian(&residuals, &x, m, options.rel_step)?;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    while iterations < options.max_iterations {
        iterations += 1;
        let rv = DVector::from_column_slice(&r);
        let grad = jac.transpose() * &rv;
        // Gradient components pushing against an active bound do not count.
        let projected = (0..p)
            .map(|i| {
                let g = grad[i];
                let blocked = (x[i] <= lower[i] && g > 0.0) || (x[i] >= upper[i] && g < 0.0);
                if blocked {
                    0.0
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max);
        if projected < options.gtol {
            termination = Termination::Gradient;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        loop {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    if lambda > 1e20 {
                        break;
                    }
                    continue;
                }
            };
            let mut trial: Vec<f64> = (0..p).map(|i| x[i] + step[i]).collect();
            clamp(&mut trial);
            let dx: f64 = (0..p).map(|i| (trial[i] - x[i]).powi(2)).sum::<f64>().sqrt();
            let xn: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tiny = dx < options.xtol * (xn + options.xtol);
            let trial_r = residuals(&trial).filter(|tr| tr.iter().all(|v| v.is_finite()));
            if let Some(tr) = trial_r {
                let trial_cost = cost_of(&tr);
                if trial_cost < cost {
                    x = trial;
                    r = tr;
                    cost = trial_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if tiny {
                        termination = Termination::Step;
                    }
                    break;
                }
            }
            if tiny {
                termination = Termination::Step;
                break;
            }
            lambda *= 4.0;
            if lambda > 1e20 {
                termination = Termination::Step;
                break;
            }
        }
        if accepted {
            match jacobian(&residuals, &x, m, options.rel_step) {
                Some(j) => jac = j,
                None => break,
            }
        }
        if termination != Termination::MaxIterations {
            break;
        }
    }

    Some(LsqOutcome {
        params: x,
        residuals: r,
        cost,
        iterations,
        termination,
        jacobian: jac,
    })
}
