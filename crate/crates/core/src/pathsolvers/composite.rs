//! Certified solvers for `M(φ) + τ R(φ)` with a smooth contrast `M` and
//! `R = ‖φ‖₁` or `‖φ‖₂²`, by active-set proximal Newton steps.

use crate::contrasts::{eval_contrast, eval_gradient, eval_hessian, ContrastSpec};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::linmodel::DesignSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Reg {
    L1,
    L2,
}

impl Reg {
    pub fn from_gamma(gamma: f64) -> Result<Reg> {
        if gamma == 1.0 {
            Ok(Reg::L1)
        } else if gamma == 2.0 {
            Ok(Reg::L2)
        } else {
            Err(Error::invalid(format!("grid solver supports gamma in {{1, 2}}, got {gamma}")))
        }
    }

    fn value(self, phi: &Vector) -> f64 {
        match self {
            Reg::L1 => phi.iter().map(|v| v.abs()).sum(),
            Reg::L2 => phi.norm_squared(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Smooth<'a> {
    pub spec: ContrastSpec,
    pub sample: &'a DesignSample,
}

impl Smooth<'_> {
    fn value(&self, phi: &Vector) -> Result<f64> {
        eval_contrast(&self.spec, self.sample, phi)
    }

    fn gradient(&self, phi: &Vector) -> Result<Vector> {
        eval_gradient(&self.spec, self.sample, phi)
    }

    fn hessian(&self, phi: &Vector) -> Result<Matrix> {
        eval_hessian(&self.spec, self.sample, phi)
    }
}

pub(crate) struct Solved {
    pub phi: Vector,
    pub residual: f64,
}

pub(crate) struct Composite<'a> {
    pub smooth: Smooth<'a>,
    pub reg: Reg,
    pub tau: f64,
}

fn soft(v: f64, thr: f64) -> f64 {
    if v > thr {
        v - thr
    } else if v < -thr {
        v + thr
    } else {
        0.0
    }
}

/// Solves `h d = rhs`, adding a growing ridge while `h` is not positive definite.
fn damped_solve(h: &Matrix, rhs: &Vector) -> Vector {
    let p = h.nrows();
    let scale = (0..p).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut mu = 0.0;
    for _ in 0..40 {
        let a = h + Matrix::identity(p, p) * mu;
        if let Some(ch) = a.cholesky() {
            let d = ch.solve(rhs);
            if d.iter().all(|v| v.is_finite()) {
                return d;
            }
        }
        mu = if mu == 0.0 { 1e-12 * scale } else { mu * 10.0 };
    }
    rhs / scale
}

impl Composite<'_> {
    fn value(&self, phi: &Vector) -> f64 {
        match self.smooth.value(phi) {
            Ok(v) if v.is_finite() => v + self.tau * self.reg.value(phi),
            _ => f64::INFINITY,
        }
    }

    pub fn kkt(&self, phi: &Vector, grad: &Vector) -> f64 {
        smooth_residual(self.reg, self.tau, phi, grad)
    }

    pub fn minimize(&self, start: &Vector, tol: f64, max_iter: usize) -> Result<Solved> {
        // with τ = 0 the proximal map is the identity and its gradient
        // steps survive a degenerate Hessian
        match self.reg {
            Reg::L2 if self.tau > 0.0 => self.newton(start, tol, max_iter),
            _ => self.prox_newton(start, tol, max_iter),
        }
    }

    fn newton(&self, start: &Vector, tol: f64, max_iter: usize) -> Result<Solved> {
        let p = start.len();
        let mut phi = start.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let grad = self.smooth.gradient(&phi)? + &phi * (2.0 * self.tau);
            residual = grad.amax();
            if residual <= tol {
                return Ok(Solved {
                    phi,
                    residual,
                });
            }
            let h = self.smooth.hessian(&phi)? + Matrix::identity(p, p) * (2.0 * self.tau);
            let d = damped_solve(&h, &-&grad);
            let f0 = self.value(&phi);
            let slope = grad.dot(&d);
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-14 {
                let cand = &phi + &d * alpha;
                let f = self.value(&cand);
                if f <= f0 + 1e-4 * alpha * slope + 8.0 * f64::EPSILON * f0.abs() {
                    phi = cand;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                // steepest descent with backtracking
                let mut step = 1.0 / (h.diagonal().amax() + 2.0 * self.tau).max(1e-12);
                while step > 1e-300 {
                    let cand = &phi - &grad * step;
                    if self.value(&cand) <= f0 - 0.5 * step * grad.norm_squared() {
                        phi = cand;
                        moved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual,
        })
    }

    fn prox_newton(&self, start: &Vector, tol: f64, max_iter: usize) -> Result<Solved> {
        let p = start.len();
        let tau = self.tau;
        let mut phi = start.clone();
        let mut lip = {
            let h = self.smooth.hessian(&phi)?;
            h.diagonal().sum().max(1e-8)
        };
        let mut residual = f64::INFINITY;
        for it in 0..max_iter {
            let grad = self.smooth.gradient(&phi)?;
            residual = self.kkt(&phi, &grad);
            if residual <= tol {
                return Ok(Solved {
                    phi,
                    residual,
                });
            }
            // proximal gradient step with backtracking
            let f0 = self.smooth.value(&phi)?;
            let mut pg;
            loop {
                pg = Vector::from_fn(p, |j, _| soft(phi[j] - grad[j] / lip, tau / lip));
                let d = &pg - &phi;
                let model = f0 + grad.dot(&d) + 0.5 * lip * d.norm_squared();
                match self.smooth.value(&pg) {
                    Ok(f) if f <= model + 8.0 * f64::EPSILON * f0.abs() => break,
                    _ => lip *= 2.0,
                }
                if lip > 1e300 {
                    return Err(Error::NonConvergence {
                        iterations: it,
                        residual,
                    });
                }
            }
            phi = pg;
            // Newton step on the support with fixed signs
            let support: Vec<usize> = (0..p).filter(|&j| phi[j] != 0.0).collect();
            if !support.is_empty() {
                let g2 = self.smooth.gradient(&phi)?;
                let h = self.smooth.hessian(&phi)?;
                let ha = h.select_rows(&support).select_columns(&support);
                let rhs = Vector::from_iterator(
                    support.len(),
                    support.iter().map(|&j| -(g2[j] + tau * phi[j].signum())),
                );
                let da = damped_solve(&ha, &rhs);
                let mut d = Vector::zeros(p);
                for (k, &j) in support.iter().enumerate() {
                    d[j] = da[k];
                }
                let mut alpha_max = 1.0;
                let mut blocking = None;
                for &j in &support {
                    if phi[j] * d[j] < 0.0 {
                        let a = -phi[j] / d[j];
                        if a < alpha_max {
                            alpha_max = a;
                            blocking = Some(j);
                        }
                    }
                }
                let f_pg = self.value(&phi);
                let mut alpha = alpha_max;
                let mut first = true;
                while alpha > 1e-12 {
                    let mut cand = &phi + &d * alpha;
                    if first {
                        if let Some(j) = blocking {
                            cand[j] = 0.0;
                        }
                    }
                    if self.value(&cand) <= f_pg {
                        phi = cand;
                        break;
                    }
                    alpha *= 0.5;
                    first = false;
                }
            }
            lip = (lip * 0.5).max(1e-12);
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual,
        })
    }
}

fn smooth_residual(reg: Reg, tau: f64, phi: &Vector, grad: &Vector) -> f64 {
    match reg {
        Reg::L2 => (grad + phi * (2.0 * tau)).amax(),
        Reg::L1 => (0..phi.len())
            .map(|j| {
                if phi[j] != 0.0 {
                    (grad[j] + tau * phi[j].signum()).abs()
                } else {
                    (grad[j].abs() - tau).max(0.0)
                }
            })
            .fold(0.0, f64::max),
    }
}

/// KKT residual of `M_n(φ) + τ Σ|φ_j|^γ` (`γ ∈ {1, 2}`) for a smooth contrast.
pub fn smooth_kkt_residual(
    contrast: &ContrastSpec,
    sample: &DesignSample,
    gamma: f64,
    tau: f64,
    phi: &Vector,
) -> Result<f64> {
    let grad = eval_gradient(contrast, sample, phi)?;
    Ok(smooth_residual(Reg::from_gamma(gamma)?, tau, phi, &grad))
}
