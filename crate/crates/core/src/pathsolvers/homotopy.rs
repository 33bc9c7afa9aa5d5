//! Exact path following for
//!
//! ```text
//! minimize  φᵀQφ + gᵀφ + τ (hᵀφ + Σ_{j ∈ N} |φ_j|),   τ ≥ 0,
//! ```
//!
//! with `Q` positive definite. The minimizer is piecewise linear in `τ`; the
//! pieces change when a coordinate of `N` reaches zero or when an inactive
//! coordinate's correlation reaches the bound `τ`. The least-squares lasso is
//! the case `Q = C_n`, `g = −2 n⁻¹Xᵀy`, `h = 0`, `N` = all coordinates; the
//! ℓ1 limit contrast uses `h = sgn(β)` on the coordinates with `β_j ≠ 0`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone)]
pub(crate) struct LinearQuadratic {
    pub q: Matrix,
    pub g: Vector,
    pub h: Vector,
    /// Coordinates carrying `|φ_j|`.
    pub abs_mask: Vec<bool>,
}

/// `φ(τ) = intercept + τ·slope` for `τ ≥ start`; inactive coordinates are
/// exactly zero in both vectors.
#[derive(Debug, Clone)]
pub(crate) struct Segment {
    pub start: f64,
    pub active: Vec<bool>,
    pub intercept: Vector,
    pub slope: Vector,
}

impl Segment {
    pub fn at(&self, tau: f64) -> Vector {
        let mut v = &self.intercept + &self.slope * tau;
        for (j, a) in self.active.iter().enumerate() {
            if !a {
                v[j] = 0.0;
            }
        }
        v
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HomotopyPath {
    pub segments: Vec<Segment>,
}

impl HomotopyPath {
    pub fn segment_index(&self, tau: f64) -> usize {
        self.segments.iter().rposition(|s| s.start <= tau).unwrap_or(0)
    }

    pub fn at(&self, tau: f64) -> Vector {
        self.segments[self.segment_index(tau)].at(tau)
    }

    /// Breakpoints (segment starts after the first).
    pub fn knots(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }
}

impl LinearQuadratic {
    pub fn p(&self) -> usize {
        self.g.len()
    }

    fn validate(&self) -> Result<()> {
        let p = self.p();
        if self.q.nrows() != p || self.q.ncols() != p || self.h.len() != p || self.abs_mask.len() != p {
            return Err(Error::Dimension {
                expected: p,
                got: self.q.nrows(),
            });
        }
        Ok(())
    }

    fn segment(&self, start: f64, active: &[bool], signs: &[f64]) -> Result<Segment> {
        let p = self.p();
        let idx: Vec<usize> = (0..p).filter(|&j| active[j]).collect();
        let mut intercept = Vector::zeros(p);
        let mut slope = Vector::zeros(p);
        if !idx.is_empty() {
            let qa = self.q.select_rows(&idx).select_columns(&idx);
            let chol = qa.clone().cholesky().ok_or_else(|| Error::SingularGram {
                min_eigenvalue: crate::linalg::min_eigenvalue(&qa),
            })?;
            let ga = Vector::from_iterator(idx.len(), idx.iter().map(|&j| -0.5 * self.g[j]));
            let da = Vector::from_iterator(idx.len(), idx.iter().map(|&j| -0.5 * (self.h[j] + signs[j])));
            let ia = chol.solve(&ga);
            let sa = chol.solve(&da);
            for (k, &j) in idx.iter().enumerate() {
                intercept[j] = ia[k];
                slope[j] = sa[k];
            }
        }
        Ok(Segment {
            start,
            active: active.to_vec(),
            intercept,
            slope,
        })
    }

    /// Gradient of the smooth part `2Qφ + g + τh`.
    #[cfg(test)]
    pub fn smooth_gradient(&self, phi: &Vector, tau: f64) -> Vector {
        &self.q * phi * 2.0 + &self.g + &self.h * tau
    }

    /// Largest violation of the subgradient optimality conditions.
    #[cfg(test)]
    pub fn kkt_residual(&self, phi: &Vector, tau: f64) -> f64 {
        let grad = self.smooth_gradient(phi, tau);
        (0..self.p())
            .map(|j| {
                if !self.abs_mask[j] {
                    grad[j].abs()
                } else if phi[j] != 0.0 {
                    (grad[j] + tau * phi[j].signum()).abs()
                } else {
                    (grad[j].abs() - tau).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Follows the path on `[0, tau_max]`.
    pub fn follow(&self, tau_max: f64, max_knots: usize) -> Result<HomotopyPath> {
        self.validate()?;
        let p = self.p();
        let all = vec![true; p];
        let zero_signs = vec![0.0; p];
        let unpenalized = self.segment(0.0, &all, &zero_signs)?;
        let mut active = vec![true; p];
        let mut signs = vec![0.0; p];
        for j in 0..p {
            if self.abs_mask[j] {
                let v = unpenalized.intercept[j];
                if v == 0.0 {
                    active[j] = false;
                } else {
                    signs[j] = v.signum();
                }
            }
        }
        let scale = 1.0 + self.g.amax();
        let mut tau = 0.0;
        let mut segments = Vec::new();
        loop {
            let seg = self.segment(tau, &active, &signs)?;
            let eps = 1e-12 * tau.max(1e-12 * scale);
            // (tau, coordinate, join sign; 0 = leave)
            let mut events: Vec<(f64, usize, f64)> = Vec::new();
            let q_int = &self.q * &seg.intercept;
            let q_slope = &self.q * &seg.slope;
            for j in 0..p {
                if !self.abs_mask[j] {
                    continue;
                }
                if active[j] {
                    let (a, b) = (seg.intercept[j], seg.slope[j]);
                    if b * signs[j] < 0.0 {
                        let te = -a / b;
                        events.push((te.max(tau), j, 0.0));
                    }
                } else {
                    let rho0 = -(2.0 * q_int[j] + self.g[j]);
                    let e = -(2.0 * q_slope[j] + self.h[j]);
                    for (den, num, sign) in [(1.0 - e, rho0, 1.0), (1.0 + e, -rho0, -1.0)] {
                        if den != 0.0 {
                            let te = num / den;
                            if te > tau + eps {
                                events.push((te, j, sign));
                            }
                        }
                    }
                }
            }
            let next = events.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
            segments.push(seg);
            if next >= tau_max || !next.is_finite() {
                break;
            }
            if segments.len() > max_knots {
                return Err(Error::TooManyBreakpoints { limit: max_knots });
            }
            let tie = 1e-12 * next.max(1e-12 * scale);
            let mut changed: Vec<usize> = Vec::new();
            for &(te, j, sign) in &events {
                if te <= next + tie && !changed.contains(&j) {
                    changed.push(j);
                    if sign == 0.0 {
                        active[j] = false;
                        signs[j] = 0.0;
                    } else {
                        active[j] = true;
                        signs[j] = sign;
                    }
                }
            }
            tau = next;
        }
        Ok(HomotopyPath { segments })
    }
}
