//! Normalized penalties `J_n^(γ)` and their local limits `J_∞^(γ)`.
//!
//! `J_n^(γ)(φ) = n^{(1∧γ)/2 − 1} Σ |φ_k|^γ` for `γ > 0`, and the count
//! penalty `n⁻¹ #{k : φ_k ≠ 0}` for `γ = 0`. The limit penalty is the local
//! expansion of `n J_n` around the true parameter and depends only on the
//! sign pattern (and, for `γ > 1`, the magnitudes) of `β`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Largest lattice accepted by [`check_limit_convergence`].
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Refinement factor of the cells around the coarse maxima.
pub const REFINE_FACTOR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub gamma: f64,
    pub n: usize,
}

impl PenaltySpec {
    pub fn new(gamma: f64, n: usize) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("penalty exponent must be >= 0, got {gamma}")));
        }
        if n == 0 {
            return Err(Error::invalid("penalty normalization needs n >= 1"));
        }
        Ok(PenaltySpec { gamma, n })
    }

    /// Normalizing factor `n^{(1∧γ)/2 − 1}`.
    pub fn weight(&self) -> f64 {
        normalization(self.gamma, self.n)
    }
}

pub fn normalization(gamma: f64, n: usize) -> f64 {
    (n as f64).powf(gamma.min(1.0) / 2.0 - 1.0)
}

/// `Σ |φ_k|^γ`, with the exact-zero count for `γ = 0`.
pub fn power_sum(gamma: f64, phi: &[f64]) -> f64 {
    if gamma == 0.0 {
        phi.iter().filter(|v| **v != 0.0).count() as f64
    } else if gamma == 1.0 {
        phi.iter().map(|v| v.abs()).sum()
    } else if gamma == 2.0 {
        phi.iter().map(|v| v * v).sum()
    } else {
        phi.iter().map(|v| v.abs().powf(gamma)).sum()
    }
}

pub fn eval_penalty(spec: &PenaltySpec, phi: &[f64]) -> f64 {
    spec.weight() * power_sum(spec.gamma, phi)
}

/// Sign and magnitude of one coordinate of `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinatePattern {
    pub sign: i8,
    pub magnitude: f64,
}

impl CoordinatePattern {
    pub fn is_null(&self) -> bool {
        self.sign == 0
    }
}

/// Limit penalty relative to the sign pattern of `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPenaltySpec {
    pub gamma: f64,
    pub pattern: Vec<CoordinatePattern>,
}

impl LimitPenaltySpec {
    pub fn new(gamma: f64, beta: &[f64]) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("penalty exponent must be >= 0, got {gamma}")));
        }
        let pattern = beta
            .iter()
            .map(|&b| CoordinatePattern {
                sign: if b > 0.0 {
                    1
                } else if b < 0.0 {
                    -1
                } else {
                    0
                },
                magnitude: b.abs(),
            })
            .collect();
        Ok(LimitPenaltySpec { gamma, pattern })
    }

    pub fn p(&self) -> usize {
        self.pattern.len()
    }

    /// Indices with `β_j = 0`.
    pub fn null_coordinates(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.pattern[j].is_null()).collect()
    }

    pub fn active_coordinates(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| !self.pattern[j].is_null()).collect()
    }

    /// Coefficients of the part of `J_∞` that is linear in `φ`
    /// (zero on null coordinates; zero everywhere for `γ < 1` and `γ = 0`).
    pub fn linear_coefficients(&self) -> Vector {
        Vector::from_iterator(
            self.p(),
            self.pattern.iter().map(|c| {
                if c.is_null() || self.gamma < 1.0 {
                    0.0
                } else if self.gamma == 1.0 {
                    c.sign as f64
                } else {
                    self.gamma * c.sign as f64 * c.magnitude.powf(self.gamma - 1.0)
                }
            }),
        )
    }

    /// Whether null coordinates carry a non-differentiable term.
    pub fn penalizes_null(&self) -> bool {
        self.gamma <= 1.0
    }
}

pub fn eval_limit_penalty(spec: &LimitPenaltySpec, phi: &[f64]) -> f64 {
    let g = spec.gamma;
    let mut acc = 0.0;
    for (c, &v) in spec.pattern.iter().zip(phi) {
        if c.is_null() {
            acc += if g == 0.0 {
                (v != 0.0) as u8 as f64
            } else if g <= 1.0 {
                if g == 1.0 {
                    v.abs()
                } else {
                    v.abs().powf(g)
                }
            } else {
                0.0
            };
        } else if g == 1.0 {
            acc += v * c.sign as f64;
        } else if g > 1.0 {
            acc += g * v * c.sign as f64 * c.magnitude.powf(g - 1.0);
        }
    }
    acc
}

/// `n J_n(β + n^{-1/2} φ) − n J_n(β) − J_∞(φ)`.
pub fn local_discrepancy(gamma: f64, beta: &[f64], limit: &LimitPenaltySpec, n: usize, phi: &[f64]) -> f64 {
    let spec = PenaltySpec { gamma, n };
    let nf = n as f64;
    let root = nf.sqrt();
    let moved: Vec<f64> = beta.iter().zip(phi).map(|(b, f)| b + f / root).collect();
    nf * eval_penalty(&spec, &moved) - nf * eval_penalty(&spec, beta) - eval_limit_penalty(limit, phi)
}

/// One row of the local-expansion table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub sup_discrepancy: f64,
    pub argmax: Vec<f64>,
    pub points: usize,
}

/// Sup over a lattice in the ball of radius `compact_radius` of the local
/// discrepancy, for each `n`. The cells around the largest coarse values are
/// re-scanned at `grid_step / REFINE_FACTOR`.
pub fn check_limit_convergence(
    gamma: f64,
    beta: &[f64],
    compact_radius: f64,
    n_values: &[usize],
    grid_step: f64,
) -> Result<Vec<ConvergenceRow>> {
    if !(compact_radius > 0.0) || !(grid_step > 0.0) {
        return Err(Error::invalid("radius and grid step must be positive"));
    }
    if n_values.is_empty() || n_values.windows(2).any(|w| w[1] <= w[0]) || n_values[0] == 0 {
        return Err(Error::invalid("n_values must be positive and strictly increasing"));
    }
    let p = beta.len();
    if p == 0 {
        return Err(Error::invalid("beta must be nonempty"));
    }
    let half = (compact_radius / grid_step).floor() as i64;
    let side = (2 * half + 1) as f64;
    let total = side.powi(p as i32);
    if total > MAX_GRID_POINTS as f64 {
        return Err(Error::TooLarge(format!(
            "lattice has {total:.3e} points (limit {MAX_GRID_POINTS}); increase grid_step to at least {:.3e}",
            2.0 * compact_radius / (MAX_GRID_POINTS as f64).powf(1.0 / p as f64)
        )));
    }
    let limit = LimitPenaltySpec::new(gamma, beta)?;
    let r2 = compact_radius * compact_radius * (1.0 + 1e-12);
    let lattice = lattice_points(p, half, grid_step, r2);

    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut scored: Vec<(f64, usize)> = lattice
            .iter()
            .enumerate()
            .map(|(i, phi)| (local_discrepancy(gamma, beta, &limit, n, phi).abs(), i))
            .collect();
        let mut best = (0.0, vec![0.0; p]);
        let mut count = lattice.len();
        for &(d, i) in &scored {
            if d > best.0 {
                best = (d, lattice[i].clone());
            }
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let fine = grid_step / REFINE_FACTOR as f64;
        let k = REFINE_FACTOR as i64;
        for &(_, i) in scored.iter().take(8) {
            let center = &lattice[i];
            for offset in lattice_points(p, k, fine, f64::INFINITY) {
                let phi: Vec<f64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
                if phi.iter().map(|v| v * v).sum::<f64>() > r2 {
                    continue;
                }
                count += 1;
                let d = local_discrepancy(gamma, beta, &limit, n, &phi).abs();
                if d > best.0 {
                    best = (d, phi);
                }
            }
        }
        rows.push(ConvergenceRow {
            n,
            sup_discrepancy: best.0,
            argmax: best.1,
            points: count,
        });
    }
    Ok(rows)
}

fn lattice_points(p: usize, half: i64, step: f64, r2: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![-half; p];
    loop {
        let phi: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if phi.iter().map(|v| v * v).sum::<f64>() <= r2 {
            out.push(phi);
        }
        let mut j = 0;
        loop {
            if j == p {
                return out;
            }
            idx[j] += 1;
            if idx[j] > half {
                idx[j] = -half;
                j += 1;
            } else {
                break;
            }
        }
    }
}

/// A constant `C` with
/// `n |J_n(φ) − J_n(β)| ≤ C (1 + √n‖φ−β‖ + √n‖φ−β‖^{1∨γ})` for all `φ`, `n`.
pub fn increment_bound_constant(gamma: f64, beta: &[f64]) -> f64 {
    let p = beta.len() as f64;
    if gamma <= 1.0 {
        p
    } else {
        let bmax = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        p * gamma * 2f64.powf(gamma - 2.0).max(1.0) * bmax.powf(gamma - 1.0).max(1.0)
    }
}

/// Ratio of the left side to the right side of the increment bound (without `C`).
pub fn increment_bound_ratio(gamma: f64, n: usize, beta: &[f64], phi: &[f64]) -> f64 {
    let spec = PenaltySpec { gamma, n };
    let nf = n as f64;
    let lhs = nf * (eval_penalty(&spec, phi) - eval_penalty(&spec, beta)).abs();
    let dist = beta
        .iter()
        .zip(phi)
        .map(|(b, f)| (b - f) * (b - f))
        .sum::<f64>()
        .sqrt();
    let rhs = 1.0 + nf.sqrt() * dist + nf.sqrt() * dist.powf(gamma.max(1.0));
    lhs / rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng as _;

    #[test]
    fn penalty_examples() {
        assert_relative_eq!(eval_penalty(&PenaltySpec::new(1.0, 100).unwrap(), &[3.0, 4.0]), 0.7, epsilon = 1e-15);
        assert_relative_eq!(eval_penalty(&PenaltySpec::new(2.0, 4).unwrap(), &[1.0, 1.0]), 1.0, epsilon = 1e-15);
        assert_relative_eq!(eval_penalty(&PenaltySpec::new(0.0, 10).unwrap(), &[0.0, 2.5, 0.0]), 0.1, epsilon = 1e-15);
        assert!(PenaltySpec::new(-1.0, 3).is_err());
        assert!(PenaltySpec::new(1.0, 0).is_err());
    }

    #[test]
    fn penalty_is_nonnegative_and_zero_at_origin() {
        let mut rng = substream(1, 1);
        for g in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let spec = PenaltySpec::new(g, 37).unwrap();
            assert_eq!(eval_penalty(&spec, &[0.0, 0.0, 0.0]), 0.0);
            for _ in 0..50 {
                let phi: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
                assert!(eval_penalty(&spec, &phi) >= 0.0);
            }
        }
    }

    #[test]
    fn limit_penalty_examples() {
        let beta = [1.0, 0.0];
        let phi = [2.0, -3.0];
        let l1 = LimitPenaltySpec::new(1.0, &beta).unwrap();
        assert_eq!(eval_limit_penalty(&l1, &phi), 5.0);
        let l2 = LimitPenaltySpec::new(2.0, &beta).unwrap();
        assert_eq!(eval_limit_penalty(&l2, &phi), 4.0);
        let l0 = LimitPenaltySpec::new(0.0, &beta).unwrap();
        assert_eq!(eval_limit_penalty(&l0, &phi), 1.0);
        let lh = LimitPenaltySpec::new(0.5, &beta).unwrap();
        assert_relative_eq!(eval_limit_penalty(&lh, &phi), 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn l0_limit_ignores_active_coordinates() {
        let l0 = LimitPenaltySpec::new(0.0, &[1.0, 0.0, -2.0]).unwrap();
        let mut rng = substream(4, 0);
        for _ in 0..100 {
            let a: f64 = rng.random_range(-3.0..3.0);
            let c: f64 = rng.random_range(-3.0..3.0);
            let v = eval_limit_penalty(&l0, &[a, 0.5, c]);
            assert_eq!(v, 1.0);
            assert_eq!(eval_limit_penalty(&l0, &[0.0, 0.5, 0.0]), v);
            let count = eval_limit_penalty(&l0, &[a, rng.random_range(-1.0..1.0), c]);
            assert!(count.fract() == 0.0 && count <= 3.0);
        }
    }

    #[test]
    fn l1_limit_is_linear_without_null_coordinates() {
        let l1 = LimitPenaltySpec::new(1.0, &[1.5, -0.5]).unwrap();
        let mut rng = substream(5, 0);
        for _ in 0..100 {
            let phi: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a: f64 = rng.random_range(0.1..10.0);
            let scaled: Vec<f64> = phi.iter().map(|v| a * v).collect();
            assert_relative_eq!(
                eval_limit_penalty(&l1, &scaled),
                a * eval_limit_penalty(&l1, &phi),
                epsilon = 1e-12,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn l1_limit_is_midpoint_convex() {
        let l1 = LimitPenaltySpec::new(1.0, &[1.0, 0.0, -1.0, 0.0]).unwrap();
        let mut rng = substream(6, 0);
        for _ in 0..100 {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            assert!(
                eval_limit_penalty(&l1, &mid)
                    <= 0.5 * (eval_limit_penalty(&l1, &a) + eval_limit_penalty(&l1, &b)) + 1e-12
            );
        }
    }

    #[test]
    fn l1_discrepancy_vanishes_beyond_radius() {
        // powers of four keep √n and the dyadic lattice exact in binary
        let rows = check_limit_convergence(1.0, &[1.0, 0.0], 3.0, &[4, 16, 64, 256, 4096], 0.25).unwrap();
        assert!(rows[0].sup_discrepancy > 0.0);
        for r in &rows[1..] {
            assert_eq!(r.sup_discrepancy, 0.0, "n = {}", r.n);
        }
        // away from exact binary arithmetic the identity holds up to rounding
        let rows = check_limit_convergence(1.0, &[1.0, 0.0], 3.0, &[100, 1000, 10_000], 0.25).unwrap();
        assert!(rows.iter().all(|r| r.sup_discrepancy <= 1e-12));
    }

    #[test]
    fn l0_discrepancy_vanishes_beyond_radius() {
        let rows = check_limit_convergence(0.0, &[1.0, 0.0], 2.0, &[4, 16, 64, 1024], 0.25).unwrap();
        assert!(rows[0].sup_discrepancy > 0.0);
        for r in &rows[1..] {
            assert_eq!(r.sup_discrepancy, 0.0);
        }
    }

    #[test]
    fn l2_discrepancy_decreases() {
        let rows = check_limit_convergence(2.0, &[1.0], 3.0, &[100, 1000, 10_000], 0.25).unwrap();
        let sups: Vec<f64> = rows.iter().map(|r| r.sup_discrepancy).collect();
        assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
        // the residual is φ²/√n exactly, maximal on the boundary of the ball
        assert_relative_eq!(sups[2], 9.0 / 100.0, max_relative = 1e-9);
        assert!(sups[2] <= 0.1);
    }

    #[test]
    fn oversized_lattice_is_refused() {
        let r = check_limit_convergence(1.0, &[1.0, 0.0, 0.0, 0.0], 10.0, &[100], 0.01);
        assert!(matches!(r, Err(Error::TooLarge(_))));
    }

    #[test]
    fn increment_bound_holds_on_random_probes() {
        let mut rng = substream(7, 0);
        for g in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
            for _ in 0..50 {
                let beta: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
                let c = increment_bound_constant(g, &beta);
                let phi: Vec<f64> = (0..3).map(|_| rng.random_range(-8.0..8.0)).collect();
                for n in [10, 1000] {
                    let ratio = increment_bound_ratio(g, n, &beta, &phi);
                    assert!(ratio <= c, "gamma {g}: {ratio} > {c}");
                }
            }
        }
    }

    #[test]
    fn penalty_at_truth_vanishes() {
        let mut rng = substream(8, 0);
        for g in [0.5, 1.0, 2.0] {
            for _ in 0..20 {
                let mut beta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                // at n = 10⁶, J_n^(1)(β) = 10⁻³‖β‖₁ and J_n^(2)(β) = 10⁻³‖β‖₂², so the
                // bound needs ‖β‖₁ < 10 and ‖β‖₂ < √10 respectively
                let (norm, target) = match g {
                    1.0 => (beta.iter().map(|b| b.abs()).sum::<f64>(), 9.9),
                    2.0 => (beta.iter().map(|b| b * b).sum::<f64>().sqrt(), 3.0),
                    _ => (beta.iter().map(|b| b * b).sum::<f64>().sqrt(), 10.0),
                };
                beta.iter_mut().for_each(|b| *b *= target / norm);
                let j = eval_penalty(&PenaltySpec::new(g, 1_000_000).unwrap(), &beta);
                assert!(j < 1e-2, "gamma {g}: {j}");
            }
        }
    }
}
