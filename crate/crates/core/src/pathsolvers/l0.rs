use crate::contrasts::{eval_contrast, eval_gradient, ContrastSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::linmodel::DesignSample;

use super::composite::{Composite, Reg, Smooth};
use super::lad::solve_lad;
use super::{PathSolution, TGrid};

/// Largest dimension for which all submodels are enumerated.
pub const MAX_L0_DIM: usize = 15;

const SUBMODEL_TOL: f64 = 1e-10;

/// Best submodel of one size.
#[derive(Debug, Clone)]
struct Submodel {
    support: Vec<usize>,
    value: f64,
    beta: Vector,
    residual: f64,
}

/// The piecewise-constant ℓ0 path `t ↦ argmin M_n(φ) + t n⁻¹ #{j : φ_j ≠ 0}`
/// on all of `[0, ∞)`.
#[derive(Debug, Clone)]
pub struct L0Path {
    n: usize,
    best: Vec<Submodel>,
    /// `(start, size)`: the envelope follows the best model of `size` from `start`.
    segments: Vec<(f64, usize)>,
    ties: Vec<f64>,
}

impl L0Path {
    /// Weights where the minimizing support changes; both sides attain the
    /// minimum there.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.0).collect()
    }

    /// Weights at which more than one support attains the minimum.
    pub fn ties(&self) -> &[f64] {
        &self.ties
    }

    fn segment(&self, t: f64) -> usize {
        // at an exact breakpoint the later (smaller) support is reported
        self.segments.iter().rposition(|s| s.0 <= t).unwrap_or(0)
    }

    pub fn at(&self, t: f64) -> Vector {
        self.best[self.segments[self.segment(t)].1].beta.clone()
    }

    pub fn support_at(&self, t: f64) -> &[usize] {
        &self.best[self.segments[self.segment(t)].1].support
    }

    pub fn objective_at(&self, t: f64) -> f64 {
        let k = self.segments[self.segment(t)].1;
        self.best[k].value + t * k as f64 / self.n as f64
    }

    /// The AIC solution `β̂(1)`.
    pub fn aic(&self) -> Vector {
        self.at(1.0)
    }

    /// Samples the path on `0`, the breakpoints below `t_max`, and `t_max`.
    pub fn solution(&self, t_max: f64) -> Result<PathSolution> {
        let mut pts = vec![0.0];
        pts.extend(self.breakpoints().into_iter().filter(|&t| t > 0.0 && t < t_max));
        if t_max > 0.0 {
            pts.push(t_max);
        }
        self.on_grid(&TGrid::breakpoints(pts)?, t_max)
    }

    pub fn on_grid(&self, tgrid: &TGrid, t_max: f64) -> Result<PathSolution> {
        let p = self.best.last().map(|m| m.beta.len()).unwrap_or(0);
        let mut coefficients = Matrix::zeros(tgrid.len(), p);
        let mut kkt = Vec::new();
        let mut obj = Vec::new();
        let mut sizes = Vec::new();
        for (i, &t) in tgrid.points().iter().enumerate() {
            let k = self.segments[self.segment(t)].1;
            let m = &self.best[k];
            coefficients.set_row(i, &m.beta.transpose());
            kkt.push(m.residual);
            obj.push(self.objective_at(t));
            sizes.push(k);
        }
        Ok(PathSolution {
            tgrid: tgrid.clone(),
            coefficients,
            breakpoints: Some(self.breakpoints().into_iter().filter(|&t| t <= t_max).collect()),
            kkt_residuals: kkt,
            objective_values: obj,
            support_sizes: sizes,
            t_zero: None,
            ties: self.ties.iter().copied().filter(|&t| t <= t_max).collect(),
        })
    }
}

fn solve_submodel(contrast: &ContrastSpec, sample: &DesignSample, support: &[usize]) -> Result<(Vector, f64)> {
    let p = sample.p();
    if support.is_empty() {
        return Ok((Vector::zeros(p), 0.0));
    }
    let sub = sample.select_columns(support);
    let (beta_s, residual) = match contrast {
        ContrastSpec::LeastSquares => {
            let b = linalg::solve_lstsq(sub.x(), sub.y());
            let r = eval_gradient(contrast, &sub, &b)?.amax();
            (b, r)
        }
        ContrastSpec::Lad => {
            let s = solve_lad(&sub, Reg::L2, 0.0, &Vector::zeros(sub.p()), SUBMODEL_TOL, 10_000)?;
            (s.phi, s.residual)
        }
        ContrastSpec::Glm(_) => {
            let comp = Composite {
                smooth: Smooth { spec: *contrast, sample: &sub },
                reg: Reg::L2,
                tau: 0.0,
            };
            let s = comp.minimize(&Vector::zeros(sub.p()), SUBMODEL_TOL, 10_000)?;
            (s.phi, s.residual)
        }
    };
    let mut beta = Vector::zeros(p);
    for (k, &j) in support.iter().enumerate() {
        beta[j] = beta_s[k];
    }
    Ok((beta, residual))
}

/// Exhaustive ℓ0 path.
///
/// The returned [`PathSolution`] is sampled on `0`, every breakpoint up to
/// `t_max`, and `t_max`; the full path (including the AIC solution) is in
/// the [`L0Path`].
pub fn l0_path(contrast: &ContrastSpec, sample: &DesignSample, t_max: f64) -> Result<(L0Path, PathSolution)> {
    let p = sample.p();
    if p > MAX_L0_DIM {
        let count = 1u64 << p.min(63);
        return Err(Error::TooLarge(format!(
            "p = {p} needs 2^{p} = {count} submodel fits of an n = {} sample (about {:.1e} flops); \
             exhaustive search is limited to p <= {MAX_L0_DIM}",
            sample.n(),
            count as f64 * sample.n() as f64 * (p * p) as f64
        )));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max must be finite and nonnegative"));
    }
    let mut best: Vec<Option<Submodel>> = vec![None; p + 1];
    let mut value_ties = Vec::new();
    for mask in 0u32..(1u32 << p) {
        let support: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        let (beta, residual) = solve_submodel(contrast, sample, &support).map_err(|e| Error::Submodel {
            support: support.iter().map(|j| j + 1).collect(),
            source: Box::new(e),
        })?;
        let value = eval_contrast(contrast, sample, &beta)?;
        let k = support.len();
        match &best[k] {
            Some(b) if b.value < value => {}
            Some(b) if b.value == value => value_ties.push(k),
            _ => {
                best[k] = Some(Submodel {
                    support,
                    value,
                    beta,
                    residual,
                })
            }
        }
    }
    let best: Vec<Submodel> = best.into_iter().map(|b| b.expect("every size is enumerated")).collect();
    let n = sample.n() as f64;

    // lower envelope of v_k + t k / n
    let mut start_k = 0;
    for k in 1..=p {
        if best[k].value < best[start_k].value {
            start_k = k;
        }
    }
    let mut ties = Vec::new();
    if (0..=p).any(|k| k != start_k && best[k].value == best[start_k].value) || value_ties.contains(&start_k) {
        ties.push(0.0);
    }
    let mut segments = vec![(0.0, start_k)];
    let (mut t_cur, mut k_cur) = (0.0f64, start_k);
    while k_cur > 0 {
        let mut next: Option<(f64, usize)> = None;
        for k in 0..k_cur {
            let cross = (best[k].value - best[k_cur].value) * n / (k_cur - k) as f64;
            let cross = cross.max(t_cur);
            // earliest crossing; among equal crossings the smallest model
            if next.is_none_or(|(t, kn)| cross < t || (cross == t && k < kn)) {
                next = Some((cross, k));
            }
        }
        let (t, k) = next.expect("smaller models exist");
        if segments.last().map(|s| s.0) == Some(t) {
            segments.pop();
        }
        segments.push((t, k));
        ties.push(t);
        t_cur = t;
        k_cur = k;
    }
    ties.dedup();
    let path = L0Path {
        n: sample.n(),
        best,
        segments,
        ties,
    };
    let sol = path.solution(t_max)?;
    Ok((path, sol))
}
