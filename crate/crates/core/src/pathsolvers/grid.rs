use crate::contrasts::{ContrastSpec, eval_gradient};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::linmodel::{DesignSample, GlmFamily};
use crate::penalties::PenaltySpec;

use super::composite::{Composite, Reg, Smooth};
use super::lad::solve_lad;
use super::{penalized_objective, support_size, PathSolution, TGrid};

/// Coefficients beyond this size are treated as a diverging solve.
const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Bound on the reported KKT residual at every grid point.
    pub tol: f64,
    /// Iteration cap of one inner solve.
    pub max_iter: usize,
}

impl GridOptions {
    pub fn new(tol: f64) -> Self {
        GridOptions { tol, max_iter: 10_000 }
    }
}

/// Certified near-minimizers of `M_n(φ) + t J_n^(γ)(φ)`, `γ ∈ {1, 2}`, on
/// every grid weight, warm-started in increasing `t`.
pub fn grid_path(
    contrast: &ContrastSpec,
    penalty: &PenaltySpec,
    sample: &DesignSample,
    tgrid: &TGrid,
    tol: f64,
) -> Result<PathSolution> {
    grid_path_with(contrast, penalty, sample, tgrid, &GridOptions::new(tol))
}

pub fn grid_path_with(
    contrast: &ContrastSpec,
    penalty: &PenaltySpec,
    sample: &DesignSample,
    tgrid: &TGrid,
    options: &GridOptions,
) -> Result<PathSolution> {
    let reg = Reg::from_gamma(penalty.gamma)?;
    if penalty.n != sample.n() {
        return Err(Error::invalid(format!(
            "penalty is normalized for n = {} but the sample has n = {}",
            penalty.n,
            sample.n()
        )));
    }
    if !(options.tol > 0.0) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    let p = sample.p();
    let weight = penalty.weight();
    let mut coefficients = Matrix::zeros(tgrid.len(), p);
    let mut kkt = Vec::with_capacity(tgrid.len());
    let mut obj = Vec::with_capacity(tgrid.len());
    let mut sizes = Vec::with_capacity(tgrid.len());
    let mut warm = Vector::zeros(p);
    for (i, &t) in tgrid.points().iter().enumerate() {
        let tau = t * weight;
        let solved = match contrast {
            ContrastSpec::Lad => solve_lad(sample, reg, tau, &warm, options.tol, options.max_iter)?,
            _ => {
                let comp = Composite {
                    smooth: Smooth { spec: *contrast, sample },
                    reg,
                    tau,
                };
                let s = comp.minimize(&warm, options.tol, options.max_iter)?;
                check_divergence(contrast, sample, &s.phi, s.residual)?;
                s
            }
        };
        let phi = solved.phi;
        kkt.push(solved.residual);
        obj.push(penalized_objective(contrast, penalty, sample, &phi, t)?);
        sizes.push(support_size(&phi));
        coefficients.set_row(i, &phi.transpose());
        warm = phi;
    }
    Ok(PathSolution {
        tgrid: tgrid.clone(),
        coefficients,
        breakpoints: None,
        kkt_residuals: kkt,
        objective_values: obj,
        support_sizes: sizes,
        t_zero: None,
        ties: Vec::new(),
    })
}

/// A logistic fit that reproduces every label is only attained at infinity.
fn check_divergence(contrast: &ContrastSpec, sample: &DesignSample, phi: &Vector, residual: f64) -> Result<()> {
    let diverged = phi.amax() > DIVERGENCE_LIMIT
        || match contrast {
            ContrastSpec::Glm(GlmFamily::Logistic) => {
                let fitted = sample.x() * phi;
                let mut worst = 0.0f64;
                for k in 0..sample.n() {
                    let mu = GlmFamily::Logistic.b_prime(fitted[k])?;
                    worst = worst.max((sample.y()[k] - mu).abs());
                }
                worst < 1e-8
            }
            _ => false,
        };
    if diverged {
        let grad = eval_gradient(contrast, sample, phi)?;
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: residual.max(grad.amax()),
        });
    }
    Ok(())
}
