use crate::contrasts::ContrastSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::linmodel::DesignSample;
use crate::penalties::PenaltySpec;

use super::homotopy::{HomotopyPath, LinearQuadratic};
use super::{penalized_objective, support_size, PathSolution, TGrid};

/// Exact least-squares ℓ1 path in the penalty weight `t`, for
/// `Λ_n(φ, t) = n⁻¹‖y − Xφ‖² + t λ_n ‖φ‖₁`.
#[derive(Debug, Clone)]
pub struct LassoPath {
    lambda: f64,
    t_zero: f64,
    knots: Vec<f64>,
    problem: LinearQuadratic,
    path: HomotopyPath,
    gram: Matrix,
    cross: Vector,
}

/// Computes the lasso homotopy on `[0, t_max]`.
///
/// `t_zero` is `2 ‖Xᵀy‖∞ / (n λ_n)`; the path is exactly zero from there on.
pub fn lasso_homotopy(sample: &DesignSample, lambda_n: f64, t_max: f64) -> Result<LassoPath> {
    if !(lambda_n > 0.0 && lambda_n.is_finite()) {
        return Err(Error::invalid("lambda_n must be positive"));
    }
    if !(t_max > 0.0) {
        return Err(Error::invalid("t_max must be positive"));
    }
    let gram = sample.gram();
    let min_eig = linalg::min_eigenvalue(&gram);
    if min_eig <= 1e-10 {
        return Err(Error::SingularGram {
            min_eigenvalue: min_eig,
        });
    }
    let n = sample.n() as f64;
    let xty = sample.x().tr_mul(sample.y());
    let t_zero = 2.0 * xty.amax() / (n * lambda_n);
    let cross = xty / n;
    let p = sample.p();
    let problem = LinearQuadratic {
        q: gram.clone(),
        g: &cross * -2.0,
        h: Vector::zeros(p),
        abs_mask: vec![true; p],
    };
    let horizon = t_max.min(t_zero) * lambda_n;
    let mut path = problem.follow(horizon * (1.0 + 1e-9), 50 * p)?;
    // the segment on which every coordinate is inactive starts at t_zero
    if let Some(last) = path.segments.last_mut() {
        if last.active.iter().all(|a| !a) {
            last.start = t_zero * lambda_n;
        }
    }
    let knots: Vec<f64> = path
        .knots()
        .into_iter()
        .map(|tau| tau / lambda_n)
        .filter(|&t| t < t_zero)
        .chain(std::iter::once(t_zero))
        .collect();
    Ok(LassoPath {
        lambda: lambda_n,
        t_zero,
        knots,
        problem,
        path,
        gram,
        cross,
    })
}

impl LassoPath {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t_zero(&self) -> f64 {
        self.t_zero
    }

    /// Breakpoints in `t`, ending with `t_zero`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `β̂(t)`; exactly zero from `t_zero` on, allowing a few ulps of rounding
    /// in how `t_zero` was computed.
    pub fn at(&self, t: f64) -> Vector {
        if t >= self.t_zero * (1.0 - 4.0 * f64::EPSILON) {
            return Vector::zeros(self.problem.p());
        }
        self.path.at(t * self.lambda)
    }

    pub fn kkt_residual(&self, phi: &Vector, t: f64) -> f64 {
        lasso_kkt_residual(&self.gram, &self.cross, phi, t * self.lambda)
    }

    /// The path sampled at the given weights.
    pub fn on_grid(&self, sample: &DesignSample, tgrid: &TGrid) -> Result<PathSolution> {
        let p = self.problem.p();
        let penalty = PenaltySpec::new(1.0, sample.n())?;
        let mut coefficients = Matrix::zeros(tgrid.len(), p);
        let mut kkt = Vec::with_capacity(tgrid.len());
        let mut obj = Vec::with_capacity(tgrid.len());
        let mut sizes = Vec::with_capacity(tgrid.len());
        for (i, &t) in tgrid.points().iter().enumerate() {
            let phi = self.at(t);
            kkt.push(self.kkt_residual(&phi, t));
            obj.push(penalized_objective(&ContrastSpec::LeastSquares, &penalty, sample, &phi, t)?);
            sizes.push(support_size(&phi));
            coefficients.set_row(i, &phi.transpose());
        }
        Ok(PathSolution {
            tgrid: tgrid.clone(),
            coefficients,
            breakpoints: Some(self.knots.clone()),
            kkt_residuals: kkt,
            objective_values: obj,
            support_sizes: sizes,
            t_zero: Some(self.t_zero),
            ties: Vec::new(),
        })
    }

    /// The path sampled at `0`, every breakpoint up to `t_max`, and `t_max`.
    pub fn solution(&self, sample: &DesignSample, t_max: f64) -> Result<PathSolution> {
        let mut pts = vec![0.0];
        pts.extend(self.knots.iter().copied().filter(|&t| t > 0.0 && t < t_max));
        pts.push(t_max);
        pts.dedup();
        let grid = TGrid::breakpoints(pts)?;
        let mut sol = self.on_grid(sample, &grid)?;
        sol.breakpoints = Some(self.knots.iter().copied().filter(|&t| t <= t_max).collect());
        Ok(sol)
    }
}

/// KKT residual of `n⁻¹‖y − Xφ‖² + τ‖φ‖₁` from the Gram statistics.
pub fn lasso_kkt_residual(gram: &Matrix, cross: &Vector, phi: &Vector, tau: f64) -> f64 {
    let grad = (gram * phi - cross) * 2.0;
    (0..phi.len())
        .map(|j| {
            if phi[j] != 0.0 {
                (grad[j] + tau * phi[j].signum()).abs()
            } else {
                (grad[j].abs() - tau).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Exact lasso path on `[0, t_max]` with its breakpoints.
pub fn lasso_path(sample: &DesignSample, lambda_n: f64, t_max: f64) -> Result<PathSolution> {
    lasso_homotopy(sample, lambda_n, t_max)?.solution(sample, t_max)
}

/// `β̂(t) = (C_n + t λ_n I)⁻¹ n⁻¹Xᵀy` on the grid.
pub fn ridge_path(sample: &DesignSample, lambda_n: f64, tgrid: &TGrid) -> Result<PathSolution> {
    if !(lambda_n > 0.0 && lambda_n.is_finite()) {
        return Err(Error::invalid("lambda_n must be positive"));
    }
    let p = sample.p();
    let gram = sample.gram();
    let cross = sample.cross();
    let penalty = PenaltySpec::new(2.0, sample.n())?;
    let mut coefficients = Matrix::zeros(tgrid.len(), p);
    let mut kkt = Vec::new();
    let mut obj = Vec::new();
    let mut sizes = Vec::new();
    for (i, &t) in tgrid.points().iter().enumerate() {
        let a = &gram + Matrix::identity(p, p) * (t * lambda_n);
        let phi = linalg::solve_spd(&a, &cross)?;
        let grad = (&a * &phi - &cross) * 2.0;
        kkt.push(grad.amax());
        obj.push(penalized_objective(&ContrastSpec::LeastSquares, &penalty, sample, &phi, t)?);
        sizes.push(support_size(&phi));
        coefficients.set_row(i, &phi.transpose());
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
