//! Regularization paths `t ↦ β̂_n(t)` minimizing `Λ_n(φ, t) = M_n(φ) + t J_n(φ)`.
//!
//! * [`lasso_path`] follows the least-squares ℓ1 path exactly through its
//!   breakpoints.
//! * [`ridge_path`] evaluates the closed-form ℓ2 path on a grid.
//! * [`grid_path`] certifies a near-minimizer at every grid value for any
//!   convex contrast with an ℓ1 or ℓ2 penalty.
//! * [`l0_path`] enumerates all submodels and takes the lower envelope.

mod composite;
mod grid;
mod lad;
pub(crate) mod homotopy;
mod l0;
mod lasso;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contrasts::{eval_contrast, ContrastSpec};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::linmodel::{fmt_f64, DesignSample};
use crate::penalties::{eval_penalty, PenaltySpec};

pub use composite::smooth_kkt_residual;
pub use lad::lad_kkt_residual;
pub use grid::{grid_path, GridOptions};
pub use l0::{l0_path, L0Path, MAX_L0_DIM};
pub use lasso::{lasso_homotopy, lasso_kkt_residual, lasso_path, ridge_path, LassoPath};

/// Default number of uniform grid points on `[0, t_max]`.
pub const DEFAULT_GRID_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TGridKind {
    Uniform { t_min: f64, t_max: f64, count: usize },
    Explicit,
    Breakpoints,
}

/// Finite, strictly increasing set of penalty weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    points: Vec<f64>,
    kind: TGridKind,
}

impl TGrid {
    fn checked(points: Vec<f64>, kind: TGridKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("t-grid is empty"));
        }
        if points.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid("t-grid values must be finite and nonnegative"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("t-grid must be strictly increasing"));
        }
        Ok(TGrid { points, kind })
    }

    pub fn uniform(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("t-grid needs at least one point"));
        }
        if count == 1 {
            if t_min != t_max {
                return Err(Error::invalid("a one-point t-grid needs t_min == t_max"));
            }
            return Self::checked(vec![t_min], TGridKind::Uniform { t_min, t_max, count });
        }
        if !(t_max > t_min) {
            return Err(Error::invalid("t_max must exceed t_min"));
        }
        let step = (t_max - t_min) / (count - 1) as f64;
        let mut points: Vec<f64> = (0..count).map(|i| t_min + i as f64 * step).collect();
        points[count - 1] = t_max;
        Self::checked(points, TGridKind::Uniform { t_min, t_max, count })
    }

    pub fn explicit(points: Vec<f64>) -> Result<Self> {
        Self::checked(points, TGridKind::Explicit)
    }

    pub fn breakpoints(points: Vec<f64>) -> Result<Self> {
        Self::checked(points, TGridKind::Breakpoints)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn kind(&self) -> &TGridKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.points.last().expect("nonempty grid")
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &s) in self.points.iter().enumerate() {
            if (s - t).abs() < (self.points[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

/// A solved path on a grid of penalty weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSolution {
    pub tgrid: TGrid,
    /// Row `i` is `β̂(t_i)`.
    pub coefficients: Matrix,
    pub breakpoints: Option<Vec<f64>>,
    pub kkt_residuals: Vec<f64>,
    pub objective_values: Vec<f64>,
    pub support_sizes: Vec<usize>,
    /// Smallest weight at which the whole path vanishes (lasso only).
    pub t_zero: Option<f64>,
    /// Grid weights at which several minimizers tie (ℓ0 only).
    pub ties: Vec<f64>,
}

impl PathSolution {
    pub fn p(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn beta_at(&self, i: usize) -> Vector {
        self.coefficients.row(i).transpose()
    }

    pub fn max_kkt_residual(&self) -> f64 {
        self.kkt_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Writes `t,beta_1..beta_p,objective,kkt_residual,support_size`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.p()).map(|j| format!("beta_{j}")));
        header.extend(["objective", "kkt_residual", "support_size"].map(String::from));
        w.write_record(&header)?;
        for (i, &t) in self.tgrid.points().iter().enumerate() {
            let mut rec = vec![fmt_f64(t)];
            rec.extend(self.coefficients.row(i).iter().map(|v| fmt_f64(*v)));
            rec.push(fmt_f64(self.objective_values[i]));
            rec.push(fmt_f64(self.kkt_residuals[i]));
            rec.push(self.support_sizes[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the breakpoints (empty list when the path has none) as JSON.
    pub fn write_breakpoints_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let list = self.breakpoints.clone().unwrap_or_default();
        std::fs::write(path, serde_json::to_string_pretty(&list)?)?;
        Ok(())
    }
}

/// `Λ_n(φ, t) = M_n(φ) + t J_n(φ)`.
pub fn penalized_objective(
    contrast: &ContrastSpec,
    penalty: &PenaltySpec,
    sample: &DesignSample,
    phi: &Vector,
    t: f64,
) -> Result<f64> {
    let pen = if t == 0.0 { 0.0 } else { t * eval_penalty(penalty, phi.as_slice()) };
    Ok(eval_contrast(contrast, sample, phi)? + pen)
}

pub(crate) fn support_size(phi: &Vector) -> usize {
    phi.iter().filter(|v| **v != 0.0).count()
}
