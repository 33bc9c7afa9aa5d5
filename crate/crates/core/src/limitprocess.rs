//! The limit path `t ↦ û(t)`, minimizer of the random contrast
//! `𝕃(φ, t) = gᵀφ + φᵀQφ + t J_∞(φ)`.
//!
//! The Gaussian linear term `g` is `−2U` (least squares, `U ~ N(0, σ²C)`) or
//! `W` (LAD and GLM, `W ~ N(0, P ΔΔᵀ)`); see [`ScoreInfo`].

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::contrasts::{limit_curvature, ContrastSpec, LimitForm, ScoreInfo};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::linmodel::{fmt_f64, TrueModel};
use crate::pathsolvers::homotopy::LinearQuadratic;
use crate::pathsolvers::TGrid;
use crate::penalties::{eval_limit_penalty, LimitPenaltySpec};
use crate::rng::{substream_seed, Stream};

/// Largest number of null coordinates enumerated for the count penalty.
pub const MAX_L0_NULL: usize = 20;
/// Largest dimension handled for exponents in `(0, 1)`.
pub const MAX_CONCAVE_DIM: usize = 3;

/// Relative objective gap under which two minimizers count as tied.
const TIE_TOL: f64 = 1e-12;

/// One realization of the limit contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitContrast {
    pub linear: Vector,
    pub quadratic: Matrix,
    pub limit_penalty: LimitPenaltySpec,
    /// Covariance of `U` (lasso form) or `W` (Pollard form).
    pub gaussian_cov: Matrix,
    pub form: LimitForm,
    /// Seed of the stream the linear term was drawn from.
    pub seed: Option<u64>,
}

impl LimitContrast {
    /// Checks dimensions, `Q ≻ 0` and `gaussian_cov ⪰ 0`.
    pub fn new(
        linear: Vector,
        quadratic: Matrix,
        limit_penalty: LimitPenaltySpec,
        gaussian_cov: Matrix,
        form: LimitForm,
    ) -> Result<Self> {
        let p = linear.len();
        for (r, c) in [quadratic.shape(), gaussian_cov.shape()] {
            if r != p || c != p {
                return Err(Error::Dimension { expected: p, got: r.max(c) });
            }
        }
        if limit_penalty.p() != p {
            return Err(Error::Dimension {
                expected: p,
                got: limit_penalty.p(),
            });
        }
        if !linalg::is_symmetric(&quadratic, 1e-10) {
            return Err(Error::invalid("quadratic term is not symmetric"));
        }
        let min_eig = linalg::min_eigenvalue(&quadratic);
        if min_eig <= 1e-10 {
            return Err(Error::SingularGram {
                min_eigenvalue: min_eig,
            });
        }
        linalg::pivoted_cholesky(&gaussian_cov, 1e-12)?;
        Ok(LimitContrast {
            linear,
            quadratic,
            limit_penalty,
            gaussian_cov,
            form,
            seed: None,
        })
    }

    pub fn p(&self) -> usize {
        self.linear.len()
    }

    pub fn gamma(&self) -> f64 {
        self.limit_penalty.gamma
    }

    /// `𝕃(φ, t)`.
    pub fn objective(&self, phi: &Vector, t: f64) -> f64 {
        let pen = if t == 0.0 { 0.0 } else { t * eval_limit_penalty(&self.limit_penalty, phi.as_slice()) };
        self.linear.dot(phi) + phi.dot(&(&self.quadratic * phi)) + pen
    }

    /// `û(0) = −Q⁻¹g / 2`.
    pub fn unpenalized(&self) -> Vector {
        linalg::solve_spd(&self.quadratic, &self.linear).expect("validated positive definite") * -0.5
    }

    /// Gradient of `gᵀφ + φᵀQφ`.
    fn smooth_gradient(&self, phi: &Vector) -> Vector {
        &self.quadratic * phi * 2.0 + &self.linear
    }

    /// Optimality residual of `φ` at weight `t`.
    ///
    /// For `γ ≥ 1` this is the subgradient condition. For `γ < 1` it is the
    /// stationarity of the smooth part on the nonzero coordinates, which is
    /// necessary but not sufficient for a global minimum.
    pub fn kkt_residual(&self, phi: &Vector, t: f64) -> f64 {
        let gamma = self.gamma();
        let grad = self.smooth_gradient(phi);
        let lin = self.limit_penalty.linear_coefficients();
        (0..self.p())
            .map(|j| {
                let null = self.limit_penalty.pattern[j].is_null();
                if !null || gamma > 1.0 {
                    (grad[j] + t * lin[j]).abs()
                } else if gamma == 1.0 {
                    if phi[j] != 0.0 {
                        (grad[j] + t * phi[j].signum()).abs()
                    } else {
                        (grad[j].abs() - t).max(0.0)
                    }
                } else if phi[j] == 0.0 {
                    0.0
                } else if gamma == 0.0 {
                    grad[j].abs()
                } else {
                    (grad[j] + t * gamma * phi[j].signum() * phi[j].abs().powf(gamma - 1.0)).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Precomputed pieces for repeated draws of the limit contrast of one model.
#[derive(Debug, Clone)]
pub struct LimitSampler {
    info: ScoreInfo,
    quadratic: Matrix,
    factor: Matrix,
    limit_penalty: LimitPenaltySpec,
}

impl LimitSampler {
    pub fn new(model: &TrueModel, contrast: &ContrastSpec, gamma: f64) -> Result<Self> {
        let info = limit_curvature(contrast, model)?;
        Self::from_info(info, LimitPenaltySpec::new(gamma, &model.beta)?)
    }

    pub fn from_info(info: ScoreInfo, limit_penalty: LimitPenaltySpec) -> Result<Self> {
        let factor = linalg::pivoted_cholesky(&info.score_cov, 1e-12)?;
        let quadratic = info.quadratic();
        // validate once
        LimitContrast::new(
            Vector::zeros(quadratic.nrows()),
            quadratic.clone(),
            limit_penalty.clone(),
            info.score_cov.clone(),
            info.form,
        )?;
        Ok(LimitSampler {
            info,
            quadratic,
            factor,
            limit_penalty,
        })
    }

    /// Draws `g` from the stream rooted at `seed`.
    pub fn draw(&self, seed: u64) -> LimitContrast {
        let p = self.quadratic.nrows();
        let mut rng = Stream::root(seed).rng();
        let z = Vector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let linear = &self.factor * z * self.info.linear_scale();
        LimitContrast {
            linear,
            quadratic: self.quadratic.clone(),
            limit_penalty: self.limit_penalty.clone(),
            gaussian_cov: self.info.score_cov.clone(),
            form: self.info.form,
            seed: Some(seed),
        }
    }
}

/// Draws one limit contrast from the stream rooted at `seed`.
pub fn build_limit_contrast(model: &TrueModel, contrast: &ContrastSpec, gamma: f64, seed: u64) -> Result<LimitContrast> {
    Ok(LimitSampler::new(model, contrast, gamma)?.draw(seed))
}

/// Minimizers of `𝕃(·, t)` over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPathDraw {
    pub tgrid: TGrid,
    /// Row `i` is `û(t_i)`.
    pub u_hat: Matrix,
    pub draw_seed: Option<u64>,
    /// `zero_mask[i][j]` is `û_j(t_i) == 0`.
    pub zero_mask: Vec<Vec<bool>>,
    pub kkt_residuals: Vec<f64>,
    pub objective_values: Vec<f64>,
    /// Grid weights at which the reported minimizer is not unique.
    pub ties: Vec<f64>,
}

impl LimitPathDraw {
    pub fn p(&self) -> usize {
        self.u_hat.ncols()
    }

    pub fn u_at(&self, i: usize) -> Vector {
        self.u_hat.row(i).transpose()
    }
}

/// Computes `û(t)` on every grid weight.
pub fn minimize_limit(contrast: &LimitContrast, tgrid: &TGrid) -> Result<LimitPathDraw> {
    let gamma = contrast.gamma();
    let p = contrast.p();
    let mut ties = Vec::new();
    let rows: Vec<Vector> = if gamma == 1.0 {
        lasso_type(contrast, tgrid)?
    } else if gamma > 1.0 {
        let lin = contrast.limit_penalty.linear_coefficients();
        let chol = contrast.quadratic.clone().cholesky().expect("validated positive definite");
        tgrid
            .points()
            .iter()
            .map(|&t| chol.solve(&(&contrast.linear + &lin * t)) * -0.5)
            .collect()
    } else if gamma == 0.0 {
        count_penalty(contrast, tgrid, &mut ties)?
    } else {
        concave(contrast, tgrid, &mut ties)?
    };
    let mut u_hat = Matrix::zeros(tgrid.len(), p);
    let mut zero_mask = Vec::with_capacity(tgrid.len());
    let mut kkt = Vec::with_capacity(tgrid.len());
    let mut obj = Vec::with_capacity(tgrid.len());
    for (i, (u, &t)) in rows.iter().zip(tgrid.points()).enumerate() {
        u_hat.set_row(i, &u.transpose());
        zero_mask.push(u.iter().map(|v| *v == 0.0).collect());
        kkt.push(contrast.kkt_residual(u, t));
        obj.push(contrast.objective(u, t));
    }
    Ok(LimitPathDraw {
        tgrid: tgrid.clone(),
        u_hat,
        draw_seed: contrast.seed,
        zero_mask,
        kkt_residuals: kkt,
        objective_values: obj,
        ties,
    })
}

fn lasso_type(contrast: &LimitContrast, tgrid: &TGrid) -> Result<Vec<Vector>> {
    let p = contrast.p();
    let problem = LinearQuadratic {
        q: contrast.quadratic.clone(),
        g: contrast.linear.clone(),
        h: contrast.limit_penalty.linear_coefficients(),
        abs_mask: (0..p).map(|j| contrast.limit_penalty.pattern[j].is_null()).collect(),
    };
    let t_max = tgrid.t_max();
    let path = problem.follow(t_max * (1.0 + 1e-9) + 1e-300, 50 * p.max(1))?;
    Ok(tgrid.points().iter().map(|&t| path.at(t)).collect())
}

/// Minimizer of `gᵀφ + φᵀQφ` over the coordinates in `free` (others zero).
fn restricted_min(contrast: &LimitContrast, free: &[usize]) -> (Vector, f64) {
    let p = contrast.p();
    let mut phi = Vector::zeros(p);
    if free.is_empty() {
        return (phi, 0.0);
    }
    let q = contrast.quadratic.select_rows(free).select_columns(free);
    let g = Vector::from_iterator(free.len(), free.iter().map(|&j| contrast.linear[j]));
    let sol = q.cholesky().expect("principal submatrix of a positive definite matrix").solve(&g) * -0.5;
    for (k, &j) in free.iter().enumerate() {
        phi[j] = sol[k];
    }
    // value at the minimizer: gᵀφ/2
    let value = 0.5 * g.dot(&sol);
    (phi, value)
}

fn count_penalty(contrast: &LimitContrast, tgrid: &TGrid, ties: &mut Vec<f64>) -> Result<Vec<Vector>> {
    let null = contrast.limit_penalty.null_coordinates();
    let active = contrast.limit_penalty.active_coordinates();
    if null.len() > MAX_L0_NULL {
        return Err(Error::TooLarge(format!(
            "{} null coordinates need 2^{} restricted solves; the limit is {MAX_L0_NULL}",
            null.len(),
            null.len()
        )));
    }
    // (value, size, minimizer), best first within each size
    let mut cands: Vec<(f64, usize, Vector)> = Vec::with_capacity(1 << null.len());
    for mask in 0u32..(1u32 << null.len()) {
        let mut free = active.clone();
        free.extend((0..null.len()).filter(|k| mask & (1 << k) != 0).map(|k| null[k]));
        free.sort_unstable();
        let (phi, value) = restricted_min(contrast, &free);
        cands.push((value, mask.count_ones() as usize, phi));
    }
    let mut rows = Vec::with_capacity(tgrid.len());
    for &t in tgrid.points() {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, (v, size, _)) in cands.iter().enumerate() {
            let obj = v + t * *size as f64;
            best = match best {
                None => Some((obj, *size, i)),
                Some((b, bs, _)) if obj < b || (obj == b && *size < bs) => Some((obj, *size, i)),
                keep => keep,
            };
        }
        let (b, _, bi) = best.expect("at least the empty support");
        let tied = cands
            .iter()
            .enumerate()
            .any(|(i, (v, size, _))| i != bi && (v + t * *size as f64 - b).abs() <= TIE_TOL * (1.0 + b.abs()));
        // among near-ties report the smallest support
        let pick = if tied {
            cands
                .iter()
                .enumerate()
                .filter(|(_, (v, size, _))| (v + t * *size as f64 - b).abs() <= TIE_TOL * (1.0 + b.abs()))
                .min_by(|a, b| a.1 .1.cmp(&b.1 .1).then(a.1 .0.total_cmp(&b.1 .0)))
                .map(|(i, _)| i)
                .unwrap_or(bi)
        } else {
            bi
        };
        if tied {
            ties.push(t);
        }
        rows.push(cands[pick].2.clone());
    }
    Ok(rows)
}

/// `γ ∈ (0, 1)`: local minimization in every orthant of every face, then
/// global comparison.
fn concave(contrast: &LimitContrast, tgrid: &TGrid, ties: &mut Vec<f64>) -> Result<Vec<Vector>> {
    let p = contrast.p();
    if p > MAX_CONCAVE_DIM {
        return Err(Error::TooLarge(format!(
            "exponents in (0, 1) give a nonconvex limit contrast; global minimization is limited to p <= {MAX_CONCAVE_DIM}, got p = {p}"
        )));
    }
    let null = contrast.limit_penalty.null_coordinates();
    let active = contrast.limit_penalty.active_coordinates();
    let gamma = contrast.gamma();
    let mut rows = Vec::with_capacity(tgrid.len());
    for &t in tgrid.points() {
        if t == 0.0 {
            rows.push(contrast.unpenalized());
            continue;
        }
        let mut cands: Vec<(f64, usize, Vector)> = Vec::new();
        for mask in 0u32..(1u32 << null.len()) {
            let on: Vec<usize> = (0..null.len()).filter(|k| mask & (1 << k) != 0).map(|k| null[k]).collect();
            for signs in 0u32..(1u32 << on.len()) {
                let sign: Vec<f64> = (0..on.len()).map(|k| if signs & (1 << k) != 0 { -1.0 } else { 1.0 }).collect();
                if let Some(phi) = orthant_min(contrast, t, gamma, &active, &on, &sign) {
                    cands.push((contrast.objective(&phi, t), on.len(), phi));
                }
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let best = cands[0].0;
        let near: Vec<&(f64, usize, Vector)> = cands
            .iter()
            .filter(|c| (c.0 - best).abs() <= TIE_TOL * (1.0 + best.abs()))
            .collect();
        let distinct = near.iter().any(|c| (&c.2 - &near[0].2).amax() > 1e-8);
        if distinct {
            ties.push(t);
        }
        let pick = near.iter().min_by_key(|c| c.1).expect("nonempty");
        rows.push(pick.2.clone());
    }
    Ok(rows)
}

/// Local minimum of `𝕃(·, t)` with `φ_j = 0` off `active ∪ on` and
/// `sign_k φ_{on_k} > 0`, from several starts; `None` if every run leaves
/// the open orthant.
fn orthant_min(
    contrast: &LimitContrast,
    t: f64,
    gamma: f64,
    active: &[usize],
    on: &[usize],
    sign: &[f64],
) -> Option<Vector> {
    let mut free: Vec<usize> = active.to_vec();
    free.extend_from_slice(on);
    if on.is_empty() {
        return Some(restricted_min(contrast, &free).0);
    }
    let p = contrast.p();
    let (base, _) = restricted_min(contrast, &free);
    let scale = base.amax().max(1.0);
    let mut best: Option<(f64, Vector)> = None;
    for start_mag in [1e-3, 0.1, 1.0, 10.0].map(|m| m * scale) {
        let mut phi = base.clone();
        for (k, &j) in on.iter().enumerate() {
            phi[j] = sign[k] * start_mag;
        }
        let f = |x: &Vector| -> f64 {
            for (k, &j) in on.iter().enumerate() {
                if sign[k] * x[j] <= 0.0 {
                    return f64::INFINITY;
                }
            }
            contrast.objective(x, t)
        };
        let mut converged = false;
        for _ in 0..500 {
            let mut grad = contrast.smooth_gradient(&phi);
            let mut hess = &contrast.quadratic * 2.0;
            for (k, &j) in on.iter().enumerate() {
                let a = sign[k] * phi[j];
                grad[j] += t * gamma * sign[k] * a.powf(gamma - 1.0);
                hess[(j, j)] += t * gamma * (gamma - 1.0) * a.powf(gamma - 2.0);
            }
            let gf = Vector::from_iterator(free.len(), free.iter().map(|&j| grad[j]));
            if gf.amax() <= 1e-12 * (1.0 + contrast.linear.amax()) {
                converged = true;
                break;
            }
            let hf = hess.select_rows(&free).select_columns(&free);
            let newton = hf.clone().cholesky().map(|c| c.solve(&-&gf));
            let dir = match newton {
                Some(d) if d.dot(&gf) < 0.0 => d,
                _ => -&gf,
            };
            let mut d = Vector::zeros(p);
            for (k, &j) in free.iter().enumerate() {
                d[j] = dir[k];
            }
            let f0 = f(&phi);
            let slope = gf.dot(&dir);
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-16 {
                let cand = &phi + &d * alpha;
                if f(&cand) <= f0 + 1e-4 * alpha * slope {
                    phi = cand;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                converged = gf.amax() <= 1e-8 * (1.0 + contrast.linear.amax());
                break;
            }
        }
        let inside = on.iter().zip(sign).all(|(&j, s)| s * phi[j] > 0.0);
        if converged && inside {
            let v = contrast.objective(&phi, t);
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, phi));
            }
        }
    }
    best.map(|b| b.1)
}

/// `draws` independent limit paths; draw `i` (1-based) uses substream `i` of
/// `seed`, so the result does not depend on the number of worker threads.
pub fn sample_limit_paths(
    model: &TrueModel,
    contrast: &ContrastSpec,
    gamma: f64,
    tgrid: &TGrid,
    draws: usize,
    seed: u64,
) -> Result<Vec<LimitPathDraw>> {
    LimitSampler::new(model, contrast, gamma)?.sample_paths(tgrid, draws, seed)
}

impl LimitSampler {
    /// Same as [`sample_limit_paths`] for an already assembled sampler.
    pub fn sample_paths(&self, tgrid: &TGrid, draws: usize, seed: u64) -> Result<Vec<LimitPathDraw>> {
        if draws == 0 {
            return Err(Error::invalid("draws must be at least 1"));
        }
        (1..=draws as u64)
            .into_par_iter()
            .map(|i| minimize_limit(&self.draw(substream_seed(seed, i)), tgrid))
            .collect()
    }
}

/// Writes `draw_id,t,u_1..u_p,zero_mask_1..zero_mask_p` with 1-based draw ids.
pub fn write_limit_csv(draws: &[LimitPathDraw], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let p = draws.first().map(|d| d.p()).unwrap_or(0);
    let mut header = vec!["draw_id".to_string(), "t".to_string()];
    header.extend((1..=p).map(|j| format!("u_{j}")));
    header.extend((1..=p).map(|j| format!("zero_mask_{j}")));
    w.write_record(&header)?;
    for (d, draw) in draws.iter().enumerate() {
        for (i, &t) in draw.tgrid.points().iter().enumerate() {
            let mut rec = vec![(d + 1).to_string(), fmt_f64(t)];
            rec.extend(draw.u_hat.row(i).iter().map(|v| fmt_f64(*v)));
            rec.extend(draw.zero_mask[i].iter().map(|z| (*z as u8).to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
