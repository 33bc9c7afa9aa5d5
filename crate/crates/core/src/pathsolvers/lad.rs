//! Exact solvers for `n⁻¹ Σ|y_k − x_kᵀφ| + τ R(φ)`.
//!
//! With `R = ‖φ‖₁` (or `τ = 0`) the problem is a linear program: the penalty
//! rows `τ|φ_j| = τ|0 − e_jᵀφ|` are appended to the data and a vertex descent
//! moves between vertices along improving edges with an exact line search.
//! With `R = ‖φ‖₂²` and `τ > 0` an active-set method keeps the set of zero
//! residuals and solves the equality-constrained quadratic on each face.
//! Both certify the result with the minimum-norm subgradient.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::linmodel::DesignSample;

use super::composite::{Reg, Solved};

/// Weighted absolute-deviation rows `w_i |b_i − a_iᵀφ|`.
struct Rows {
    a: Matrix,
    b: Vector,
    w: Vector,
}

impl Rows {
    fn new(sample: &DesignSample, extra_l1: Option<f64>) -> Rows {
        let (n, p) = (sample.n(), sample.p());
        let m = n + if extra_l1.is_some() { p } else { 0 };
        let mut a = Matrix::zeros(m, p);
        let mut b = Vector::zeros(m);
        let mut w = Vector::from_element(m, 1.0 / n as f64);
        a.rows_mut(0, n).copy_from(sample.x());
        b.rows_mut(0, n).copy_from(sample.y());
        if let Some(tau) = extra_l1 {
            for j in 0..p {
                a[(n + j, j)] = 1.0;
                w[n + j] = tau;
            }
        }
        Rows { a, b, w }
    }

    fn len(&self) -> usize {
        self.b.len()
    }

    fn row(&self, i: usize) -> Vector {
        self.a.row(i).transpose()
    }
}

fn basis_matrix(rows: &Rows, basis: &[usize]) -> Matrix {
    let p = rows.a.ncols();
    Matrix::from_fn(basis.len(), p, |i, j| rows.a[(basis[i], j)])
}

/// Vertex descent for `Σ w_i |b_i − a_iᵀφ|`.
fn vertex_descent(rows: &Rows, start: &Vector, max_iter: usize) -> Result<(Vector, Vec<usize>, usize)> {
    let p = rows.a.ncols();
    let m = rows.len();
    let resid = &rows.b - &rows.a * start;
    let mut order: Vec<usize> = (0..m).collect();
    let closeness = |i: usize| resid[i].abs() / rows.a.row(i).norm().max(1e-300);
    order.sort_by(|&x, &y| closeness(x).total_cmp(&closeness(y)).then(x.cmp(&y)));
    let candidates: Vec<(Vector, f64)> = order.iter().map(|&i| (rows.row(i), rows.b[i])).collect();
    let mut basis: Vec<usize> = independent_rows(&candidates, p).into_iter().map(|k| order[k]).collect();
    if basis.len() < p {
        return Err(Error::SingularGram { min_eigenvalue: 0.0 });
    }
    let mut degenerate = false;
    for it in 0..max_iter {
        let bm = basis_matrix(rows, &basis);
        let lu = bm.clone().lu();
        let bk = Vector::from_iterator(p, basis.iter().map(|&i| rows.b[i]));
        let phi = lu.solve(&bk).ok_or(Error::SingularGram { min_eigenvalue: 0.0 })?;
        let r = &rows.b - &rows.a * &phi;
        let in_basis = |i: usize| basis.contains(&i);
        let mut g0 = Vector::zeros(p);
        for i in (0..m).filter(|&i| !in_basis(i)) {
            if r[i] != 0.0 {
                g0 -= rows.row(i) * (rows.w[i] * r[i].signum());
            }
        }
        // g0 = Bᵀu; optimal iff |u_k| ≤ w_k
        let u = bm.transpose().lu().solve(&g0).ok_or(Error::SingularGram { min_eigenvalue: 0.0 })?;
        let mut leaving: Vec<usize> = (0..p).filter(|&k| u[k].abs() > rows.w[basis[k]] * (1.0 + 1e-12)).collect();
        if leaving.is_empty() {
            return Ok((phi, basis, it));
        }
        if degenerate {
            // Bland's rule after a step of length zero
            leaving.sort_by_key(|&k| basis[k]);
        } else {
            leaving.sort_by(|&x, &y| {
                let vx = u[x].abs() - rows.w[basis[x]];
                let vy = u[y].abs() - rows.w[basis[y]];
                vy.total_cmp(&vx).then(x.cmp(&y))
            });
        }
        let mut moved = false;
        for k in leaving {
            let sigma = -u[k].signum();
            let mut e = Vector::zeros(p);
            e[k] = sigma;
            let Some(d) = lu.solve(&e) else { continue };
            let c = &rows.a * &d;
            let mut slope = rows.w[basis[k]];
            let mut breaks = Vec::new();
            for i in (0..m).filter(|&i| !in_basis(i)) {
                if c[i] == 0.0 {
                    continue;
                }
                if r[i] == 0.0 {
                    // a zero residual is a breakpoint at the start of the ray
                    slope -= rows.w[i] * c[i].abs();
                    breaks.push((0.0, 2.0 * rows.w[i] * c[i].abs(), i));
                    continue;
                }
                slope -= rows.w[i] * r[i].signum() * c[i];
                let t = r[i] / c[i];
                if t > 0.0 {
                    breaks.push((t, 2.0 * rows.w[i] * c[i].abs(), i));
                }
            }
            if slope >= 0.0 {
                continue;
            }
            breaks.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));
            let mut entering = None;
            for &(t, inc, i) in &breaks {
                slope += inc;
                if slope >= 0.0 {
                    entering = Some((t, i));
                    break;
                }
            }
            let Some((t, i)) = entering else {
                return Err(Error::Invalid("absolute-deviation objective is unbounded below".into()));
            };
            basis[k] = i;
            degenerate = t == 0.0;
            moved = true;
            break;
        }
        if !moved {
            return Ok((phi, basis, it));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Active-set method for `n⁻¹ Σ|y_k − x_kᵀφ| + τ‖φ‖₂²`, `τ > 0`.
fn ridge_active_set(sample: &DesignSample, tau: f64, start: &Vector, max_iter: usize) -> Result<(Vector, usize)> {
    let (n, p) = (sample.n(), sample.p());
    let (x, y) = (sample.x(), sample.y());
    let w = 1.0 / n as f64;
    let mut phi = start.clone();
    // residuals already at a kink start in the active set
    let fit = x * &phi;
    let near: Vec<usize> = (0..n)
        .filter(|&i| (y[i] - fit[i]).abs() <= 1e-12 * (1.0 + y[i].abs() + fit[i].abs()))
        .collect();
    let rows: Vec<(Vector, f64)> = near.iter().map(|&i| (x.row(i).transpose(), 0.0)).collect();
    let mut kinks: Vec<usize> = independent_rows(&rows, p).into_iter().map(|k| near[k]).collect();
    let mut released: Option<(usize, f64)> = None;
    for it in 0..max_iter {
        let r = y - x * &phi;
        let sign = |i: usize| match released {
            Some((j, s)) if j == i => s,
            _ => r[i].signum() * (r[i] != 0.0) as u8 as f64,
        };
        let mut g = Vector::zeros(p);
        for i in (0..n).filter(|i| !kinks.contains(i)) {
            g += x.row(i).transpose() * (w * sign(i));
        }
        let m = kinks.len();
        let mut kkt = Matrix::zeros(p + m, p + m);
        let mut rhs = Vector::zeros(p + m);
        for j in 0..p {
            kkt[(j, j)] = 2.0 * tau;
            rhs[j] = g[j];
        }
        for (q, &i) in kinks.iter().enumerate() {
            for j in 0..p {
                kkt[(p + q, j)] = x[(i, j)];
                kkt[(j, p + q)] = -x[(i, j)];
            }
            rhs[p + q] = y[i];
        }
        let sol = kkt.lu().solve(&rhs).ok_or(Error::SingularGram { min_eigenvalue: 0.0 })?;
        let target = sol.rows(0, p).into_owned();
        let d = &target - &phi;
        let c = x * &d;
        let mut hit: Option<(f64, usize)> = None;
        for i in (0..n).filter(|i| !kinks.contains(i)) {
            if matches!(released, Some((j, _)) if j == i) || r[i] == 0.0 || c[i] == 0.0 {
                continue;
            }
            let t = r[i] / c[i];
            if t > 0.0 && t < 1.0 && hit.is_none_or(|(best, _)| t < best) {
                hit = Some((t, i));
            }
        }
        released = None;
        if let Some((t, i)) = hit {
            phi += &d * t;
            let mut rows: Vec<(Vector, f64)> = kinks.iter().map(|&k| (x.row(k).transpose(), 0.0)).collect();
            rows.push((x.row(i).transpose(), 0.0));
            if independent_rows(&rows, p).len() == rows.len() {
                kinks.push(i);
            }
            continue;
        }
        phi = target;
        let worst = (0..m)
            .map(|q| (sol[p + q].abs() - w * (1.0 + 1e-12), q))
            .filter(|(v, _)| *v > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        match worst {
            None => return Ok((phi, it)),
            Some((_, q)) => {
                let i = kinks.remove(q);
                released = Some((i, sol[p + q].signum()));
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Certified LAD solve; `max_iter` bounds the pivots.
pub(crate) fn solve_lad(
    sample: &DesignSample,
    reg: Reg,
    tau: f64,
    start: &Vector,
    tol: f64,
    max_iter: usize,
) -> Result<Solved> {
    let p = sample.p();
    let (phi, iterations) = if reg == Reg::L2 && tau > 0.0 {
        ridge_active_set(sample, tau, start, max_iter)?
    } else {
        let extra = (reg == Reg::L1 && tau > 0.0).then_some(tau);
        let rows = Rows::new(sample, extra);
        let (mut phi, basis, it) = vertex_descent(&rows, start, max_iter)?;
        // coordinates pinned by a penalty row are exact zeros
        for &i in &basis {
            if i >= sample.n() {
                phi[i - sample.n()] = 0.0;
            }
        }
        debug_assert_eq!(phi.len(), p);
        (phi, it)
    };
    let residual = lad_residual(sample, reg, tau, &phi);
    if residual <= tol {
        Ok(Solved { phi, residual })
    } else {
        Err(Error::NonConvergence { iterations, residual })
    }
}

/// Minimizes `‖g0 + Σ ζ_i a_i‖₂` over `ζ ∈ [−1, 1]^m` and returns the
/// sup-norm of the minimizing vector.
fn min_norm_subgradient(g0: &Vector, kinks: &[Vector]) -> f64 {
    if kinks.is_empty() {
        return g0.amax();
    }
    let m = kinks.len();
    let a = Matrix::from_columns(kinks);
    // unconstrained least squares first; exact at a nondegenerate vertex
    let zeta_ls = linalg::solve_lstsq(&a, &-g0);
    let mut best = f64::INFINITY;
    if zeta_ls.iter().all(|z| z.abs() <= 1.0 + 1e-12) {
        let z = zeta_ls.map(|z| z.clamp(-1.0, 1.0));
        best = (g0 + &a * z).amax();
    }
    let mut zeta = zeta_ls.map(|z| if z.is_finite() { z.clamp(-1.0, 1.0) } else { 0.0 });
    let mut v = g0 + &a * &zeta;
    let norms: Vec<f64> = kinks.iter().map(|k| k.norm_squared()).collect();
    for _ in 0..20_000 {
        let mut change = 0.0f64;
        for i in 0..m {
            if norms[i] == 0.0 {
                continue;
            }
            let zi = (zeta[i] - kinks[i].dot(&v) / norms[i]).clamp(-1.0, 1.0);
            let dz = zi - zeta[i];
            if dz != 0.0 {
                v += &kinks[i] * dz;
                zeta[i] = zi;
                change = change.max(dz.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    best.min(v.amax())
}

fn kink_tolerance(y: f64, fitted: f64) -> f64 {
    1e-10 * (1.0 + y.abs() + fitted.abs())
}

/// KKT residual of `n⁻¹ Σ|y_k − x_kᵀφ| + τ Σ|φ_j|^γ` (`γ ∈ {1, 2}`): the
/// sup-norm of the smallest subgradient.
pub fn lad_kkt_residual(sample: &DesignSample, gamma: f64, tau: f64, phi: &Vector) -> Result<f64> {
    let reg = Reg::from_gamma(gamma)?;
    Ok(lad_residual(sample, reg, tau, phi))
}

fn lad_residual(sample: &DesignSample, reg: Reg, tau: f64, phi: &Vector) -> f64 {
    let n = sample.n() as f64;
    let p = sample.p();
    let fitted = sample.x() * phi;
    let mut g0 = Vector::zeros(p);
    let mut kinks = Vec::new();
    for k in 0..sample.n() {
        let r = sample.y()[k] - fitted[k];
        let xk = sample.x().row(k).transpose();
        if r.abs() <= kink_tolerance(sample.y()[k], fitted[k]) {
            kinks.push(-xk / n);
        } else {
            g0 -= xk * (r.signum() / n);
        }
    }
    match reg {
        Reg::L2 => g0 += phi * (2.0 * tau),
        Reg::L1 => {
            for j in 0..p {
                if phi[j] != 0.0 {
                    g0[j] += tau * phi[j].signum();
                } else if tau > 0.0 {
                    let mut e = Vector::zeros(p);
                    e[j] = tau;
                    kinks.push(e);
                }
            }
        }
    }
    min_norm_subgradient(&g0, &kinks)
}

/// Greedily picks rows (in order) that are linearly independent.
fn independent_rows(rows: &[(Vector, f64)], limit: usize) -> Vec<usize> {
    let mut basis: Vec<Vector> = Vec::new();
    let mut picked = Vec::new();
    for (i, (row, _)) in rows.iter().enumerate() {
        if picked.len() == limit {
            break;
        }
        let norm = row.norm();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.clone();
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let vn = v.norm();
        if vn > 1e-8 * norm {
            basis.push(v / vn);
            picked.push(i);
        }
    }
    picked
}
