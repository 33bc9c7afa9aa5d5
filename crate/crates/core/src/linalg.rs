//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = symmetrize(a);
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub fn is_symmetric(a: &Matrix, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.amax().max(1.0);
    (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol * scale))
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn solve_spd(a: &Matrix, b: &Vector) -> Result<Vector> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => Err(Error::SingularGram {
            min_eigenvalue: min_eigenvalue(a),
        }),
    }
}

/// Solves a general square system, falling back to least squares through the
/// SVD when the matrix is (numerically) singular.
pub fn solve_lstsq(a: &Matrix, b: &Vector) -> Vector {
    if a.nrows() == a.ncols() {
        if let Some(x) = a.clone().lu().solve(b) {
            if x.iter().all(|v| v.is_finite()) {
                return x;
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1e-300);
    svd.solve(b, tol).unwrap_or_else(|_| Vector::zeros(a.ncols()))
}

/// Lower-triangular factor `l` with `l lᵀ = cov` for a positive semidefinite
/// matrix, built by diagonal pivoting. Negative pivots below
/// `-tol * max diag` are reported through the smallest eigenvalue.
pub fn pivoted_cholesky(cov: &Matrix, tol: f64) -> Result<Matrix> {
    let p = cov.nrows();
    if cov.ncols() != p {
        return Err(Error::Dimension {
            expected: p,
            got: cov.ncols(),
        });
    }
    if !is_symmetric(cov, 1e-10) {
        return Err(Error::invalid("covariance matrix is not symmetric"));
    }
    let scale = (0..p).map(|i| cov[(i, i)].abs()).fold(0.0, f64::max);
    let floor = tol * scale.max(1.0);
    let min_eig = min_eigenvalue(cov);
    if min_eig < -floor {
        return Err(Error::Indefinite {
            eigenvalue: min_eig,
        });
    }
    let mut a = symmetrize(cov);
    let mut perm: Vec<usize> = (0..p).collect();
    let mut l = Matrix::zeros(p, p);
    for k in 0..p {
        // pivot on the largest remaining diagonal entry
        let (piv, dmax) = (k..p)
            .map(|i| (i, a[(perm[i], perm[i])]))
            .fold((k, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if dmax <= floor {
            break;
        }
        perm.swap(k, piv);
        let pk = perm[k];
        let d = dmax.sqrt();
        l[(pk, k)] = d;
        for &pi in &perm[k + 1..] {
            l[(pi, k)] = a[(pi, pk)] / d;
        }
        for i in k + 1..p {
            for j in k + 1..p {
                let (pi, pj) = (perm[i], perm[j]);
                a[(pi, pj)] -= l[(pi, k)] * l[(pj, k)];
            }
        }
    }
    Ok(l)
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Dimension {
            expected: ncols,
            got: bad.len(),
        });
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
