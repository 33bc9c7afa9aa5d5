//! Unpenalized contrast processes and their population curvature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::linmodel::{DesignSample, GlmFamily, NoiseKind, TrueModel};

/// Which contrast `M_n` is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastSpec {
    /// `n⁻¹ Σ (y_k − x_kᵀφ)²`
    LeastSquares,
    /// `n⁻¹ Σ |y_k − x_kᵀφ|`
    Lad,
    /// Negated canonical log-likelihood `n⁻¹ Σ [−y_k x_kᵀφ + b(x_kᵀφ)]`.
    Glm(GlmFamily),
}

impl ContrastSpec {
    pub fn is_smooth(&self) -> bool {
        !matches!(self, ContrastSpec::Lad)
    }

    /// Short name used on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            ContrastSpec::LeastSquares => "ls",
            ContrastSpec::Lad => "lad",
            ContrastSpec::Glm(GlmFamily::Logistic) => "logistic",
            ContrastSpec::Glm(GlmFamily::Poisson) => "poisson",
            ContrastSpec::Glm(GlmFamily::Gaussian) => "gaussian_glm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ls" | "least_squares" => ContrastSpec::LeastSquares,
            "lad" => ContrastSpec::Lad,
            "logistic" => ContrastSpec::Glm(GlmFamily::Logistic),
            "poisson" => ContrastSpec::Glm(GlmFamily::Poisson),
            "gaussian_glm" => ContrastSpec::Glm(GlmFamily::Gaussian),
            _ => return None,
        })
    }
}

fn check_dim(sample: &DesignSample, phi: &Vector) -> Result<()> {
    if phi.len() != sample.p() {
        return Err(Error::Dimension {
            expected: sample.p(),
            got: phi.len(),
        });
    }
    Ok(())
}

/// `M_n(φ)`.
pub fn eval_contrast(spec: &ContrastSpec, sample: &DesignSample, phi: &Vector) -> Result<f64> {
    check_dim(sample, phi)?;
    let n = sample.n() as f64;
    let fitted = sample.x() * phi;
    let y = sample.y();
    Ok(match spec {
        ContrastSpec::LeastSquares => (y - &fitted).norm_squared() / n,
        ContrastSpec::Lad => (y - &fitted).abs().sum() / n,
        ContrastSpec::Glm(fam) => {
            let mut acc = 0.0;
            for (&yk, &th) in y.iter().zip(fitted.iter()) {
                acc += -yk * th + fam.b(th)?;
            }
            acc / n
        }
    })
}

/// Gradient of `M_n`; for LAD the subgradient with `sgn(0) = 0`.
pub fn eval_gradient(spec: &ContrastSpec, sample: &DesignSample, phi: &Vector) -> Result<Vector> {
    check_dim(sample, phi)?;
    let n = sample.n() as f64;
    let fitted = sample.x() * phi;
    let y = sample.y();
    let weights: Vector = match spec {
        ContrastSpec::LeastSquares => (&fitted - y) * 2.0,
        ContrastSpec::Lad => (&fitted - y).map(sgn),
        ContrastSpec::Glm(fam) => {
            let mut w = Vector::zeros(y.len());
            for k in 0..y.len() {
                w[k] = fam.b_prime(fitted[k])? - y[k];
            }
            w
        }
    };
    Ok(sample.x().tr_mul(&weights) / n)
}

/// Hessian of a smooth contrast.
pub fn eval_hessian(spec: &ContrastSpec, sample: &DesignSample, phi: &Vector) -> Result<Matrix> {
    check_dim(sample, phi)?;
    match spec {
        ContrastSpec::LeastSquares => Ok(sample.gram() * 2.0),
        ContrastSpec::Lad => Err(Error::invalid("LAD contrast has no Hessian")),
        ContrastSpec::Glm(fam) => {
            let fitted = sample.x() * phi;
            let mut w = Vector::zeros(sample.n());
            for k in 0..sample.n() {
                w[k] = fam.b_second(fitted[k])?;
            }
            Ok(weighted_gram(sample.x(), &w))
        }
    }
}

/// `n⁻¹ Σ w_k x_k x_kᵀ`
pub(crate) fn weighted_gram(x: &Matrix, w: &Vector) -> Matrix {
    let p = x.ncols();
    let mut h = Matrix::zeros(p, p);
    for (k, row) in x.row_iter().enumerate() {
        if w[k] == 0.0 {
            continue;
        }
        for i in 0..p {
            let a = w[k] * row[i];
            for j in 0..=i {
                h[(i, j)] += a * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            h[(j, i)] = h[(i, j)];
        }
    }
    h / x.nrows() as f64
}

pub(crate) fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-observation score `Δ(x, y)` at `φ`, the derivative of the loss term.
pub fn score(spec: &ContrastSpec, x: &[f64], y: f64, phi: &Vector) -> Result<Vector> {
    let xv = Vector::from_column_slice(x);
    let th = xv.dot(phi);
    let w = match spec {
        ContrastSpec::LeastSquares => -2.0 * (y - th),
        ContrastSpec::Lad => -sgn(y - th),
        ContrastSpec::Glm(fam) => fam.b_prime(th)? - y,
    };
    Ok(xv * w)
}

/// How a [`ScoreInfo`] feeds the limit contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitForm {
    /// `−2Uᵀφ + φᵀCφ` with `U ~ N(0, score_cov)` and `C = fisher_like`.
    Lasso,
    /// `Wᵀφ + ½ φᵀΓφ` with `W ~ N(0, score_cov)` and `Γ = fisher_like`,
    /// the second derivative of the population contrast.
    Pollard,
}

/// Curvature and score covariance of the population contrast at `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreInfo {
    pub form: LimitForm,
    pub fisher_like: Matrix,
    pub score_cov: Matrix,
}

impl ScoreInfo {
    /// Matrix `Q` of the quadratic term `φᵀQφ` in the limit contrast.
    pub fn quadratic(&self) -> Matrix {
        match self.form {
            LimitForm::Lasso => self.fisher_like.clone(),
            LimitForm::Pollard => &self.fisher_like * 0.5,
        }
    }

    /// Factor mapping a `N(0, score_cov)` draw to the linear term `g`.
    pub fn linear_scale(&self) -> f64 {
        match self.form {
            LimitForm::Lasso => -2.0,
            LimitForm::Pollard => 1.0,
        }
    }
}

/// Closed-form curvature of the population contrast.
pub fn limit_curvature(spec: &ContrastSpec, model: &TrueModel) -> Result<ScoreInfo> {
    model.validate()?;
    let second = model.design.second_moment()?;
    match (spec, model.glm) {
        (ContrastSpec::LeastSquares, None) => Ok(ScoreInfo {
            form: LimitForm::Lasso,
            score_cov: &second * model.noise.sigma2,
            fisher_like: second,
        }),
        (ContrastSpec::Lad, None) => {
            let f0 = model.noise.density_at_zero();
            if !matches!(
                model.noise.kind,
                NoiseKind::Gaussian | NoiseKind::Laplace | NoiseKind::Uniform
            ) || !f0.is_finite()
            {
                return Err(Error::NoClosedForm("noise density at zero unavailable".into()));
            }
            Ok(ScoreInfo {
                form: LimitForm::Pollard,
                fisher_like: &second * (2.0 * f0),
                score_cov: second,
            })
        }
        (ContrastSpec::Glm(fam), Some(model_fam)) if *fam == model_fam => {
            let fisher = glm_fisher(*fam, model)?;
            Ok(ScoreInfo {
                form: LimitForm::Pollard,
                fisher_like: fisher.clone(),
                score_cov: fisher,
            })
        }
        _ => Err(Error::NoClosedForm(format!(
            "contrast `{}` does not match the generating model",
            spec.name()
        ))),
    }
}

fn glm_fisher(fam: GlmFamily, model: &TrueModel) -> Result<Matrix> {
    use crate::linmodel::DesignDistribution as D;
    let beta = model.beta_vector();
    match &model.design {
        D::Fixed { rows } => {
            let x = crate::linalg::from_rows(rows)?;
            let th = &x * &beta;
            let mut w = Vector::zeros(x.nrows());
            for k in 0..x.nrows() {
                w[k] = fam.b_second(th[k])?;
            }
            Ok(weighted_gram(&x, &w))
        }
        _ if fam == GlmFamily::Gaussian => model.design.second_moment(),
        _ if beta.iter().all(|b| *b == 0.0) => Ok(model.design.second_moment()? * fam.b_second(0.0)?),
        _ => Err(Error::NoClosedForm(
            "E[b''(xᵀβ) x xᵀ] for a random design with β ≠ 0".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{simulate, DesignDistribution, NoiseSpec};
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn toy(y: &[f64]) -> DesignSample {
        let rows: Vec<Vec<f64>> = y.iter().map(|_| vec![1.0]).collect();
        DesignSample::from_rows(&rows, y).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn random_sample(seed: u64, n: usize, p: usize, binary: bool) -> DesignSample {
        let mut rng = substream(seed, 0);
        let x = Matrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = Vector::from_fn(n, |_, _| {
            let z: f64 = rng.sample(StandardNormal);
            if binary {
                (z > 0.0) as u8 as f64
            } else {
                z
            }
        });
        DesignSample::new(x, y).unwrap()
    }

    #[test]
    fn contrast_examples() {
        let s = toy(&[1.0, -1.0]);
        assert_eq!(eval_contrast(&ContrastSpec::LeastSquares, &s, &v(&[0.0])).unwrap(), 1.0);
        assert_eq!(eval_contrast(&ContrastSpec::Lad, &s, &v(&[0.0])).unwrap(), 1.0);
        let one = toy(&[1.0]);
        let lg = eval_contrast(&ContrastSpec::Glm(GlmFamily::Logistic), &one, &v(&[0.0])).unwrap();
        assert_relative_eq!(lg, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let s = toy(&[1.0, 1.0]);
        let g = eval_gradient(&ContrastSpec::LeastSquares, &s, &v(&[0.0])).unwrap();
        // central finite difference of (1/2)Σ(1 − φ)² at 0
        let h = 1e-6;
        let f = |x: f64| eval_contrast(&ContrastSpec::LeastSquares, &s, &v(&[x])).unwrap();
        let fd = (f(h) - f(-h)) / (2.0 * h);
        assert_relative_eq!(fd, -2.0, epsilon = 1e-8);
        assert_relative_eq!(g[0], -2.0, epsilon = 1e-15);

        let s = toy(&[1.0, -1.0]);
        assert_eq!(eval_gradient(&ContrastSpec::Lad, &s, &v(&[0.0])).unwrap()[0], 0.0);

        let one = toy(&[1.0]);
        let g = eval_gradient(&ContrastSpec::Glm(GlmFamily::Logistic), &one, &v(&[0.0])).unwrap();
        assert_relative_eq!(g[0], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn poisson_overflow_is_a_diagnostic() {
        let s = toy(&[1.0]);
        let r = eval_contrast(&ContrastSpec::Glm(GlmFamily::Poisson), &s, &v(&[31.0]));
        assert!(matches!(r, Err(Error::Overflow { .. })));
    }

    #[test]
    fn smooth_gradients_match_finite_differences() {
        let specs = [
            (ContrastSpec::LeastSquares, false),
            (ContrastSpec::Glm(GlmFamily::Logistic), true),
            (ContrastSpec::Glm(GlmFamily::Poisson), true),
            (ContrastSpec::Glm(GlmFamily::Gaussian), false),
        ];
        for (si, (spec, binary)) in specs.iter().enumerate() {
            let s = random_sample(si as u64, 40, 3, *binary);
            let mut rng = substream(100 + si as u64, 1);
            for _ in 0..20 {
                let phi = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                let g = eval_gradient(spec, &s, &phi).unwrap();
                let mut fd = Vector::zeros(3);
                for j in 0..3 {
                    let mut a = phi.clone();
                    let mut b = phi.clone();
                    a[j] += 1e-6;
                    b[j] -= 1e-6;
                    fd[j] = (eval_contrast(spec, &s, &a).unwrap() - eval_contrast(spec, &s, &b).unwrap()) / 2e-6;
                }
                let gmax = g.amax();
                assert!((&g - &fd).amax() <= 1e-5 * (1.0 + gmax), "{spec:?}");
                let h = eval_hessian(spec, &s, &phi).unwrap();
                for j in 0..3 {
                    let mut a = phi.clone();
                    let mut b = phi.clone();
                    a[j] += 1e-5;
                    b[j] -= 1e-5;
                    let col = (eval_gradient(spec, &s, &a).unwrap() - eval_gradient(spec, &s, &b).unwrap()) / 2e-5;
                    assert!((h.column(j) - col).amax() <= 1e-5 * (1.0 + h.amax()));
                }
            }
        }
    }

    #[test]
    fn contrasts_are_midpoint_convex() {
        let specs = [
            ContrastSpec::LeastSquares,
            ContrastSpec::Lad,
            ContrastSpec::Glm(GlmFamily::Logistic),
            ContrastSpec::Glm(GlmFamily::Poisson),
        ];
        for (si, spec) in specs.iter().enumerate() {
            let s = random_sample(7 + si as u64, 30, 2, matches!(spec, ContrastSpec::Glm(_)));
            let mut rng = substream(55, si as u64);
            for _ in 0..100 {
                let a = Vector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
                let b = Vector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
                let mid = (&a + &b) * 0.5;
                let m = eval_contrast(spec, &s, &mid).unwrap();
                let avg = 0.5 * (eval_contrast(spec, &s, &a).unwrap() + eval_contrast(spec, &s, &b).unwrap());
                assert!(m <= avg + 1e-10, "{spec:?}");
            }
        }
    }

    #[test]
    fn least_squares_translation_identity() {
        let model = TrueModel {
            beta: vec![1.0, -0.5, 0.0],
            noise: NoiseSpec::gaussian(1.0).unwrap(),
            design: DesignDistribution::StandardNormal { p: 3 },
            glm: None,
        };
        let mut rng = substream(3, 3);
        for seed in 0..10 {
            let s = simulate(&model, 60, seed).unwrap();
            let beta = model.beta_vector();
            let eps = s.y() - s.x() * &beta;
            let c_n = s.gram();
            let phi = Vector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let d = &phi - &beta;
            let lhs = eval_contrast(&ContrastSpec::LeastSquares, &s, &phi).unwrap()
                - eval_contrast(&ContrastSpec::LeastSquares, &s, &beta).unwrap();
            let rhs = d.dot(&(&c_n * &d)) - 2.0 / s.n() as f64 * eps.dot(&(s.x() * &d));
            assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn curvature_examples() {
        let lad = TrueModel {
            beta: vec![0.3, -0.2],
            noise: NoiseSpec::new(NoiseKind::Laplace, 2.0).unwrap(),
            design: DesignDistribution::StandardNormal { p: 2 },
            glm: None,
        };
        let info = limit_curvature(&ContrastSpec::Lad, &lad).unwrap();
        assert_relative_eq!(info.fisher_like, Matrix::identity(2, 2), epsilon = 1e-15);
        assert_eq!(info.form, LimitForm::Pollard);

        let glm = TrueModel {
            beta: vec![0.0],
            noise: NoiseSpec::gaussian(1.0).unwrap(),
            design: DesignDistribution::Fixed { rows: vec![vec![1.0]] },
            glm: Some(GlmFamily::Logistic),
        };
        let info = limit_curvature(&ContrastSpec::Glm(GlmFamily::Logistic), &glm).unwrap();
        assert_relative_eq!(info.fisher_like[(0, 0)], 0.25, epsilon = 1e-15);

        let no = TrueModel {
            beta: vec![1.0],
            design: DesignDistribution::StandardNormal { p: 1 },
            ..glm
        };
        assert!(matches!(
            limit_curvature(&ContrastSpec::Glm(GlmFamily::Logistic), &no),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn lad_curvature_matches_monte_carlo_hessian() {
        // second difference of δ ↦ mean |ε − δ| over 10⁶ gaussian draws
        let mut rng = substream(2024, 0);
        let eps: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
        let g = |d: f64| eps.iter().map(|e| (e - d).abs()).sum::<f64>() / eps.len() as f64;
        let h = 0.1;
        let fd = (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
        let model = TrueModel {
            beta: vec![0.0],
            noise: NoiseSpec::gaussian(1.0).unwrap(),
            design: DesignDistribution::Fixed { rows: vec![vec![1.0]] },
            glm: None,
        };
        let gamma = limit_curvature(&ContrastSpec::Lad, &model).unwrap().fisher_like[(0, 0)];
        assert_relative_eq!(gamma, 0.797_884_560_802_865_4, epsilon = 1e-12);
        assert!((fd / gamma - 1.0).abs() < 0.02, "fd {fd}");
    }

    #[test]
    fn scores_are_centered_at_truth() {
        let cases = [
            (
                ContrastSpec::LeastSquares,
                TrueModel {
                    beta: vec![1.0, 0.0],
                    noise: NoiseSpec::gaussian(1.0).unwrap(),
                    design: DesignDistribution::StandardNormal { p: 2 },
                    glm: None,
                },
            ),
            (
                ContrastSpec::Lad,
                TrueModel {
                    beta: vec![1.0, 0.0],
                    noise: NoiseSpec::new(NoiseKind::Laplace, 1.0).unwrap(),
                    design: DesignDistribution::StandardNormal { p: 2 },
                    glm: None,
                },
            ),
            (
                ContrastSpec::Glm(GlmFamily::Logistic),
                TrueModel {
                    beta: vec![0.5, -0.5],
                    noise: NoiseSpec::gaussian(1.0).unwrap(),
                    design: DesignDistribution::StandardNormal { p: 2 },
                    glm: Some(GlmFamily::Logistic),
                },
            ),
        ];
        for (spec, model) in cases {
            let s = simulate(&model, 100_000, 8).unwrap();
            let beta = model.beta_vector();
            let n = s.n();
            let scores: Vec<Vector> = (0..n)
                .map(|k| {
                    let row: Vec<f64> = s.x().row(k).iter().copied().collect();
                    score(&spec, &row, s.y()[k], &beta).unwrap()
                })
                .collect();
            for j in 0..2 {
                let mean = scores.iter().map(|d| d[j]).sum::<f64>() / n as f64;
                let var = scores.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                assert!(mean.abs() <= 3.0 * se, "{spec:?} coord {j}: {mean} vs se {se}");
            }
        }
    }
}
