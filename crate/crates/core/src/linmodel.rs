//! Regression data, simulators and design statistics.

use std::io::Read;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Bernoulli, Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::rng::Stream;

/// Largest natural parameter accepted for the poisson family.
pub const POISSON_THETA_LIMIT: f64 = 30.0;

/// Observed regressors and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSample {
    x: Matrix,
    y: Vector,
}

impl DesignSample {
    pub fn new(x: Matrix, y: Vector) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("sample needs n >= 1 and p >= 1"));
        }
        if x.nrows() != y.len() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("sample contains non-finite entries"));
        }
        Ok(DesignSample { x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        DesignSample::new(linalg::from_rows(rows)?, Vector::from_column_slice(y))
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Gram matrix `n⁻¹ XᵀX`.
    pub fn gram(&self) -> Matrix {
        self.x.tr_mul(&self.x) / self.n() as f64
    }

    /// Cross moment `n⁻¹ Xᵀy`.
    pub fn cross(&self) -> Vector {
        self.x.tr_mul(&self.y) / self.n() as f64
    }

    /// Sample restricted to the given columns.
    pub fn select_columns(&self, cols: &[usize]) -> DesignSample {
        DesignSample {
            x: self.x.select_columns(cols),
            y: self.y.clone(),
        }
    }

    /// Reads a CSV with header `y,x1,...,xp`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv_from(file)
    }

    pub fn read_csv_from(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let p = headers.len().saturating_sub(1);
        if p == 0 || &headers[0] != "y" {
            return Err(Error::invalid("CSV header must be `y,x1,...,xp`"));
        }
        for (j, h) in headers.iter().skip(1).enumerate() {
            if h != format!("x{}", j + 1) {
                return Err(Error::invalid(format!(
                    "CSV header column {} is `{h}`, expected `x{}`",
                    j + 2,
                    j + 1
                )));
            }
        }
        let mut y = Vec::new();
        let mut xs = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != p + 1 {
                return Err(Error::invalid(format!("CSV row {} has {} fields", line + 1, rec.len())));
            }
            for (j, field) in rec.iter().enumerate() {
                let v = parse_decimal(field).ok_or_else(|| {
                    Error::invalid(format!("CSV row {} column {}: `{field}` is not a finite number", line + 1, j + 1))
                })?;
                if j == 0 {
                    y.push(v);
                } else {
                    xs.push(v);
                }
            }
        }
        if y.is_empty() {
            return Err(Error::invalid("CSV has no data rows"));
        }
        let n = y.len();
        DesignSample::new(Matrix::from_row_slice(n, p, &xs), Vector::from_vec(y))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.p()).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![fmt_f64(self.y[i])];
            rec.extend(self.x.row(i).iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_decimal(s: &str) -> Option<f64> {
    let ok = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    if !ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
    Uniform,
}

/// Centered i.i.d. noise with variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma2: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(NoiseSpec { kind, sigma2 })
    }

    pub fn gaussian(sigma2: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma2)
    }

    /// Zero-variance noise, for exact-recovery tests only.
    #[cfg(any(test, feature = "noiseless"))]
    pub fn noiseless() -> Self {
        NoiseSpec {
            kind: NoiseKind::Gaussian,
            sigma2: 0.0,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Density of the noise at zero.
    pub fn density_at_zero(&self) -> f64 {
        let s = self.sigma();
        match self.kind {
            NoiseKind::Gaussian => 1.0 / (2.0 * std::f64::consts::PI * self.sigma2).sqrt(),
            NoiseKind::Laplace => 1.0 / (s * std::f64::consts::SQRT_2),
            NoiseKind::Uniform => 1.0 / (2.0 * (3.0 * self.sigma2).sqrt()),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma2 == 0.0 {
            return 0.0;
        }
        let s = self.sigma();
        match self.kind {
            NoiseKind::Gaussian => s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
            NoiseKind::Laplace => {
                // difference of two unit exponentials has variance 2
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                s / std::f64::consts::SQRT_2 * (e1 - e2)
            }
            NoiseKind::Uniform => {
                let a = (3.0 * self.sigma2).sqrt();
                rng.random_range(-a..a)
            }
        }
    }
}

impl<'de> Deserialize<'de> for NoiseSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            kind: NoiseKind,
            sigma2: f64,
        }
        let raw = Raw::deserialize(d)?;
        #[cfg(feature = "noiseless")]
        if raw.sigma2 == 0.0 {
            return Ok(NoiseSpec {
                kind: raw.kind,
                sigma2: 0.0,
            });
        }
        NoiseSpec::new(raw.kind, raw.sigma2).map_err(serde::de::Error::custom)
    }
}

/// Canonical exponential families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmFamily {
    Logistic,
    Poisson,
    Gaussian,
}

impl GlmFamily {
    fn check(self, theta: f64) -> Result<()> {
        if self == GlmFamily::Poisson && theta.abs() > POISSON_THETA_LIMIT {
            return Err(Error::Overflow {
                theta: theta.abs(),
                limit: POISSON_THETA_LIMIT,
            });
        }
        Ok(())
    }

    /// Log-partition function `b(θ)`.
    pub fn b(self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(match self {
            // log(1 + e^θ) without overflow
            GlmFamily::Logistic => theta.max(0.0) + (-theta.abs()).exp().ln_1p(),
            GlmFamily::Poisson => theta.exp(),
            GlmFamily::Gaussian => 0.5 * theta * theta,
        })
    }

    pub fn b_prime(self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(match self {
            GlmFamily::Logistic => logistic(theta),
            GlmFamily::Poisson => theta.exp(),
            GlmFamily::Gaussian => theta,
        })
    }

    pub fn b_second(self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(match self {
            GlmFamily::Logistic => {
                let s = logistic(theta);
                s * (1.0 - s)
            }
            GlmFamily::Poisson => theta.exp(),
            GlmFamily::Gaussian => 1.0,
        })
    }

    pub fn sample<R: rand::Rng + ?Sized>(self, theta: f64, rng: &mut R) -> Result<f64> {
        let mean = self.b_prime(theta)?;
        Ok(match self {
            GlmFamily::Logistic => {
                let b = Bernoulli::new(mean).map_err(|e| Error::invalid(e.to_string()))?;
                if b.sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
            GlmFamily::Poisson => {
                if mean <= 0.0 {
                    0.0
                } else {
                    Poisson::new(mean).map_err(|e| Error::invalid(e.to_string()))?.sample(rng)
                }
            }
            GlmFamily::Gaussian => mean + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
        })
    }
}

fn logistic(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (1.0 + e)
    }
}

/// How regressors are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignDistribution {
    /// Deterministic rows, cycled: `x_k = rows[k mod m]`.
    Fixed { rows: Vec<Vec<f64>> },
    /// I.i.d. centered Gaussian rows with covariance `cov`.
    Gaussian { cov: Vec<Vec<f64>> },
    /// I.i.d. standard normal rows of dimension `p`.
    StandardNormal { p: usize },
}

impl DesignDistribution {
    pub fn dim(&self) -> usize {
        match self {
            DesignDistribution::Fixed { rows } => rows.first().map_or(0, Vec::len),
            DesignDistribution::Gaussian { cov } => cov.len(),
            DesignDistribution::StandardNormal { p } => *p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if p == 0 {
            return Err(Error::invalid("design dimension must be at least 1"));
        }
        match self {
            DesignDistribution::Fixed { rows } => {
                let m = linalg::from_rows(rows)?;
                if !m.iter().all(|v| v.is_finite()) {
                    return Err(Error::invalid("fixed design has non-finite entries"));
                }
            }
            DesignDistribution::Gaussian { cov } => {
                let c = linalg::from_rows(cov)?;
                if c.ncols() != p {
                    return Err(Error::invalid("design covariance must be square"));
                }
                linalg::pivoted_cholesky(&c, 1e-12)?;
            }
            DesignDistribution::StandardNormal { .. } => {}
        }
        Ok(())
    }

    /// `E[x xᵀ]`, the limit of the Gram matrix.
    pub fn second_moment(&self) -> Result<Matrix> {
        Ok(match self {
            DesignDistribution::Fixed { rows } => {
                let m = linalg::from_rows(rows)?;
                m.tr_mul(&m) / m.nrows() as f64
            }
            DesignDistribution::Gaussian { cov } => linalg::from_rows(cov)?,
            DesignDistribution::StandardNormal { p } => Matrix::identity(*p, *p),
        })
    }

    pub(crate) fn sample_matrix(&self, n: usize, rng: &mut crate::rng::Rng) -> Result<Matrix> {
        let p = self.dim();
        Ok(match self {
            DesignDistribution::Fixed { rows } => Matrix::from_fn(n, p, |i, j| rows[i % rows.len()][j]),
            DesignDistribution::StandardNormal { .. } => {
                let mut x = Matrix::zeros(n, p);
                for i in 0..n {
                    for j in 0..p {
                        x[(i, j)] = rng.sample(StandardNormal);
                    }
                }
                x
            }
            DesignDistribution::Gaussian { cov } => {
                let l = linalg::pivoted_cholesky(&linalg::from_rows(cov)?, 1e-12)?;
                let mut x = Matrix::zeros(n, p);
                let mut z = Vector::zeros(p);
                for i in 0..n {
                    for zj in z.iter_mut() {
                        *zj = rng.sample(StandardNormal);
                    }
                    let row = &l * &z;
                    for j in 0..p {
                        x[(i, j)] = row[j];
                    }
                }
                x
            }
        })
    }
}

/// Generating ground truth for simulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueModel {
    pub beta: Vec<f64>,
    pub noise: NoiseSpec,
    pub design: DesignDistribution,
    #[serde(default)]
    pub glm: Option<GlmFamily>,
}

impl TrueModel {
    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn beta_vector(&self) -> Vector {
        Vector::from_column_slice(&self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_empty() {
            return Err(Error::invalid("beta must have dimension p >= 1"));
        }
        if !self.beta.iter().all(|b| b.is_finite()) {
            return Err(Error::invalid("beta has non-finite entries"));
        }
        self.design.validate()?;
        if self.design.dim() != self.p() {
            return Err(Error::Dimension {
                expected: self.p(),
                got: self.design.dim(),
            });
        }
        Ok(())
    }
}

/// Draws a sample of size `n`. Pure in `(model, n, seed)`.
pub fn simulate(model: &TrueModel, n: usize, seed: u64) -> Result<DesignSample> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    model.validate()?;
    let stream = Stream::root(seed);
    let mut design_rng = stream.child(0).rng();
    let mut response_rng = stream.child(1).rng();
    let x = model.design.sample_matrix(n, &mut design_rng)?;
    let theta = &x * model.beta_vector();
    let y = match model.glm {
        Some(family) => {
            let mut y = Vector::zeros(n);
            for (yk, &th) in y.iter_mut().zip(theta.iter()) {
                *yk = family.sample(th, &mut response_rng)?;
            }
            y
        }
        None => theta.map(|th| th + model.noise.sample(&mut response_rng)),
    };
    DesignSample::new(x, y)
}

/// Gram statistics of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignStats {
    pub c_n: Matrix,
    pub c_limit: Option<Matrix>,
    pub max_row_norm_sq: f64,
    pub min_eigenvalue: f64,
}

impl DesignStats {
    /// Smallest eigenvalue of `c_n` is at most 1e-10.
    pub fn is_singular(&self) -> bool {
        self.min_eigenvalue <= 1e-10
    }
}

pub fn design_stats(sample: &DesignSample, c_limit: Option<Matrix>) -> Result<DesignStats> {
    if let Some(c) = &c_limit {
        if c.nrows() != sample.p() || c.ncols() != sample.p() {
            return Err(Error::Dimension {
                expected: sample.p(),
                got: c.nrows(),
            });
        }
    }
    let c_n = sample.gram();
    let max_row_norm_sq = sample
        .x()
        .row_iter()
        .map(|r| r.norm_squared())
        .fold(0.0, f64::max);
    Ok(DesignStats {
        min_eigenvalue: linalg::min_eigenvalue(&c_n),
        c_n,
        c_limit,
        max_row_norm_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn const_design(p: usize) -> DesignDistribution {
        DesignDistribution::Fixed {
            rows: vec![vec![1.0; p]],
        }
    }

    #[test]
    fn noiseless_identity_model() {
        let model = TrueModel {
            beta: vec![1.0],
            noise: NoiseSpec::noiseless(),
            design: const_design(1),
            glm: None,
        };
        let s = simulate(&model, 2, 5).unwrap();
        assert_eq!(s.y().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn simulate_is_deterministic() {
        let model = TrueModel {
            beta: vec![0.5, -1.0],
            noise: NoiseSpec::new(NoiseKind::Laplace, 2.0).unwrap(),
            design: DesignDistribution::StandardNormal { p: 2 },
            glm: None,
        };
        let a = simulate(&model, 50, 99).unwrap();
        let b = simulate(&model, 50, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&model, 50, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_mean_responses() {
        let model = TrueModel {
            beta: vec![0.0],
            noise: NoiseSpec::gaussian(1.0).unwrap(),
            design: const_design(1),
            glm: None,
        };
        assert_eq!(simulate(&model, 3, 1).unwrap().n(), 3);
        let big = simulate(&model, 1_000_000, 2).unwrap();
        let mean = big.y().mean();
        assert!(mean.abs() <= 0.01, "mean {mean}");
    }

    #[test]
    fn noise_variance_within_two_percent() {
        for kind in [NoiseKind::Gaussian, NoiseKind::Laplace, NoiseKind::Uniform] {
            let model = TrueModel {
                beta: vec![2.0, -1.0],
                noise: NoiseSpec::new(kind, 1.7).unwrap(),
                design: DesignDistribution::StandardNormal { p: 2 },
                glm: None,
            };
            let s = simulate(&model, 100_000, 3).unwrap();
            let resid = s.y() - s.x() * model.beta_vector();
            let m = resid.mean();
            let var = resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (s.n() - 1) as f64;
            assert!((var / 1.7 - 1.0).abs() < 0.02, "{kind:?}: {var}");
        }
    }

    #[test]
    fn density_at_zero_formulas() {
        let g = NoiseSpec::gaussian(1.0).unwrap();
        assert_relative_eq!(g.density_at_zero(), 0.398_942_280_401_432_7, epsilon = 1e-15);
        let l = NoiseSpec::new(NoiseKind::Laplace, 2.0).unwrap();
        assert_relative_eq!(l.density_at_zero(), 0.5, epsilon = 1e-15);
        let u = NoiseSpec::new(NoiseKind::Uniform, 1.0 / 3.0).unwrap();
        assert_relative_eq!(u.density_at_zero(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn poisson_overflow_is_rejected() {
        let model = TrueModel {
            beta: vec![40.0],
            noise: NoiseSpec::gaussian(1.0).unwrap(),
            design: const_design(1),
            glm: Some(GlmFamily::Poisson),
        };
        assert!(matches!(simulate(&model, 5, 0), Err(Error::Overflow { .. })));
    }

    #[test]
    fn rejects_zero_n() {
        let model = TrueModel {
            beta: vec![1.0],
            noise: NoiseSpec::gaussian(1.0).unwrap(),
            design: const_design(1),
            glm: None,
        };
        assert!(simulate(&model, 0, 0).is_err());
    }

    #[test]
    fn glm_log_partition_is_convex_and_consistent() {
        for fam in [GlmFamily::Logistic, GlmFamily::Poisson, GlmFamily::Gaussian] {
            for k in -20..=20 {
                let th = k as f64 * 0.5;
                assert!(fam.b_second(th).unwrap() >= 0.0);
                let h = 1e-5;
                let fd = (fam.b(th + h).unwrap() - fam.b(th - h).unwrap()) / (2.0 * h);
                let an = fam.b_prime(th).unwrap();
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fam:?} {th}");
            }
        }
    }

    #[test]
    fn design_stats_examples() {
        let s = DesignSample::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).unwrap();
        let st = design_stats(&s, None).unwrap();
        assert_eq!(st.c_n, Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
        assert_eq!(st.max_row_norm_sq, 1.0);

        let s = DesignSample::from_rows(&vec![vec![1.0, 1.0]; 4], &[0.0; 4]).unwrap();
        let st = design_stats(&s, None).unwrap();
        assert_eq!(st.c_n, Matrix::from_element(2, 2, 1.0));
        assert!(st.is_singular());
        assert!(st.min_eigenvalue.abs() < 1e-12);
    }

    #[test]
    fn gram_converges_for_iid_normal_rows() {
        let model = TrueModel {
            beta: vec![0.0, 0.0],
            noise: NoiseSpec::gaussian(1.0).unwrap(),
            design: DesignDistribution::StandardNormal { p: 2 },
            glm: None,
        };
        let s = simulate(&model, 100_000, 17).unwrap();
        let st = design_stats(&s, Some(Matrix::identity(2, 2))).unwrap();
        assert!((&st.c_n - Matrix::identity(2, 2)).amax() <= 0.05);
        assert!(crate::linalg::is_symmetric(&st.c_n, 1e-12));
    }

    #[test]
    fn max_row_norm_over_n_decreases() {
        let model = TrueModel {
            beta: vec![0.0, 0.0],
            noise: NoiseSpec::gaussian(1.0).unwrap(),
            design: DesignDistribution::StandardNormal { p: 2 },
            glm: None,
        };
        let ratios: Vec<f64> = [100usize, 1000, 10_000]
            .iter()
            .map(|&n| {
                let st = design_stats(&simulate(&model, n, 4).unwrap(), None).unwrap();
                st.max_row_norm_sq / n as f64
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    }

    #[test]
    fn csv_roundtrip_and_rejections() {
        let text = "y,x1,x2\n1.5,1,0\n-2,0.25,1e-3\n";
        let s = DesignSample::read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.p(), 2);
        assert_eq!(s.x()[(1, 1)], 1e-3);
        assert!(DesignSample::read_csv_from("y,x1\nnan,1\n".as_bytes()).is_err());
        assert!(DesignSample::read_csv_from("y,x1\ninf,1\n".as_bytes()).is_err());
        assert!(DesignSample::read_csv_from("y,z\n1,1\n".as_bytes()).is_err());
        assert!(DesignSample::read_csv_from("y,x1\n".as_bytes()).is_err());
    }

    #[test]
    fn model_config_json() {
        let js = r#"{"beta":[1,0],"noise":{"kind":"laplace","sigma2":2},"design":{"kind":"standard_normal","p":2},"glm":null}"#;
        let m: TrueModel = serde_json::from_str(js).unwrap();
        assert_eq!(m.beta, vec![1.0, 0.0]);
        assert_eq!(m.noise.kind, NoiseKind::Laplace);
        let bad = r#"{"beta":[1],"noise":{"kind":"gaussian","sigma2":-1},"design":{"kind":"standard_normal","p":1}}"#;
        assert!(serde_json::from_str::<TrueModel>(bad).is_err());
        let glm = r#"{"beta":[1],"noise":{"kind":"gaussian","sigma2":1},"design":{"kind":"fixed","rows":[[1]]},"glm":"logistic"}"#;
        let m: TrueModel = serde_json::from_str(glm).unwrap();
        assert_eq!(m.glm, Some(GlmFamily::Logistic));
    }
}
