//! Self-check suites run by `penpath check`.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::contrasts::{eval_contrast, ContrastSpec};
use crate::error::{Error, Result};
use crate::limitprocess::{minimize_limit, sample_limit_paths, LimitContrast};
use crate::linalg::{Matrix, Vector};
use crate::linmodel::{simulate, DesignDistribution, DesignSample, GlmFamily, NoiseSpec, TrueModel};
use crate::montecarlo::{ks_two_sample, run_experiment, Experiment, ExperimentConfig, TGridConfig, Thresholds};
use crate::pathsolvers::{
    grid_path, lad_kkt_residual, lasso_homotopy, penalized_objective, ridge_path, smooth_kkt_residual, TGrid,
};
use crate::penalties::{
    check_limit_convergence, eval_limit_penalty, increment_bound_constant, increment_bound_ratio, LimitPenaltySpec,
    PenaltySpec,
};
use crate::rng::{substream, Rng};
use crate::LimitForm;

pub const SUITES: [&str; 6] = ["lemma1", "kkt", "oracle", "convexity", "determinism", "ks"];

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub passed: bool,
    pub cases: Vec<CaseResult>,
}

#[derive(Default)]
struct Cases(Vec<CaseResult>);

impl Cases {
    /// Records `value <= bound`.
    fn at_most(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.0.push(CaseResult {
            name: name.into(),
            value,
            bound,
            passed: value <= bound,
        });
    }

    fn holds(&mut self, name: impl Into<String>, ok: bool) {
        self.0.push(CaseResult {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            passed: ok,
        });
    }

    fn finish(self, suite: &str) -> SuiteResult {
        SuiteResult {
            suite: suite.to_string(),
            passed: self.0.iter().all(|c| c.passed),
            cases: self.0,
        }
    }
}

pub fn run_suite(name: &str) -> Result<SuiteResult> {
    match name {
        "lemma1" => penalty_expansion(),
        "kkt" => kkt(),
        "oracle" => oracle(),
        "convexity" => convexity(),
        "determinism" => determinism(),
        "ks" => ks(),
        other => Err(Error::invalid(format!(
            "unknown suite `{other}`; valid suites: {}",
            SUITES.join(", ")
        ))),
    }
}

fn penalty_expansion() -> Result<SuiteResult> {
    let mut c = Cases::default();
    // powers of four keep √n, and so the whole expansion, exact in binary
    for r in check_limit_convergence(1.0, &[1.0, 0.0], 3.0, &[16, 64, 256, 4096], 0.25)? {
        c.at_most(format!("gamma=1 exact at n={}", r.n), r.sup_discrepancy, 0.0);
    }
    for r in check_limit_convergence(0.0, &[1.0, 0.0], 2.0, &[16, 64, 1024], 0.25)? {
        c.at_most(format!("gamma=0 exact at n={}", r.n), r.sup_discrepancy, 0.0);
    }
    for (gamma, beta) in [(0.5, vec![1.0, 0.0]), (2.0, vec![1.0])] {
        let rows = check_limit_convergence(gamma, &beta, 3.0, &[100, 1000, 10_000], 0.25)?;
        let sups: Vec<f64> = rows.iter().map(|r| r.sup_discrepancy).collect();
        c.holds(
            format!("gamma={gamma} strictly decreasing {sups:?}"),
            sups.windows(2).all(|w| w[1] < w[0]),
        );
    }
    let mut rng = substream(0x1e3a, 0);
    for gamma in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let beta: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let phi: Vec<f64> = (0..3).map(|_| rng.random_range(-8.0..8.0)).collect();
            let constant = increment_bound_constant(gamma, &beta);
            for n in [10, 1000] {
                let ratio = increment_bound_ratio(gamma, n, &beta, &phi) / constant;
                worst = worst.max(ratio);
            }
        }
        c.at_most(format!("increment bound gamma={gamma}"), worst, 1.0);
    }
    Ok(c.finish("lemma1"))
}

fn random_sample(rng: &mut Rng, n: usize, p: usize) -> Result<DesignSample> {
    let x = Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    let beta = Vector::from_fn(p, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-1.0..1.0) });
    let noise = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + noise;
    DesignSample::new(x, y)
}

fn kkt() -> Result<SuiteResult> {
    let mut c = Cases::default();
    let mut rng = substream(0x4b4b, 0);
    let mut worst_lasso = 0.0f64;
    let mut zero_ok = true;
    for _ in 0..20 {
        let p = rng.random_range(1..=4);
        let n = rng.random_range(p + 5..40);
        let s = random_sample(&mut rng, n, p)?;
        let lambda = (n as f64).powf(-0.5);
        let path = lasso_homotopy(&s, lambda, f64::INFINITY)?;
        let mut pts = vec![0.0];
        let knots = path.knots().to_vec();
        let mut prev = 0.0;
        for &k in &knots {
            pts.push(0.5 * (prev + k));
            pts.push(k);
            prev = k;
        }
        for t in pts {
            worst_lasso = worst_lasso.max(path.kkt_residual(&path.at(t), t));
        }
        for f in [1.0, 1.5, 10.0] {
            zero_ok &= path.at(path.t_zero() * f).iter().all(|v| *v == 0.0);
        }
    }
    c.at_most("lasso KKT at knots and midpoints", worst_lasso, 1e-8);
    c.holds("lasso zero beyond t_zero", zero_ok);

    let tol = 1e-8;
    let grid = TGrid::uniform(0.0, 3.0, 7)?;
    for (label, spec) in [
        ("ls", ContrastSpec::LeastSquares),
        ("lad", ContrastSpec::Lad),
        ("logistic", ContrastSpec::Glm(GlmFamily::Logistic)),
    ] {
        for gamma in [1.0, 2.0] {
            let mut worst = 0.0f64;
            for _ in 0..5 {
                let p = rng.random_range(1..=3);
                let n = rng.random_range(15..40);
                let mut s = random_sample(&mut rng, n, p)?;
                if label == "logistic" {
                    let y = s.y().map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    s = DesignSample::new(s.x().clone(), y)?;
                }
                let pen = PenaltySpec::new(gamma, n)?;
                // t = 0 may have no logistic minimizer on separable draws
                let g = if label == "logistic" { TGrid::uniform(0.5, 3.0, 6)? } else { grid.clone() };
                let sol = grid_path(&spec, &pen, &s, &g, tol)?;
                for (i, &t) in g.points().iter().enumerate() {
                    let phi = sol.beta_at(i);
                    let tau = t * pen.weight();
                    let r = if label == "lad" {
                        lad_kkt_residual(&s, gamma, tau, &phi)?
                    } else {
                        smooth_kkt_residual(&spec, &s, gamma, tau, &phi)?
                    };
                    worst = worst.max(r);
                }
            }
            c.at_most(format!("grid solver KKT {label} gamma={gamma}"), worst, tol);
        }
    }
    let mut worst_ridge = 0.0f64;
    for _ in 0..10 {
        let s = random_sample(&mut rng, 20, 3)?;
        let sol = ridge_path(&s, 20f64.powf(-0.5), &grid)?;
        worst_ridge = worst_ridge.max(sol.max_kkt_residual());
    }
    c.at_most("ridge stationarity", worst_ridge, 1e-10);
    Ok(c.finish("kkt"))
}

/// Minimizes a convex function of one or two variables over a box by grid
/// search, refining a window around the best point until the step is `1e−5`.
pub fn grid_oracle(f: &dyn Fn(&[f64]) -> f64, p: usize, half_width: f64) -> Vec<f64> {
    let mut center = vec![0.0; p];
    let mut radius = half_width;
    let mut points = 400;
    loop {
        let step = 2.0 * radius / points as f64;
        let mut best = (f64::INFINITY, center.clone());
        let axis = |c: f64, k: usize| c - radius + k as f64 * step;
        if p == 1 {
            for i in 0..=points {
                let x = [axis(center[0], i)];
                let v = f(&x);
                if v < best.0 {
                    best = (v, x.to_vec());
                }
            }
        } else {
            for i in 0..=points {
                for j in 0..=points {
                    let x = [axis(center[0], i), axis(center[1], j)];
                    let v = f(&x);
                    if v < best.0 {
                        best = (v, x.to_vec());
                    }
                }
            }
        }
        center = best.1;
        if step <= 1e-5 * (1.0 + 1e-9) {
            return center;
        }
        radius = (4.0 * step).max(1e-5 * 20.0);
        points = ((2.0 * radius) / (step / 10.0).max(1e-5)).round() as usize;
    }
}

fn oracle() -> Result<SuiteResult> {
    let mut c = Cases::default();
    let mut rng = substream(0x0a0c, 0);
    let grid = TGrid::uniform(0.0, 4.0, 5)?;
    for (label, spec) in [("ls", ContrastSpec::LeastSquares), ("lad", ContrastSpec::Lad)] {
        for gamma in [1.0, 2.0] {
            let mut worst = 0.0f64;
            for _ in 0..3 {
                let p = rng.random_range(1..=2);
                let n = 25;
                let s = random_sample(&mut rng, n, p)?;
                let pen = PenaltySpec::new(gamma, n)?;
                let sol = grid_path(&spec, &pen, &s, &grid, 1e-10)?;
                for (i, &t) in grid.points().iter().enumerate() {
                    let f = |x: &[f64]| {
                        penalized_objective(&spec, &pen, &s, &Vector::from_column_slice(x), t).unwrap_or(f64::INFINITY)
                    };
                    let o = grid_oracle(&f, p, 4.0);
                    worst = worst.max((sol.beta_at(i) - Vector::from_vec(o)).amax());
                }
            }
            c.at_most(format!("grid solver vs grid oracle {label} gamma={gamma}"), worst, 1e-4);
        }
    }
    for gamma in [0.0, 1.0, 2.0] {
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let p = rng.random_range(1..=2);
            let beta: Vec<f64> = (0..p).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect();
            let a = Matrix::from_fn(p, p, |_, _| rng.random_range(-0.5..0.5));
            let q = &a * a.transpose() + Matrix::identity(p, p);
            let g = Vector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
            let lc = LimitContrast::new(g, q, LimitPenaltySpec::new(gamma, &beta)?, Matrix::identity(p, p), LimitForm::Lasso)?;
            let d = minimize_limit(&lc, &grid)?;
            for (i, &t) in grid.points().iter().enumerate() {
                let f = |x: &[f64]| lc.objective(&Vector::from_column_slice(x), t);
                let mut o = Vector::from_vec(grid_oracle(&f, p, 6.0));
                // the grid cannot represent exact zeros off the lattice; compare objectives there
                for j in 0..p {
                    if d.u_hat[(i, j)] == 0.0 && o[j].abs() < 1e-4 {
                        o[j] = 0.0;
                    }
                }
                worst = worst.max((d.u_at(i) - o).amax());
            }
        }
        c.at_most(format!("limit minimizer vs grid oracle gamma={gamma}"), worst, 1e-4);
    }
    Ok(c.finish("oracle"))
}

fn convexity() -> Result<SuiteResult> {
    let mut c = Cases::default();
    let mut rng = substream(0xc0c0, 0);
    let s = random_sample(&mut rng, 30, 3)?;
    let y01 = s.y().map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let logistic = DesignSample::new(s.x().clone(), y01)?;
    for (label, spec, sample) in [
        ("ls", ContrastSpec::LeastSquares, &s),
        ("lad", ContrastSpec::Lad, &s),
        ("logistic", ContrastSpec::Glm(GlmFamily::Logistic), &logistic),
    ] {
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let a = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let b = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let mid = (&a + &b) * 0.5;
            let gap = eval_contrast(&spec, sample, &mid)?
                - 0.5 * (eval_contrast(&spec, sample, &a)? + eval_contrast(&spec, sample, &b)?);
            worst = worst.max(gap);
        }
        c.at_most(format!("midpoint convexity of {label} contrast"), worst, 1e-12);
    }
    for gamma in [1.0, 1.5, 2.0] {
        let spec = LimitPenaltySpec::new(gamma, &[1.0, 0.0, -0.5])?;
        let q = Matrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.0]);
        let lc = LimitContrast::new(Vector::from_vec(vec![0.3, -1.0, 0.5]), q, spec, Matrix::identity(3, 3), LimitForm::Lasso)?;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..100 {
            let a = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let b = Vector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let t = rng.random_range(0.0..5.0);
            let mid = (&a + &b) * 0.5;
            worst = worst.max(lc.objective(&mid, t) - 0.5 * (lc.objective(&a, t) + lc.objective(&b, t)));
            let pen = &lc.limit_penalty;
            worst = worst.max(
                eval_limit_penalty(pen, mid.as_slice())
                    - 0.5 * (eval_limit_penalty(pen, a.as_slice()) + eval_limit_penalty(pen, b.as_slice())),
            );
        }
        c.at_most(format!("midpoint convexity of the limit contrast gamma={gamma}"), worst, 1e-12);
    }
    Ok(c.finish("convexity"))
}

fn determinism() -> Result<SuiteResult> {
    let mut c = Cases::default();
    let model = TrueModel {
        beta: vec![1.0, 0.0],
        noise: NoiseSpec::gaussian(1.0)?,
        design: DesignDistribution::StandardNormal { p: 2 },
        glm: None,
    };
    c.holds("simulate is pure in the seed", simulate(&model, 50, 9)? == simulate(&model, 50, 9)?);
    c.holds("distinct seeds differ", simulate(&model, 50, 9)? != simulate(&model, 50, 10)?);
    let grid = TGrid::uniform(0.0, 3.0, 7)?;
    let pool = |k: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Experiment(e.to_string()))
    };
    let draws = |k: usize| -> Result<Vec<Vec<f64>>> {
        pool(k)?.install(|| {
            Ok(sample_limit_paths(&model, &ContrastSpec::LeastSquares, 1.0, &grid, 40, 5)?
                .into_iter()
                .map(|d| d.u_hat.iter().copied().collect())
                .collect())
        })
    };
    c.holds("limit draws independent of worker count", draws(1)? == draws(4)?);
    let cfg = ExperimentConfig {
        model,
        contrast: ContrastSpec::LeastSquares,
        gamma: 1.0,
        tgrid: TGridConfig::Uniform {
            t_min: 0.0,
            t_max: 3.0,
            count: 7,
        },
        n_values: vec![50, 200],
        replicates: 50,
        limit_draws: 200,
        seed: 11,
        solver_tol: None,
        experiments: vec![Experiment::Consistency, Experiment::Nonuniformity, Experiment::Clt],
        probe_t: None,
        clt_n: None,
        thresholds: Thresholds::default(),
    };
    let report = |k: usize| -> Result<String> { pool(k)?.install(|| run_experiment(&cfg)?.to_json()) };
    c.holds("experiment report independent of worker count", report(1)? == report(4)?);
    Ok(c.finish("determinism"))
}

fn brute_force_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut d = 0.0f64;
    for &x in a.iter().chain(b) {
        let fa = a.iter().filter(|v| **v <= x).count() as f64 / a.len() as f64;
        let fb = b.iter().filter(|v| **v <= x).count() as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

fn ks() -> Result<SuiteResult> {
    let mut c = Cases::default();
    let mut rng = substream(0x6b73, 0);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let m = rng.random_range(1..=100);
        let n = rng.random_range(1..=100);
        // coarse values force ties
        let a: Vec<f64> = (0..m).map(|_| (rng.random_range(-3.0..3.0f64) * 4.0).round() / 4.0).collect();
        let b: Vec<f64> = (0..n).map(|_| (rng.random_range(-2.5..3.5f64) * 4.0).round() / 4.0).collect();
        worst = worst.max((ks_two_sample(&a, &b)? - brute_force_ks(&a, &b)).abs());
    }
    c.at_most("merge KS equals brute force", worst, 0.0);
    c.at_most("self comparison", ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])?, 0.0);
    Ok(c.finish("ks"))
}
