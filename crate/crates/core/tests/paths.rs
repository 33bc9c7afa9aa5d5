use penpath::contrasts::eval_contrast;
use penpath::linmodel::simulate;
use penpath::pathsolvers::{grid_path, l0_path, lasso_homotopy, lasso_kkt_residual, penalized_objective, ridge_path};
use penpath::{ContrastSpec, DesignDistribution, DesignSample, Matrix, NoiseSpec, PenaltySpec, TGrid, TrueModel, Vector};
use proptest::prelude::*;

fn model(beta: Vec<f64>) -> TrueModel {
    let p = beta.len();
    TrueModel {
        beta,
        noise: NoiseSpec::gaussian(1.0).unwrap(),
        design: DesignDistribution::StandardNormal { p },
        glm: None,
    }
}

fn ols(sample: &DesignSample, cols: &[usize]) -> Vector {
    let mut beta = Vector::zeros(sample.p());
    if cols.is_empty() {
        return beta;
    }
    let x = sample.x().select_columns(cols);
    let fit = (x.transpose() * &x).lu().solve(&(x.transpose() * sample.y())).unwrap();
    for (k, &j) in cols.iter().enumerate() {
        beta[j] = fit[k];
    }
    beta
}

#[test]
fn ridge_matches_normal_equations() {
    let s = simulate(&model(vec![1.0, -0.5, 0.0]), 50, 4).unwrap();
    let pen = PenaltySpec::new(2.0, s.n()).unwrap();
    let grid = TGrid::uniform(0.0, 10.0, 11).unwrap();
    let sol = ridge_path(&s, pen.weight(), &grid).unwrap();
    let n = s.n() as f64;
    for (i, &t) in grid.points().iter().enumerate() {
        let a = s.x().transpose() * s.x() / n + Matrix::identity(3, 3) * (t * pen.weight());
        let b = s.x().transpose() * s.y() / n;
        let expect = a.lu().solve(&b).unwrap();
        assert!((sol.beta_at(i) - expect).amax() < 1e-12, "t = {t}");
    }
}

#[test]
fn l0_matches_enumeration() {
    let s = simulate(&model(vec![1.0, 0.0, 0.3, 0.0]), 60, 8).unwrap();
    let (path, _) = l0_path(&ContrastSpec::LeastSquares, &s, 20.0).unwrap();
    let n = s.n() as f64;
    for k in 0..=80 {
        let t = k as f64 * 0.25;
        let mut best = f64::INFINITY;
        for mask in 0..16u32 {
            let cols: Vec<usize> = (0..4).filter(|j| mask & (1 << j) != 0).collect();
            let beta = ols(&s, &cols);
            let value = eval_contrast(&ContrastSpec::LeastSquares, &s, &beta).unwrap() + t * cols.len() as f64 / n;
            best = best.min(value);
        }
        assert!((path.objective_at(t) - best).abs() < 1e-12, "t = {t}");
    }
    let sizes: Vec<usize> = (0..=80).map(|k| path.support_at(k as f64 * 0.25).len()).collect();
    assert!(sizes.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn lad_path_is_certified_and_vanishes() {
    let s = simulate(&model(vec![1.5, 0.0]), 80, 21).unwrap();
    let pen = PenaltySpec::new(1.0, s.n()).unwrap();
    let grid = TGrid::uniform(0.0, 30.0, 31).unwrap();
    let sol = grid_path(&ContrastSpec::Lad, &pen, &s, &grid, 1e-10).unwrap();
    assert!(sol.max_kkt_residual() <= 1e-10);
    assert!(sol.coefficients.row(30).amax() == 0.0);
}

fn sample_strategy() -> impl Strategy<Value = DesignSample> {
    (1usize..5, 8usize..30, any::<u64>()).prop_map(|(p, n, seed)| {
        let beta: Vec<f64> = (0..p).map(|j| if j % 2 == 0 { 1.0 } else { 0.0 }).collect();
        simulate(&model(beta), n.max(p + 2), seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homotopy_satisfies_kkt_everywhere(s in sample_strategy(), frac in 0.0f64..1.2) {
        let pen = PenaltySpec::new(1.0, s.n()).unwrap();
        let path = lasso_homotopy(&s, pen.weight(), 50.0).unwrap();
        let t = frac * path.t_zero();
        let phi = path.at(t);
        let n = s.n() as f64;
        let gram = s.x().transpose() * s.x() / n;
        let cross = s.x().transpose() * s.y() / n;
        prop_assert!(lasso_kkt_residual(&gram, &cross, &phi, t * pen.weight()) < 1e-9);
        if frac >= 1.0 {
            prop_assert_eq!(phi.amax(), 0.0);
        }
    }

    #[test]
    fn optimal_value_is_nondecreasing_in_t(s in sample_strategy()) {
        let pen = PenaltySpec::new(1.0, s.n()).unwrap();
        let path = lasso_homotopy(&s, pen.weight(), 50.0).unwrap();
        let values: Vec<f64> = (0..=20)
            .map(|k| {
                let t = path.t_zero() * k as f64 / 20.0;
                penalized_objective(&ContrastSpec::LeastSquares, &pen, &s, &path.at(t), t).unwrap()
            })
            .collect();
        prop_assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn lad_solutions_have_small_kkt(s in sample_strategy(), t in 0.0f64..5.0, ridge in any::<bool>()) {
        let gamma = if ridge { 2.0 } else { 1.0 };
        let pen = PenaltySpec::new(gamma, s.n()).unwrap();
        let grid = TGrid::explicit(vec![t]).unwrap();
        let sol = grid_path(&ContrastSpec::Lad, &pen, &s, &grid, 1e-10).unwrap();
        prop_assert!(sol.kkt_residuals[0] <= 1e-10);
    }
}
