//! Monte Carlo experiments on simulated replicates: uniform consistency and
//! its rate, the non-uniformity of the convergence over the whole path, and
//! distributional agreement of normalized paths with limit-process draws.
//!
//! Replicate `r` at sample size `n` is simulated from substream
//! `seed → 1 → n → r`; limit draws come from substream `seed → 2`. Results are
//! collected in index order, so a report does not depend on the number of
//! worker threads.

mod ks;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrasts::{limit_curvature, ContrastSpec};
use crate::error::{Error, Result};
use crate::limitprocess::{sample_limit_paths, LimitPathDraw};
use crate::linalg::{Matrix, Vector};
use crate::linmodel::{fmt_f64, simulate, DesignSample, TrueModel};
use crate::pathsolvers::{grid_path, l0_path, lasso_homotopy, ridge_path, TGrid, MAX_L0_DIM};
use crate::penalties::{normalization, PenaltySpec};
use crate::rng::Stream;

pub use ks::{ks_critical_value, ks_sorted, ks_two_sample};

/// Smallest number of replicates accepted in a config.
pub const MIN_REPLICATES: usize = 50;

/// Magnitude below which grid-solver coefficients count as zero in
/// zero-frequency statistics (never applied to reported coefficients).
pub const ZERO_SNAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TGridConfig {
    Uniform {
        #[serde(default)]
        t_min: f64,
        t_max: f64,
        #[serde(default = "default_grid_points")]
        count: usize,
    },
    Explicit {
        points: Vec<f64>,
    },
}

fn default_grid_points() -> usize {
    crate::pathsolvers::DEFAULT_GRID_POINTS
}

impl TGridConfig {
    pub fn build(&self) -> Result<TGrid> {
        match self {
            TGridConfig::Uniform { t_min, t_max, count } => TGrid::uniform(*t_min, *t_max, *count),
            TGridConfig::Explicit { points } => TGrid::explicit(points.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Consistency,
    Nonuniformity,
    Clt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Finite,
    Limit,
}

/// Bound on the frequency with which one coordinate is exactly zero at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroFrequencyBound {
    pub ensemble: Ensemble,
    /// 1-based coordinate index.
    pub coordinate: usize,
    pub t: f64,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

/// Acceptance thresholds; a missing entry disables its check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default)]
    pub consistency_decreasing: bool,
    #[serde(default)]
    pub rate_ratio_band: Option<[f64; 2]>,
    #[serde(default)]
    pub nonuniformity_fraction: Option<f64>,
    #[serde(default)]
    pub ks_marginal: Option<f64>,
    #[serde(default)]
    pub ks_sup: Option<f64>,
    #[serde(default)]
    pub zero_frequency_gap: Option<f64>,
    #[serde(default)]
    pub zero_frequency_bounds: Vec<ZeroFrequencyBound>,
    #[serde(default)]
    pub support_monotone: bool,
    #[serde(default = "default_failure_rate")]
    pub max_failure_rate: f64,
}

fn default_failure_rate() -> f64 {
    0.01
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            consistency_decreasing: false,
            rate_ratio_band: None,
            nonuniformity_fraction: None,
            ks_marginal: None,
            ks_sup: None,
            zero_frequency_gap: None,
            zero_frequency_bounds: Vec::new(),
            support_monotone: false,
            max_failure_rate: default_failure_rate(),
        }
    }
}

mod contrast_name {
    use super::ContrastSpec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &ContrastSpec, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(c.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ContrastSpec, D::Error> {
        let name = String::deserialize(d)?;
        ContrastSpec::parse(&name).ok_or_else(|| {
            serde::de::Error::custom(format!(
                "unknown contrast `{name}`; expected ls, lad, logistic, poisson or gaussian_glm"
            ))
        })
    }
}

fn all_experiments() -> Vec<Experiment> {
    vec![Experiment::Consistency, Experiment::Nonuniformity, Experiment::Clt]
}

fn default_limit_draws() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: TrueModel,
    #[serde(with = "contrast_name")]
    pub contrast: ContrastSpec,
    /// Penalty exponent: 0 (count), 1 or 2.
    pub gamma: f64,
    pub tgrid: TGridConfig,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "default_limit_draws")]
    pub limit_draws: usize,
    pub seed: u64,
    /// KKT tolerance of the grid solves; defaults to `min(n_values)⁻²`.
    #[serde(default)]
    pub solver_tol: Option<f64>,
    #[serde(default = "all_experiments")]
    pub experiments: Vec<Experiment>,
    /// Weights of the marginal comparisons; defaults to
    /// `{0, middle grid point, 0.8 t_max}`.
    #[serde(default)]
    pub probe_t: Option<Vec<f64>>,
    /// Sample size of the distributional comparison; defaults to the largest `n`.
    #[serde(default)]
    pub clt_n: Option<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the JSON pointer of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let pointer = if path == "." {
                String::new()
            } else {
                format!("/{}", path.replace('.', "/").replace('[', "").replace(']', ""))
            };
            Error::config(pointer, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn p(&self) -> usize {
        self.model.p()
    }

    pub fn grid(&self) -> Result<TGrid> {
        self.tgrid.build()
    }

    pub fn min_n(&self) -> usize {
        self.n_values.iter().copied().min().unwrap_or(1)
    }

    pub fn tol(&self) -> f64 {
        self.solver_tol.unwrap_or_else(|| (self.min_n() as f64).powi(-2))
    }

    pub fn clt_n(&self) -> usize {
        self.clt_n.unwrap_or_else(|| self.n_values.iter().copied().max().unwrap_or(1))
    }

    pub fn probes(&self) -> Result<Vec<f64>> {
        match &self.probe_t {
            Some(p) => Ok(p.clone()),
            None => {
                let g = self.grid()?;
                let pts = g.points();
                let mut v = vec![0.0, pts[(pts.len() - 1) / 2], 0.8 * g.t_max()];
                v.sort_by(f64::total_cmp);
                v.dedup();
                Ok(v)
            }
        }
    }

    pub fn runs(&self, e: Experiment) -> bool {
        self.experiments.contains(&e)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::config("/model", e))?;
        if !(self.gamma == 0.0 || self.gamma == 1.0 || self.gamma == 2.0) {
            return Err(Error::config("/gamma", "penalty exponent must be 0, 1 or 2"));
        }
        if self.gamma == 0.0 && self.p() > MAX_L0_DIM {
            return Err(Error::config(
                "/model/beta",
                format!("the count penalty enumerates submodels and is limited to p <= {MAX_L0_DIM}"),
            ));
        }
        match (&self.contrast, self.model.glm) {
            (ContrastSpec::Glm(f), Some(g)) if *f == g => {}
            (ContrastSpec::Glm(_), _) => {
                return Err(Error::config("/contrast", "GLM contrast needs a model with the same `glm` family"))
            }
            (_, Some(_)) => return Err(Error::config("/contrast", "a GLM model needs its GLM contrast")),
            _ => {}
        }
        let grid = self.tgrid.build().map_err(|e| Error::config("/tgrid", e))?;
        if self.n_values.is_empty() {
            return Err(Error::config("/n_values", "at least one sample size is required"));
        }
        for (i, &n) in self.n_values.iter().enumerate() {
            if n <= self.p() {
                return Err(Error::config(format!("/n_values/{i}"), format!("n = {n} must exceed p = {}", self.p())));
            }
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("/n_values", "sample sizes must be strictly increasing"));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::config(
                "/replicates",
                format!("{} replicates is below the minimum of {MIN_REPLICATES}", self.replicates),
            ));
        }
        if let Some(tol) = self.solver_tol {
            let cap = 1.0 / self.min_n() as f64;
            if !(tol > 0.0 && tol <= cap) {
                return Err(Error::config(
                    "/solver_tol",
                    format!("solver_tol must lie in (0, 1/min(n_values)] = (0, {cap}]"),
                ));
            }
        }
        if self.experiments.is_empty() {
            return Err(Error::config("/experiments", "no experiment selected"));
        }
        if self.runs(Experiment::Nonuniformity) && !(self.contrast == ContrastSpec::LeastSquares && self.gamma == 1.0) {
            return Err(Error::config(
                "/experiments",
                "the non-uniformity experiment needs the least-squares contrast with gamma = 1",
            ));
        }
        if self.runs(Experiment::Clt) {
            if self.limit_draws == 0 {
                return Err(Error::config("/limit_draws", "at least one limit draw is required"));
            }
            limit_curvature(&self.contrast, &self.model).map_err(|e| Error::config("/contrast", e))?;
            if let Some(n) = self.clt_n {
                if n <= self.p() {
                    return Err(Error::config("/clt_n", "must exceed p"));
                }
            }
        }
        if let Some(probes) = &self.probe_t {
            for (i, &t) in probes.iter().enumerate() {
                if !(t >= 0.0 && t <= grid.t_max()) {
                    return Err(Error::config(format!("/probe_t/{i}"), "probe weights must lie in [0, t_max]"));
                }
            }
        }
        let th = &self.thresholds;
        if let Some([lo, hi]) = th.rate_ratio_band {
            if !(lo <= hi) {
                return Err(Error::config("/thresholds/rate_ratio_band", "band must be [low, high] with low <= high"));
            }
        }
        for (i, b) in th.zero_frequency_bounds.iter().enumerate() {
            if b.coordinate == 0 || b.coordinate > self.p() {
                return Err(Error::config(
                    format!("/thresholds/zero_frequency_bounds/{i}/coordinate"),
                    format!("coordinates are 1-based and at most p = {}", self.p()),
                ));
            }
            if !(b.t >= 0.0 && b.t <= grid.t_max()) {
                return Err(Error::config(
                    format!("/thresholds/zero_frequency_bounds/{i}/t"),
                    "t must lie in [0, t_max]",
                ));
            }
        }
        if !(th.max_failure_rate >= 0.0 && th.max_failure_rate < 1.0) {
            return Err(Error::config("/thresholds/max_failure_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// The t-grid with the probe weights and bound weights merged in.
    pub fn eval_grid(&self) -> Result<TGrid> {
        let mut pts = self.grid()?.points().to_vec();
        pts.extend(self.probes()?);
        pts.extend(self.thresholds.zero_frequency_bounds.iter().map(|b| b.t));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        TGrid::explicit(pts)
    }
}

/// `√n (β̂_n(t) − β)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPath {
    pub values: Matrix,
    pub replicate_id: usize,
    pub n: usize,
}

/// One replicate's path on the evaluation grid.
#[derive(Debug, Clone)]
struct ReplicatePath {
    coefficients: Matrix,
    zero_mask: Vec<Vec<bool>>,
    support_monotone: bool,
    max_kkt: f64,
}

fn replicate_sample(cfg: &ExperimentConfig, n: usize, r: usize) -> Result<DesignSample> {
    let stream = Stream::root(cfg.seed).child(1).child(n as u64).child(r as u64);
    simulate(&cfg.model, n, stream.seed())
}

fn solve_replicate(cfg: &ExperimentConfig, sample: &DesignSample, grid: &TGrid) -> Result<ReplicatePath> {
    let n = sample.n();
    let lambda = normalization(1.0, n);
    let (sol, exact_zeros) = match (cfg.contrast, cfg.gamma) {
        (ContrastSpec::LeastSquares, g) if g == 1.0 => {
            (lasso_homotopy(sample, lambda, grid.t_max().max(f64::MIN_POSITIVE))?.on_grid(sample, grid)?, true)
        }
        (ContrastSpec::LeastSquares, g) if g == 2.0 => (ridge_path(sample, lambda, grid)?, false),
        (c, g) if g == 0.0 => {
            let (path, _) = l0_path(&c, sample, grid.t_max())?;
            (path.on_grid(grid, grid.t_max())?, true)
        }
        (c, g) => (grid_path(&c, &PenaltySpec::new(g, n)?, sample, grid, cfg.tol())?, false),
    };
    let snap = if exact_zeros { 0.0 } else { ZERO_SNAP };
    let zero_mask = (0..grid.len())
        .map(|i| sol.coefficients.row(i).iter().map(|v| v.abs() <= snap).collect())
        .collect();
    let support_monotone = sol.support_sizes.windows(2).all(|w| w[1] <= w[0]);
    Ok(ReplicatePath {
        max_kkt: sol.max_kkt_residual(),
        coefficients: sol.coefficients,
        zero_mask,
        support_monotone,
    })
}

/// Replicate outcomes at one `n`, in replicate order; failures are counted
/// and the run is aborted above the configured failure rate.
fn run_replicates(cfg: &ExperimentConfig, n: usize, grid: &TGrid) -> Result<(Vec<ReplicatePath>, usize)> {
    let outcomes: Vec<Result<ReplicatePath>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| solve_replicate(cfg, &replicate_sample(cfg, n, r)?, grid))
        .collect();
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    let mut first_error = None;
    for o in outcomes {
        match o {
            Ok(p) => ok.push(p),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if failures as f64 > cfg.thresholds.max_failure_rate * cfg.replicates as f64 {
        return Err(Error::Experiment(format!(
            "{failures} of {} replicates failed at n = {n}; first error: {}",
            cfg.replicates,
            first_error.map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    Ok((ok, failures))
}

/// Linear-interpolation quantile of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub median_sup_error: f64,
    pub q90_sup_error: f64,
    pub replicates: usize,
    pub failures: usize,
    pub max_kkt_residual: f64,
    pub support_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencySection {
    pub rows: Vec<ConsistencyRow>,
    /// `median(n_i) / median(n_{i−1})`.
    pub rate_ratios: Vec<f64>,
    pub solver_tol: f64,
}

/// Median and 0.9-quantile of `sup_t ‖β̂_n(t) − β‖∞` over the t-grid, per `n`.
pub fn run_consistency(cfg: &ExperimentConfig) -> Result<ConsistencySection> {
    let grid = cfg.grid()?;
    let beta = cfg.model.beta_vector();
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let (paths, failures) = run_replicates(cfg, n, &grid)?;
        let mut errs: Vec<f64> = paths
            .iter()
            .map(|p| {
                (0..grid.len())
                    .map(|i| (p.coefficients.row(i).transpose() - &beta).amax())
                    .fold(0.0, f64::max)
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        rows.push(ConsistencyRow {
            n,
            median_sup_error: quantile_sorted(&errs, 0.5),
            q90_sup_error: quantile_sorted(&errs, 0.9),
            replicates: paths.len(),
            failures,
            max_kkt_residual: paths.iter().map(|p| p.max_kkt).fold(0.0, f64::max),
            support_monotone: paths.iter().all(|p| p.support_monotone),
        });
    }
    let rate_ratios = rows
        .windows(2)
        .map(|w| w[1].median_sup_error / w[0].median_sup_error)
        .collect();
    Ok(ConsistencySection {
        rows,
        rate_ratios,
        solver_tol: cfg.tol(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonuniformityRow {
    pub n: usize,
    /// Fraction of replicates with `sup_{t ≤ t_zero} ‖β̂(t) − β‖₂ ≥ ‖β‖₂ − 1e−10`.
    pub fraction: f64,
    /// Smallest `sup − ‖β‖₂` over replicates.
    pub min_margin: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonuniformitySection {
    pub beta_norm: f64,
    pub rows: Vec<NonuniformityRow>,
}

/// Distance of the whole lasso path (through `t_zero`) from `β`.
pub fn run_nonuniformity(cfg: &ExperimentConfig) -> Result<NonuniformitySection> {
    if !(cfg.contrast == ContrastSpec::LeastSquares && cfg.gamma == 1.0) {
        return Err(Error::invalid("non-uniformity needs the lasso path"));
    }
    let beta = cfg.model.beta_vector();
    let beta_norm = beta.norm();
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let lambda = normalization(1.0, n);
        let margins: Vec<Result<f64>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let sample = replicate_sample(cfg, n, r)?;
                let path = lasso_homotopy(&sample, lambda, f64::INFINITY)?;
                // a convex function of a piecewise-linear path peaks at a knot
                let mut sup = (path.at(0.0) - &beta).norm();
                for &t in path.knots() {
                    sup = sup.max((path.at(t) - &beta).norm());
                }
                Ok(sup - beta_norm)
            })
            .collect();
        let mut ok = Vec::new();
        for m in margins {
            match m {
                Ok(v) => ok.push(v),
                Err(e) => return Err(Error::Experiment(format!("non-uniformity replicate failed at n = {n}: {e}"))),
            }
        }
        let hits = ok.iter().filter(|m| **m >= -1e-10).count();
        rows.push(NonuniformityRow {
            n,
            fraction: hits as f64 / ok.len() as f64,
            min_margin: ok.iter().copied().fold(f64::INFINITY, f64::min),
            replicates: ok.len(),
        });
    }
    Ok(NonuniformitySection { beta_norm, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsEntry {
    pub t: Option<f64>,
    pub coordinate: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroFrequencyRow {
    pub t: f64,
    pub coordinate: usize,
    pub finite: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltSection {
    pub n: usize,
    pub replicates: usize,
    pub failures: usize,
    pub limit_draws: usize,
    pub probe_t: Vec<f64>,
    /// Only marginals are compared for the count penalty.
    pub finite_dimensional_only: bool,
    pub ks_marginals: Vec<KsEntry>,
    pub ks_sup_functional: Vec<KsEntry>,
    pub zero_frequency: Vec<ZeroFrequencyRow>,
    pub max_zero_frequency_gap: f64,
    /// Two-sample 5% critical value for these ensemble sizes.
    pub ks_critical_5pct: f64,
    pub support_monotone: bool,
}

fn column_at(rows: &[Vector], j: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|r| r[j]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Normalized replicate paths at `clt_n` against limit draws on the same grid.
pub fn run_pathwise_clt(cfg: &ExperimentConfig) -> Result<CltSection> {
    let grid = cfg.eval_grid()?;
    let base = cfg.grid()?;
    let n = cfg.clt_n();
    let p = cfg.p();
    let beta = cfg.model.beta_vector();
    let (paths, failures) = run_replicates(cfg, n, &grid)?;
    if paths.len() < MIN_REPLICATES {
        return Err(Error::Experiment(format!(
            "only {} usable replicates; at least {MIN_REPLICATES} are needed",
            paths.len()
        )));
    }
    let root_n = (n as f64).sqrt();
    let normalized: Vec<NormalizedPath> = paths
        .iter()
        .enumerate()
        .map(|(r, path)| {
            let mut values = path.coefficients.clone();
            for mut row in values.row_iter_mut() {
                for j in 0..p {
                    row[j] = root_n * (row[j] - beta[j]);
                }
            }
            NormalizedPath {
                values,
                replicate_id: r,
                n,
            }
        })
        .collect();
    let draws: Vec<LimitPathDraw> = sample_limit_paths(
        &cfg.model,
        &cfg.contrast,
        cfg.gamma,
        &grid,
        cfg.limit_draws,
        Stream::root(cfg.seed).child(2).seed(),
    )?;

    let probes = cfg.probes()?;
    let mut ks_marginals = Vec::new();
    for &t in &probes {
        let i = grid.nearest(t);
        let fin: Vec<Vector> = normalized.iter().map(|p| p.values.row(i).transpose()).collect();
        let lim: Vec<Vector> = draws.iter().map(|d| d.u_at(i)).collect();
        for j in 0..p {
            ks_marginals.push(KsEntry {
                t: Some(grid.points()[i]),
                coordinate: j + 1,
                distance: ks_sorted(&column_at(&fin, j), &column_at(&lim, j)),
            });
        }
    }

    let finite_dimensional_only = cfg.gamma == 0.0;
    let mut ks_sup_functional = Vec::new();
    if !finite_dimensional_only {
        let (lo, hi) = (base.points()[0], base.t_max());
        let in_t: Vec<usize> = (0..grid.len())
            .filter(|&i| grid.points()[i] >= lo && grid.points()[i] <= hi)
            .collect();
        for j in 0..p {
            let sup = |m: &Matrix| in_t.iter().map(|&i| m[(i, j)].abs()).fold(0.0, f64::max);
            let mut fin: Vec<f64> = normalized.iter().map(|p| sup(&p.values)).collect();
            let mut lim: Vec<f64> = draws.iter().map(|d| sup(&d.u_hat)).collect();
            fin.sort_by(f64::total_cmp);
            lim.sort_by(f64::total_cmp);
            ks_sup_functional.push(KsEntry {
                t: None,
                coordinate: j + 1,
                distance: ks_sorted(&fin, &lim),
            });
        }
    }

    let mut zero_frequency = Vec::new();
    let mut max_gap = 0.0f64;
    for (i, &t) in grid.points().iter().enumerate() {
        for j in 0..p {
            let finite = paths.iter().filter(|p| p.zero_mask[i][j]).count() as f64 / paths.len() as f64;
            let limit = draws.iter().filter(|d| d.zero_mask[i][j]).count() as f64 / draws.len() as f64;
            max_gap = max_gap.max((finite - limit).abs());
            zero_frequency.push(ZeroFrequencyRow {
                t,
                coordinate: j + 1,
                finite,
                limit,
            });
        }
    }

    Ok(CltSection {
        n,
        replicates: paths.len(),
        failures,
        limit_draws: draws.len(),
        probe_t: probes,
        finite_dimensional_only,
        ks_marginals,
        ks_sup_functional,
        zero_frequency,
        max_zero_frequency_gap: max_gap,
        ks_critical_5pct: ks_critical_value(paths.len(), draws.len(), 0.05),
        support_monotone: paths.iter().all(|p| p.support_monotone),
    })
}

/// One evaluated acceptance threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub consistency: Option<ConsistencySection>,
    pub nonuniformity: Option<NonuniformitySection>,
    pub clt: Option<CltSection>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

fn check(name: impl Into<String>, value: f64, threshold: impl Into<String>, passed: bool) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        value,
        threshold: threshold.into(),
        passed,
    }
}

/// Runs every configured experiment and evaluates the enabled thresholds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let th = &cfg.thresholds;
    let consistency = if cfg.runs(Experiment::Consistency) {
        Some(run_consistency(cfg)?)
    } else {
        None
    };
    let nonuniformity = if cfg.runs(Experiment::Nonuniformity) {
        Some(run_nonuniformity(cfg)?)
    } else {
        None
    };
    let clt = if cfg.runs(Experiment::Clt) {
        Some(run_pathwise_clt(cfg)?)
    } else {
        None
    };

    let mut checks = Vec::new();
    if let Some(c) = &consistency {
        if th.consistency_decreasing {
            let ok = c.rows.windows(2).all(|w| w[1].median_sup_error < w[0].median_sup_error);
            let worst = c.rate_ratios.iter().copied().fold(0.0, f64::max);
            checks.push(check("consistency.median_strictly_decreasing", worst, "max ratio < 1", ok));
        }
        if let Some([lo, hi]) = th.rate_ratio_band {
            for (k, r) in c.rate_ratios.iter().enumerate() {
                checks.push(check(
                    format!("consistency.rate_ratio[n={}]", c.rows[k + 1].n),
                    *r,
                    format!("[{lo}, {hi}]"),
                    *r >= lo && *r <= hi,
                ));
            }
        }
        if th.support_monotone {
            let ok = c.rows.iter().all(|r| r.support_monotone);
            checks.push(check("consistency.support_monotone", ok as u8 as f64, "1", ok));
        }
    }
    if let (Some(nu), Some(min_frac)) = (&nonuniformity, th.nonuniformity_fraction) {
        for r in &nu.rows {
            checks.push(check(
                format!("nonuniformity.fraction[n={}]", r.n),
                r.fraction,
                format!(">= {min_frac}"),
                r.fraction >= min_frac,
            ));
        }
    }
    if let Some(c) = &clt {
        if let Some(bound) = th.ks_marginal {
            for e in &c.ks_marginals {
                checks.push(check(
                    format!("clt.ks_marginal[t={},j={}]", e.t.unwrap_or(f64::NAN), e.coordinate),
                    e.distance,
                    format!("<= {bound}"),
                    e.distance <= bound,
                ));
            }
        }
        if let Some(bound) = th.ks_sup {
            for e in &c.ks_sup_functional {
                checks.push(check(
                    format!("clt.ks_sup[j={}]", e.coordinate),
                    e.distance,
                    format!("<= {bound}"),
                    e.distance <= bound,
                ));
            }
        }
        if let Some(bound) = th.zero_frequency_gap {
            checks.push(check(
                "clt.zero_frequency_gap",
                c.max_zero_frequency_gap,
                format!("<= {bound}"),
                c.max_zero_frequency_gap <= bound,
            ));
        }
        for b in &th.zero_frequency_bounds {
            let row = c
                .zero_frequency
                .iter()
                .filter(|r| r.coordinate == b.coordinate)
                .min_by(|x, y| (x.t - b.t).abs().total_cmp(&(y.t - b.t).abs()))
                .expect("grid covers every bound");
            let value = match b.ensemble {
                Ensemble::Finite => row.finite,
                Ensemble::Limit => row.limit,
            };
            let ok = b.min.is_none_or(|m| value >= m) && b.max.is_none_or(|m| value <= m);
            let label = match b.ensemble {
                Ensemble::Finite => "finite",
                Ensemble::Limit => "limit",
            };
            checks.push(check(
                format!("clt.zero_frequency.{label}[t={},j={}]", row.t, b.coordinate),
                value,
                format!("[{}, {}]", b.min.unwrap_or(0.0), b.max.unwrap_or(1.0)),
                ok,
            ));
        }
        if th.support_monotone {
            checks.push(check(
                "clt.support_monotone",
                c.support_monotone as u8 as f64,
                "1",
                c.support_monotone,
            ));
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(ExperimentReport {
        consistency,
        nonuniformity,
        clt,
        checks,
        passed,
    })
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json` and the plot-ready CSV tables into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()? + "\n")?;
        if let Some(c) = &self.consistency {
            let mut w = csv::Writer::from_path(dir.join("consistency.csv"))?;
            w.write_record(["n", "median_sup_error", "q90_sup_error", "rate_ratio", "failures"])?;
            for (k, r) in c.rows.iter().enumerate() {
                let ratio = if k == 0 { String::new() } else { fmt_f64(c.rate_ratios[k - 1]) };
                w.write_record([
                    r.n.to_string(),
                    fmt_f64(r.median_sup_error),
                    fmt_f64(r.q90_sup_error),
                    ratio,
                    r.failures.to_string(),
                ])?;
            }
            w.flush()?;
        }
        if let Some(c) = &self.clt {
            let mut w = csv::Writer::from_path(dir.join("zero_frequency.csv"))?;
            w.write_record(["t", "coordinate", "finite", "limit"])?;
            for r in &c.zero_frequency {
                w.write_record([fmt_f64(r.t), r.coordinate.to_string(), fmt_f64(r.finite), fmt_f64(r.limit)])?;
            }
            w.flush()?;
            let mut w = csv::Writer::from_path(dir.join("ks.csv"))?;
            w.write_record(["statistic", "t", "coordinate", "distance"])?;
            for e in &c.ks_marginals {
                w.write_record([
                    "marginal".to_string(),
                    e.t.map(fmt_f64).unwrap_or_default(),
                    e.coordinate.to_string(),
                    fmt_f64(e.distance),
                ])?;
            }
            for e in &c.ks_sup_functional {
                w.write_record(["sup".to_string(), String::new(), e.coordinate.to_string(), fmt_f64(e.distance)])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{DesignDistribution, NoiseSpec};

    fn config(noise: NoiseSpec) -> ExperimentConfig {
        ExperimentConfig {
            model: TrueModel {
                beta: vec![1.0, 0.0],
                noise,
                design: DesignDistribution::Fixed {
                    rows: vec![vec![1.0, 1.0], vec![1.0, -1.0]],
                },
                glm: None,
            },
            contrast: ContrastSpec::LeastSquares,
            gamma: 1.0,
            tgrid: TGridConfig::Explicit { points: vec![0.0] },
            n_values: vec![4, 16],
            replicates: 50,
            limit_draws: 100,
            seed: 3,
            solver_tol: None,
            experiments: vec![Experiment::Consistency],
            probe_t: None,
            clt_n: None,
            thresholds: Thresholds::default(),
        }
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let report = run_experiment(&config(NoiseSpec::noiseless())).unwrap();
        for row in &report.consistency.unwrap().rows {
            assert_eq!(row.median_sup_error, 0.0);
            assert_eq!(row.q90_sup_error, 0.0);
        }
    }

    #[test]
    fn validation_reports_pointers() {
        let mut cfg = config(NoiseSpec::gaussian(1.0).unwrap());
        cfg.replicates = 10;
        match cfg.validate() {
            Err(Error::Config { pointer, .. }) => assert_eq!(pointer, "/replicates"),
            other => panic!("{other:?}"),
        }
        let text = serde_json::to_string(&config(NoiseSpec::gaussian(1.0).unwrap()))
            .unwrap()
            .replace("\"gamma\":1.0", "\"gamma\":\"one\"");
        match ExperimentConfig::from_json(&text) {
            Err(Error::Config { pointer, .. }) => assert_eq!(pointer, "/gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }
}
