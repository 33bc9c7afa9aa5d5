use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use penpath::checks::{self, SUITES};
use penpath::limitprocess::{write_limit_csv, LimitSampler};
use penpath::montecarlo::{run_experiment, ExperimentConfig};
use penpath::pathsolvers::{
    grid_path, l0_path, lasso_homotopy, ridge_path, DEFAULT_GRID_POINTS,
};
use penpath::{
    ContrastSpec, DesignSample, Error, LimitForm, LimitPenaltySpec, Matrix, PathSolution,
    PenaltySpec, ScoreInfo, TGrid,
};

#[derive(Parser)]
#[command(name = "penpath", version, about = "Regularization paths and their limit processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a penalized path on a data set.
    Path(PathArgs),
    /// Sample minimizer paths of the Gaussian limit contrast.
    Limit(LimitArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    Mc(McArgs),
    /// Run the built-in invariant suites.
    Check(CheckArgs),
}

#[derive(Args)]
struct PathArgs {
    /// CSV with header `y,x1,...,xp`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "ls")]
    contrast: String,
    /// `l1`, `l2`, `l0` or `lq:<gamma>`.
    #[arg(long, default_value = "l1")]
    penalty: String,
    #[arg(long)]
    tmax: f64,
    /// Number of uniform grid points on `[0, tmax]`.
    #[arg(long, conflicts_with = "exact")]
    tgrid: Option<usize>,
    /// Sample the path at its exact breakpoints.
    #[arg(long)]
    exact: bool,
    /// Accepted for interface symmetry; path solves are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct LimitArgs {
    /// Comma-separated true coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    beta: Vec<f64>,
    /// `identity:<p>` or a headerless CSV holding the design second moment.
    #[arg(long)]
    cov: String,
    /// Noise variance scaling the score covariance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    draws: usize,
    #[arg(long)]
    tmax: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    tgrid: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    suite: Option<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
    Threshold(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e {
                Error::Invalid(_)
                | Error::Dimension { .. }
                | Error::Config { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_) => 1,
                _ => 2,
            },
            Failure::Check => 2,
            Failure::Threshold(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Path(a) => cmd_path(a),
        Command::Limit(a) => cmd_limit(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Threshold(m) => eprintln!("threshold failure: {m}"),
                Failure::Check => eprintln!("check failure"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn parse_penalty(s: &str) -> Result<f64, Failure> {
    match s {
        "l1" => Ok(1.0),
        "l2" => Ok(2.0),
        "l0" => Ok(0.0),
        _ => s
            .strip_prefix("lq:")
            .and_then(|g| g.parse::<f64>().ok())
            .filter(|g| g.is_finite() && *g >= 0.0)
            .ok_or_else(|| Failure::Usage(format!("unknown penalty `{s}`; use l1, l2, l0 or lq:<gamma>"))),
    }
}

fn create_dir(out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| Failure::Core(e.into()))
}

fn cmd_path(a: PathArgs) -> Result<(), Failure> {
    let contrast = ContrastSpec::parse(&a.contrast)
        .ok_or_else(|| Failure::Usage(format!("unknown contrast `{}`", a.contrast)))?;
    let gamma = parse_penalty(&a.penalty)?;
    if !(a.tmax > 0.0 && a.tmax.is_finite()) {
        return Err(Failure::Usage("--tmax must be positive".into()));
    }
    if !(a.tol > 0.0) {
        return Err(Failure::Usage("--tol must be positive".into()));
    }
    let sample = DesignSample::read_csv(&a.data)?;
    let grid = || TGrid::uniform(0.0, a.tmax, a.tgrid.unwrap_or(DEFAULT_GRID_POINTS));
    let ls = contrast == ContrastSpec::LeastSquares;
    let sol: PathSolution = if gamma == 0.0 {
        let (path, exact) = l0_path(&contrast, &sample, a.tmax)?;
        if a.exact {
            exact
        } else {
            path.on_grid(&grid()?, a.tmax)?
        }
    } else if a.exact {
        if !(ls && gamma == 1.0) {
            return Err(Failure::Usage(
                "--exact needs the l0 penalty or least squares with l1".into(),
            ));
        }
        let lambda = PenaltySpec::new(1.0, sample.n())?.weight();
        lasso_homotopy(&sample, lambda, a.tmax)?.solution(&sample, a.tmax)?
    } else if ls && gamma == 1.0 {
        let lambda = PenaltySpec::new(1.0, sample.n())?.weight();
        match lasso_homotopy(&sample, lambda, a.tmax) {
            Ok(path) => path.on_grid(&sample, &grid()?)?,
            Err(Error::SingularGram { .. }) => {
                grid_path(&contrast, &PenaltySpec::new(1.0, sample.n())?, &sample, &grid()?, a.tol)?
            }
            Err(e) => return Err(e.into()),
        }
    } else if ls && gamma == 2.0 {
        let lambda = PenaltySpec::new(2.0, sample.n())?.weight();
        ridge_path(&sample, lambda, &grid()?)?
    } else {
        grid_path(&contrast, &PenaltySpec::new(gamma, sample.n())?, &sample, &grid()?, a.tol)?
    };
    create_dir(&a.out)?;
    sol.write_csv(a.out.join("path.csv"))?;
    sol.write_breakpoints_json(a.out.join("breakpoints.json"))?;
    eprintln!("wrote {} rows to {}", sol.tgrid.len(), a.out.join("path.csv").display());
    Ok(())
}

fn read_cov(spec: &str, p: usize) -> Result<Matrix, Failure> {
    if let Some(dim) = spec.strip_prefix("identity:") {
        let d: usize = dim
            .parse()
            .map_err(|_| Failure::Usage(format!("bad dimension in `{spec}`")))?;
        if d != p {
            return Err(Failure::Usage(format!("--cov has dimension {d} but --beta has {p} entries")));
        }
        return Ok(Matrix::identity(p, p));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(spec)
        .map_err(Error::from)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(Error::from)?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| Failure::Usage(format!("non-numeric entry in {spec}: {e}")))?;
        rows.push(row);
    }
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(Failure::Usage(format!("{spec} must hold a {p}x{p} matrix")));
    }
    Ok(penpath::linalg::from_rows(&rows)?)
}

fn cmd_limit(a: LimitArgs) -> Result<(), Failure> {
    if a.draws == 0 {
        return Err(Failure::Usage("--draws must be at least 1".into()));
    }
    if !(a.tmax > 0.0 && a.tmax.is_finite()) {
        return Err(Failure::Usage("--tmax must be positive".into()));
    }
    if !(a.sigma2 > 0.0 && a.sigma2.is_finite()) {
        return Err(Failure::Usage("--sigma2 must be positive".into()));
    }
    let cov = read_cov(&a.cov, a.beta.len())?;
    let info = ScoreInfo {
        form: LimitForm::Lasso,
        score_cov: &cov * a.sigma2,
        fisher_like: cov,
    };
    let sampler = LimitSampler::from_info(info, LimitPenaltySpec::new(a.gamma, &a.beta)?)?;
    let tgrid = TGrid::uniform(0.0, a.tmax, a.tgrid)?;
    let draws = sampler.sample_paths(&tgrid, a.draws, a.seed)?;
    create_dir(&a.out)?;
    let file = a.out.join("limit_draws.csv");
    write_limit_csv(&draws, &file)?;
    eprintln!("wrote {} draws to {}", draws.len(), file.display());
    Ok(())
}

fn cmd_mc(a: McArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig::from_path(&a.config)?;
    let report = match a.workers {
        Some(0) => return Err(Failure::Usage("--workers must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))?
            .install(|| run_experiment(&cfg))?,
        None => run_experiment(&cfg)?,
    };
    report.write(&a.out)?;
    for c in &report.checks {
        eprintln!(
            "{} {}: {:.6} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Threshold(failed.join(", ")))
    }
}

fn cmd_check(a: CheckArgs) -> Result<(), Failure> {
    let names: Vec<&str> = match &a.suite {
        Some(s) if SUITES.contains(&s.as_str()) => vec![s.as_str()],
        Some(s) => {
            return Err(Failure::Usage(format!(
                "unknown suite `{s}`; valid suites: {}",
                SUITES.join(", ")
            )))
        }
        None => SUITES.to_vec(),
    };
    let results = names
        .iter()
        .map(|n| checks::run_suite(n))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = results.iter().all(|r| r.passed);
    let summary = serde_json::json!({ "passed": passed, "suites": results });
    println!("{}", serde_json::to_string_pretty(&summary).map_err(Error::from)?);
    if passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}
