use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_penpath"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_toy(dir: &Path) -> PathBuf {
    let path = dir.join("toy.csv");
    std::fs::write(&path, "y,x1\n0,1\n2,1\n0.5,1\n1.5,1\n").unwrap();
    path
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn exact_lasso_path_on_scalar_mean() {
    let dir = scratch("exact");
    let data = write_toy(&dir);
    let out = bin()
        .args(["path", "--contrast", "ls", "--penalty", "l1", "--exact", "--tmax", "6"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (header, rows) = read_rows(&dir.join("out/path.csv"));
    assert_eq!(header, ["t", "beta_1", "objective", "kkt_residual", "support_size"]);
    // knots at 0 and t_zero = 4; the path is linear in between
    let ts: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(ts, [0.0, 4.0, 6.0]);
    let at2 = 0.5 * (rows[0][1] + rows[1][1]);
    assert!((at2 - 0.5).abs() < 1e-14);
    let knots: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(dir.join("out/breakpoints.json")).unwrap()).unwrap();
    assert_eq!(knots, [4.0]);
}

#[test]
fn gridded_lasso_path_hits_half_at_two() {
    let dir = scratch("gridded");
    let data = write_toy(&dir);
    let out = bin()
        .args(["path", "--penalty", "l1", "--tmax", "6", "--tgrid", "7"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, rows) = read_rows(&dir.join("out/path.csv"));
    assert_eq!(rows.len(), 7);
    assert!((rows[2][0] - 2.0).abs() < 1e-15);
    assert!((rows[2][1] - 0.5).abs() < 1e-14);
    assert_eq!(rows[5][1], 0.0);
}

#[test]
fn lad_and_ridge_paths_run() {
    let dir = scratch("lad_ridge");
    let data = dir.join("d.csv");
    std::fs::write(&data, "y,x1,x2\n1,1,0.5\n-0.5,0.2,1\n2,1.5,-1\n0.3,-0.7,0.4\n1.1,0.9,0.9\n").unwrap();
    for (contrast, penalty) in [("lad", "l1"), ("lad", "l2"), ("ls", "l2"), ("ls", "lq:1")] {
        let out = bin()
            .args(["path", "--contrast", contrast, "--penalty", penalty, "--tmax", "2", "--tgrid", "5"])
            .arg("--data")
            .arg(&data)
            .arg("--out")
            .arg(dir.join(format!("{contrast}-{penalty}").replace(':', "")))
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{contrast} {penalty}: {}", stderr(&out));
    }
}

#[test]
fn missing_data_file_is_a_usage_error() {
    let dir = scratch("missing");
    let out = bin()
        .args(["path", "--tmax", "1", "--data"])
        .arg(dir.join("absent.csv"))
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(!dir.join("out").exists());
}

#[test]
fn bad_flags_are_usage_errors() {
    let dir = scratch("flags");
    let data = write_toy(&dir);
    for extra in [
        vec!["--penalty", "l7"],
        vec!["--contrast", "huber"],
        vec!["--penalty", "l2", "--exact"],
        vec!["--penalty", "lq:0.5"],
    ] {
        let out = bin()
            .args(["path", "--tmax", "1"])
            .args(&extra)
            .arg("--data")
            .arg(&data)
            .arg("--out")
            .arg(dir.join("out"))
            .output()
            .unwrap();
        assert_eq!(code(&out), 1, "{extra:?}: {}", stderr(&out));
    }
    let out = bin().args(["path", "--no-such-flag"]).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn l0_with_sixteen_columns_is_refused_with_a_cost_estimate() {
    let dir = scratch("l0_big");
    let data = dir.join("wide.csv");
    let mut text = String::from("y");
    for j in 1..=16 {
        text.push_str(&format!(",x{j}"));
    }
    text.push('\n');
    for i in 0..40 {
        text.push_str(&format!("{}", i % 3));
        for j in 0..16 {
            text.push_str(&format!(",{}", ((i * 7 + j * 13) % 11) as f64 - 5.0));
        }
        text.push('\n');
    }
    std::fs::write(&data, text).unwrap();
    let out = bin()
        .args(["path", "--penalty", "l0", "--tmax", "2"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("65536"), "{}", stderr(&out));
}

fn limit(dir: &Path, args: &[&str]) -> Output {
    bin().arg("limit").args(args).arg("--out").arg(dir).output().unwrap()
}

#[test]
fn limit_draws_are_reproducible() {
    let a = scratch("limit_a");
    let b = scratch("limit_b");
    let args = ["--beta", "0", "--cov", "identity:1", "--gamma", "1", "--draws", "1", "--tmax", "3", "--seed", "7"];
    assert_eq!(code(&limit(&a, &args)), 0);
    assert_eq!(code(&limit(&b, &args)), 0);
    let fa = std::fs::read(a.join("limit_draws.csv")).unwrap();
    let fb = std::fs::read(b.join("limit_draws.csv")).unwrap();
    assert_eq!(fa, fb);
    let (header, rows) = read_rows(&a.join("limit_draws.csv"));
    assert_eq!(header, ["draw_id", "t", "u_1", "zero_mask_1"]);
    assert_eq!(rows.len(), 201);
}

#[test]
fn limit_rejects_zero_draws() {
    let dir = scratch("limit_zero");
    let out = limit(&dir, &["--beta", "0", "--cov", "identity:1", "--gamma", "1", "--draws", "0", "--tmax", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn limit_refuses_concave_exponent_in_four_dimensions() {
    let dir = scratch("limit_concave");
    let out = limit(
        &dir,
        &["--gamma", "0.5", "--beta", "0,0,0,0", "--cov", "identity:4", "--draws", "2", "--tmax", "1"],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn limit_rejects_indefinite_covariance() {
    let dir = scratch("limit_indefinite");
    let cov = dir.join("cov.csv");
    std::fs::write(&cov, "1,2\n2,1\n").unwrap();
    let out = limit(
        &dir,
        &["--beta", "1,0", "--cov", cov.to_str().unwrap(), "--gamma", "1", "--draws", "2", "--tmax", "1"],
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn limit_reads_covariance_file() {
    let dir = scratch("limit_file");
    let cov = dir.join("cov.csv");
    std::fs::write(&cov, "1,0.3\n0.3,2\n").unwrap();
    let out = limit(
        &dir,
        &["--beta", "1,-0.5", "--cov", cov.to_str().unwrap(), "--gamma", "2", "--draws", "3", "--tmax", "2", "--tgrid", "5"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (_, rows) = read_rows(&dir.join("limit_draws.csv"));
    assert_eq!(rows.len(), 15);
}

const SMALL_CONFIG: &str = r#"{
  "model": {
    "beta": [1.0, 0.0],
    "noise": { "kind": "gaussian", "sigma2": 1.0 },
    "design": { "kind": "standard_normal", "p": 2 }
  },
  "contrast": "ls",
  "gamma": 1.0,
  "tgrid": { "kind": "uniform", "t_max": 3.0, "count": 11 },
  "n_values": [100, 400],
  "replicates": 60,
  "limit_draws": 500,
  "seed": 11,
  "clt_n": 400,
  "thresholds": { "consistency_decreasing": true }
}"#;

fn mc(config: &Path, out: &Path, workers: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.arg("mc").arg("--config").arg(config).arg("--out").arg(out);
    if let Some(w) = workers {
        cmd.args(["--workers", w]);
    }
    cmd.output().unwrap()
}

#[test]
fn mc_report_does_not_depend_on_worker_count() {
    let dir = scratch("mc_workers");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let one = mc(&cfg, &dir.join("w1"), Some("1"));
    let eight = mc(&cfg, &dir.join("w8"), Some("8"));
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    assert_eq!(code(&eight), 0);
    for file in ["report.json", "consistency.csv", "zero_frequency.csv", "ks.csv"] {
        let a = std::fs::read(dir.join("w1").join(file)).unwrap();
        let b = std::fs::read(dir.join("w8").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn mc_threshold_failure_exits_three_and_keeps_the_report() {
    let dir = scratch("mc_threshold");
    let cfg = dir.join("cfg.json");
    // a KS bound of zero cannot be met
    let text = SMALL_CONFIG.replace(
        r#""thresholds": { "consistency_decreasing": true }"#,
        r#""thresholds": { "ks_marginal": 0.0 }"#,
    );
    std::fs::write(&cfg, text).unwrap();
    let out = mc(&cfg, &dir.join("out"), None);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn mc_rejects_too_few_replicates_with_a_pointer() {
    let dir = scratch("mc_reps");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, SMALL_CONFIG.replace(r#""replicates": 60"#, r#""replicates": 10"#)).unwrap();
    let out = mc(&cfg, &dir.join("out"), None);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("/replicates"), "{}", stderr(&out));
    assert!(!dir.join("out").exists());
}

#[test]
fn mc_reports_the_pointer_of_a_malformed_field() {
    let dir = scratch("mc_malformed");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, SMALL_CONFIG.replace(r#""sigma2": 1.0"#, r#""sigma2": "one""#)).unwrap();
    let out = mc(&cfg, &dir.join("out"), None);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("/model/noise/sigma2"), "{}", stderr(&out));
}

#[test]
fn bundled_configs_parse() {
    let examples = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    for name in ["lasso_consistency.json", "lasso_clt.json", "aic_l0.json"] {
        penpath::montecarlo::ExperimentConfig::from_path(examples.join(name)).unwrap();
    }
}

#[test]
fn check_suites_report_json() {
    for suite in ["lemma1", "kkt"] {
        let out = bin().args(["check", "--suite", suite]).output().unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["passed"], true);
        assert_eq!(v["suites"][0]["suite"], suite);
    }
}

#[test]
fn check_rejects_unknown_suite() {
    let out = bin().args(["check", "--suite", "nosuchsuite"]).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("lemma1"));
}
