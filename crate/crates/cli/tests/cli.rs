use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use l0break_cli::input::read_table;
use l0break_cli::report::DetectReport;
use l0break_core::{recompute_objective, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_l0break")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn noise(seed: u64, n: usize, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Ten 0s then ten 5s with tiny noise, plus a date column and a regressor.
fn step_csv(dir: &TempDir) -> PathBuf {
    let e = noise(7, 20, 0.01);
    let x = noise(8, 20, 1.0);
    let mut body = String::from("date,y,x\n");
    for t in 0..20 {
        let level = if t < 10 { 0.0 } else { 5.0 };
        body.push_str(&format!("2001-{:02},{},{}\n", t + 1, level + e[t], x[t]));
    }
    write(dir, "step.csv", &body)
}

fn detect_json(args: &[&str]) -> DetectReport {
    let out = bin(args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid report")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn automatic_penalty_finds_the_step() {
    let dir = TempDir::new().unwrap();
    let csv = step_csv(&dir);
    let r = detect_json(&["detect", path_str(&csv), "--y", "y", "--auto"]);
    assert_eq!(r.schema, 1);
    assert_eq!(r.num_breaks, 1);
    assert_eq!(r.breaks[0].index, 11);
    assert_eq!(r.breaks[0].label.as_deref(), Some("2001-11"));
    assert!(r.regimes[0].coefficients[0].estimate.abs() < 0.05);
    assert!((r.regimes[1].coefficients[0].estimate - 5.0).abs() < 0.05);
    assert_eq!((r.regimes[0].start, r.regimes[0].end), (1, 10));
    assert!(r.path.as_ref().is_some_and(|p| !p.is_empty()));
    assert!(r.regimes[1].coefficients[0].std_error.is_some());
}

#[test]
fn constant_series_has_no_break() {
    let dir = TempDir::new().unwrap();
    let body: String = std::iter::once("y\n".to_owned()).chain((0..15).map(|_| "3.5\n".to_owned())).collect();
    let csv = write(&dir, "flat.csv", &body);
    let r = detect_json(&["detect", path_str(&csv), "--y", "y"]);
    assert_eq!(r.num_breaks, 0);
}

#[test]
fn fixed_break_count_is_honoured() {
    let dir = TempDir::new().unwrap();
    let csv = step_csv(&dir);
    let two = detect_json(&["detect", path_str(&csv), "--y", "y", "--fixed-m", "2"]);
    let one = detect_json(&["detect", path_str(&csv), "--y", "y", "--fixed-m", "1"]);
    assert_eq!(two.num_breaks, 2);
    assert!(two.objective <= one.objective);
}

/// The report alone reproduces its objective on the original data.
fn assert_round_trip(csv: &Path, extra: &[&str]) {
    let mut args = vec!["detect", path_str(csv), "--y", "y"];
    args.extend_from_slice(extra);
    let r = detect_json(&args);
    let table = read_table(csv).unwrap();
    let y = table.column("y").unwrap();
    let skip = r.input.first_row - 1;
    let rows: Vec<Vec<f64>> = (skip..table.rows)
        .map(|t| {
            r.input
                .regressors
                .iter()
                .map(|name| match name.as_str() {
                    "const" => 1.0,
                    "y_lag1" => y[t - 1],
                    col => table.column(col).unwrap()[t],
                })
                .collect()
        })
        .collect();
    let data = Dataset::from_rows(y[skip..].to_vec(), &rows).unwrap();
    let again = recompute_objective(&data, &r.segmentation().unwrap(), r.lambda).unwrap();
    assert!((again - r.objective).abs() <= 1e-9 * (1.0 + r.objective.abs()), "{again} vs {}", r.objective);
}

#[test]
fn report_round_trips_through_the_objective() {
    let dir = TempDir::new().unwrap();
    let csv = step_csv(&dir);
    assert_round_trip(&csv, &[]);
    assert_round_trip(&csv, &["--lambda", "0.3", "--x", "x"]);
    assert_round_trip(&csv, &["--lag-y", "--min-gap", "3"]);
    assert_round_trip(&csv, &["--fixed-m", "3", "--lambda", "0.5", "--solver", "bnb"]);
}

#[test]
fn both_solvers_agree() {
    let dir = TempDir::new().unwrap();
    let e = noise(11, 40, 0.4);
    let mut body = String::from("y\n");
    for t in 0..40 {
        let level = [0.0, 1.0, -0.5, 1.5][t / 10];
        body.push_str(&format!("{}\n", level + e[t]));
    }
    let csv = write(&dir, "multi.csv", &body);
    for lambda in ["0.1", "0.5", "2"] {
        let dp = detect_json(&["detect", path_str(&csv), "--y", "y", "--lambda", lambda]);
        let bnb = detect_json(&["detect", path_str(&csv), "--y", "y", "--lambda", lambda, "--solver", "bnb"]);
        assert_eq!(bnb.certificate, l0break_core::Certificate::ProvedOptimal);
        assert_eq!(dp.breaks, bnb.breaks);
    }
}

#[test]
fn csv_output_and_lp_export() {
    let dir = TempDir::new().unwrap();
    let csv = step_csv(&dir);
    let lp = dir.path().join("model.lp");
    let out_path = dir.path().join("report.csv");
    let out = bin(&[
        "detect",
        path_str(&csv),
        "--y",
        "y",
        "--x",
        "x",
        "--lambda",
        "1",
        "--format",
        "csv",
        "--out",
        path_str(&out_path),
        "--export-lp",
        path_str(&lp),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], DetectReport::CSV_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("1,1,10,2001-01,const,"));
    let model = std::fs::read_to_string(&lp).unwrap();
    assert!(model.contains("Subject To") && model.contains("Binaries") && model.trim_end().ends_with("End"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.csv", "y,x\n1,2\n3,oops\n");
    assert_eq!(bin(&["detect", path_str(&bad), "--y", "y"]).status.code(), Some(2));

    let csv = step_csv(&dir);
    let too_many = bin(&["detect", path_str(&csv), "--y", "y", "--fixed-m", "10"]);
    assert_eq!(too_many.status.code(), Some(3));
    let gap = bin(&["detect", path_str(&csv), "--y", "y", "--min-gap", "1"]);
    assert_eq!(gap.status.code(), Some(3));

    let small_m = bin(&["detect", path_str(&csv), "--y", "y", "--lambda", "1", "--solver", "bnb", "--big-m", "0.5"]);
    assert_eq!(small_m.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&small_m.stderr).contains("--big-m"));

    assert_eq!(bin(&["simulate", "--table", "1", "--reps", "0"]).status.code(), Some(3));
    assert_eq!(bin(&["simulate", "--table", "1", "--methods", "GFL"]).status.code(), Some(3));
}

#[test]
fn simulation_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = bin(&["simulate", "--table", "2", "--reps", "50", "--seed", "1", "--out", path_str(p)]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dgp,param,T,method,pce,hd_scaled,n_reps,seed");
    assert_eq!(lines.len(), 1 + 54 * 3);
}
