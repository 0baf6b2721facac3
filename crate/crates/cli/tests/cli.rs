use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hiercast_core::datagen::{preset, synthesize};
use hiercast_core::io::load_csv;

const CONFIG: &str = r#"
models = ["complete", "partial-week"]
draws = 200
horizon = 14

[map]
restarts = 0

[folds]
first_test_start = "2018-11-01"
horizon = 14
n_folds = 2
"#;

fn hiercast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiercast")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hiercast(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    ok(dir.path(), &["simulate", "--preset", "delivery-like", "--out", "data"]);
    dir
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn records(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
}

fn outputs(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.file_name().unwrap() != "manifest.json" {
            out.insert(p.clone(), std::fs::read(&p).unwrap());
        }
    }
    out
}

#[test]
fn simulated_csv_matches_the_generator() {
    let dir = setup();
    let loaded = load_csv(&dir.path().join("data/delivery-like.csv")).unwrap();
    let synth = synthesize(&preset("delivery-like", 0).unwrap()).unwrap().series;
    assert_eq!(loaded.dates(), synth.dates());
    assert_eq!(loaded.values(), synth.values());
    assert!(read(dir.path(), "data/delivery-like.spec.toml").contains("trend_k"));
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "data/manifest.json")).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_then_evaluate_end_to_end_and_reproducibly() {
    let dir = setup();
    let args = ["evaluate", "--config", "run.toml", "--data", "data/delivery-like.csv", "--out", "a"];
    let stdout = ok(dir.path(), &args);
    assert!(stdout.starts_with("MAPE (%)"), "{stdout}");
    assert!(stdout.contains("delivery-like"));
    let csv = read(dir.path(), "a/report.csv");
    let rows = records(&csv);
    for model in ["complete", "partial-week"] {
        let mean = rows.iter().find(|r| &r[1] == model && &r[3] == "mean_mape").unwrap();
        let v: f64 = mean[4].parse().unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(rows.iter().any(|r| &r[1] == model && &r[3] == "loo_elpd"));
    }
    assert_eq!(rows.iter().filter(|r| &r[3] == "mape" && &r[1] == "complete").count(), 2);

    let again = ["evaluate", "--config", "run.toml", "--data", "data/delivery-like.csv", "--out", "b"];
    ok(dir.path(), &again);
    let a = outputs(&dir.path().join("a"));
    let b = outputs(&dir.path().join("b"));
    assert_eq!(a.len(), b.len());
    for ((pa, ba), (_, bb)) in a.iter().zip(&b) {
        assert!(ba == bb, "{} differs between runs", pa.display());
    }
}

#[test]
fn compare_with_a_copied_forecast_gives_equal_mape() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &["evaluate", "--config", "run.toml", "--data", "data/delivery-like.csv", "--model", "complete", "--out", "e"],
    );
    let mut ext = String::from("date,value\n");
    for r in records(&read(d, "e/report_forecasts.csv")) {
        if &r[1] == "complete" {
            ext.push_str(&format!("{},{}\n", &r[3], &r[5]));
        }
    }
    std::fs::write(d.join("copy.csv"), ext).unwrap();
    ok(
        d,
        &[
            "compare",
            "--config",
            "run.toml",
            "--data",
            "data/delivery-like.csv",
            "--model",
            "complete",
            "--external",
            "delivery-like:copy=copy.csv",
            "--out",
            "c",
        ],
    );
    let rows = records(&read(d, "c/compare.csv"));
    let cells = |model: &str| -> Vec<String> {
        rows.iter()
            .filter(|r| &r[1] == model && (&r[3] == "mape" || &r[3] == "mean_mape"))
            .map(|r| r[4].to_string())
            .collect()
    };
    assert_eq!(cells("complete").len(), 3);
    assert_eq!(cells("complete"), cells("copy"));
    assert!(read(d, "c/compare_tables.txt").contains("copy"));
}

#[test]
fn fit_forecast_and_plot() {
    let dir = setup();
    let d = dir.path();
    ok(
        d,
        &[
            "fit",
            "--config",
            "run.toml",
            "--data",
            "data/delivery-like.csv",
            "--model",
            "partial",
            "--dims",
            "week",
            "--out",
            "f",
        ],
    );
    let fit = "f/delivery-like.partial-week.fit.json";
    let trace = read(d, "f/delivery-like.partial-week.trace.csv");
    assert!(trace.starts_with("iteration,phase,objective,grad_norm\n") && trace.lines().count() > 2);

    ok(d, &["forecast", "--fit", fit, "--horizon", "7", "--out", "p"]);
    let rows = records(&read(d, "p/delivery-like.partial-week.forecast.csv"));
    assert_eq!(rows.len(), 7);
    assert_eq!(&rows[0][0], "2019-01-01");
    for r in &rows {
        let (point, lo, hi): (f64, f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(lo < point && point < hi);
    }

    ok(d, &["plot", "--fit", fit, "--out", "g"]);
    for name in ["k", "m", "theta_week"] {
        let stem = format!("g/delivery-like.partial-week_{name}");
        assert!(read(d, &format!("{stem}.svg")).starts_with("<svg"));
        assert!(!read(d, &format!("{stem}.csv")).is_empty());
    }
    let hist = records(&read(d, "g/delivery-like.partial-week_theta_week.csv"));
    assert_eq!(hist.len(), 1, "partial pooling theta is a point mass");
    assert_eq!(&hist[0][0], "1");
    assert_eq!(&hist[0][2], "200");
    let m = records(&read(d, "g/delivery-like.partial-week_m.csv"));
    assert_eq!(m.len(), 7);

    ok(d, &["evaluate", "--config", "run.toml", "--data", "data/delivery-like.csv", "--out", "e"]);
    ok(d, &["plot", "--report", "e/report.json", "--out", "h"]);
    let overlay = records(&read(d, "h/delivery-like.forecast.csv"));
    assert_eq!(overlay.iter().filter(|r| &r[1] == "actual").count(), 28);
    assert_eq!(overlay.iter().filter(|r| &r[1] == "partial-week").count(), 28);
}

#[test]
fn errors_are_one_categorized_line() {
    let dir = setup();
    let d = dir.path();
    let out = hiercast(d, &["fit", "--data", "missing.csv"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().filter(|l| l.starts_with("error[")).count(), 1, "{err}");
    assert!(err.contains("error[config]: data file missing.csv does not exist"), "{err}");

    let out = hiercast(d, &["fit", "--data", "data/delivery-like.csv", "--model", "arima"]);
    assert!(String::from_utf8(out.stderr).unwrap().contains("error[config]: unknown model 'arima'"));

    std::fs::write(d.join("bad.csv"), "date,value\n2018-01-01,1\n2018-01-01,2\n").unwrap();
    let out = hiercast(d, &["evaluate", "--data", "bad.csv"]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("error[data]:") && err.contains("duplicate date"), "{err}");
}

#[test]
fn plots_without_draws_explain_what_is_missing() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["fit", "--data", "data/delivery-like.csv", "--model", "complete", "--set", "map.restarts=0", "--out", "f"]);
    let path = d.join("f/delivery-like.complete.fit.json");
    let mut json: serde_json::Value = serde_json::from_str(&read(d, "f/delivery-like.complete.fit.json")).unwrap();
    json["fitted"]["draws"] = serde_json::Value::Null;
    std::fs::write(&path, json.to_string()).unwrap();
    let out = hiercast(d, &["plot", "--fit", "f/delivery-like.complete.fit.json", "--out", "g"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error[contract]:") && err.contains("posterior draws"), "{err}");
}
