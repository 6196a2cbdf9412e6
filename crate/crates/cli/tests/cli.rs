use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spe(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn wdbc() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/wdbc.data")
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .expect("file exists")
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn fit_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = [
        "fit",
        "--scenario",
        "ring",
        "--n",
        "120",
        "--components",
        "9",
        "--seed",
        "3",
    ];
    assert!(spe(&args, &a).status.success());
    assert!(spe(&args, &b).status.success());
    for f in ["fit.json", "sample.csv", "grid.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let fit: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["n"], 120);
    assert_eq!(fit["mixture"]["weights"].as_array().unwrap().len(), 9);
    assert!(fit["ise"].as_f64().unwrap() > 0.0);
}

#[test]
fn fit_reads_a_csv_sample() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    let rows: String = (0..60)
        .map(|i| format!("{},{}\n", (i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect();
    fs::write(&input, rows).unwrap();
    let out = dir.path().join("out");
    let res = spe(
        &[
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--method",
            "em",
            "--components",
            "4",
        ],
        &out,
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let fit: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("fit.json")).unwrap()).unwrap();
    assert!(fit["ise"].is_null());
    assert_eq!(lines(&out.join("sample.csv")).len(), 60);
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = spe(&["fit", "--input", "/nonexistent/sample.csv"], &out);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unknown_estimator_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = spe(&["classify", "--estimator", "naive-bayes"], &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn classify_smoke_run_writes_one_rate_per_rep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let data = wdbc();
    let res = spe(
        &[
            "classify",
            "--data",
            data.to_str().unwrap(),
            "--reps",
            "5",
            "--estimator",
            "spe",
            "--estimator",
            "constant",
        ],
        &out,
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let rates = lines(&out.join("rates_spe.csv"));
    assert_eq!(rates[0], "rep,seed,rate");
    assert_eq!(rates.len(), 6);
    let table = lines(&out.join("table.csv"));
    assert_eq!(table.len(), 3);
    assert!(table[1].starts_with("spe,5,0,"));
}

#[test]
fn benchmark_smoke_run_covers_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = spe(
        &[
            "benchmark",
            "--scenario",
            "normal-mix",
            "--n",
            "60",
            "--reps",
            "2",
            "--seed",
            "5",
        ],
        &out,
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = lines(&out.join("ise.csv"));
    assert_eq!(csv[0], "scenario,method,n,seed,ise,sqrt_ise,wall_ms");
    // hist, perturbed, spe-hist, spe-perturbed, kde-cv, direct, em
    assert_eq!(csv.len(), 1 + 2 * 7);
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reports"].as_array().unwrap().len(), 7);
}

#[test]
fn width_sweep_has_one_record_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(
        &cfg,
        "sweep = \"width\"\nsweep_n = 60\nsweep_components = 9\nreps = 1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = spe(&["benchmark", "--config", cfg.to_str().unwrap()], &out);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = lines(&out.join("sweep.csv"));
    assert_eq!(csv.len(), 1 + 40 * 2);
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 80);
}

#[test]
fn pathology_demo_writes_masses_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.json");
    fs::write(
        &cfg,
        r#"{"setups": [{"scenario": "gamma-indep", "n": 80, "components": 9}], "reps": 2, "grid_cells": 32}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = spe(&["demo-pathology", "--config", cfg.to_str().unwrap()], &out);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(lines(&out.join("masses.csv")).len(), 3);
    assert_eq!(
        lines(&out.join("grid_gamma-indep_n80_S9_spe.csv")).len(),
        1 + 32 * 32
    );
}
