//! Front-end behavior: report reproducibility, error wording, exit codes,
//! configuration files, and the registry round trip.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_robust-growth")
}

fn run_in(dir: &PathBuf, args: &[&str]) -> Output {
    let mut full = vec!["--out", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    Command::new(bin()).args(full).output().expect("binary runs")
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rg-cli-{tag}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn strip_wall_clock(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("wall_clock_ms"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn list_examples_has_eight_entries() {
    let dir = fresh_dir("list");
    let out = run_in(&dir, &["list-examples"]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("list-examples.json")).unwrap())
            .unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 8);
}

#[test]
fn every_registry_entry_round_trips_through_verify() {
    let names = [
        "ex-6.1.1",
        "ex-6.1.2",
        "ex-6.1.3",
        "ex-6.1.4",
        "ex-6.1.5",
        "gbm-6.2.1",
        "simplex-6.2.1",
        "bessel-4.3",
    ];
    for name in names {
        let dir = fresh_dir(&format!("verify-{name}"));
        let out = run_in(&dir, &["verify-example", name]);
        assert!(
            out.status.success(),
            "{name} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("verify-example.json")).unwrap())
                .unwrap();
        assert_eq!(report["results"]["pass"], serde_json::Value::Bool(true));
    }
}

#[test]
fn unknown_example_exits_one_and_lists_names() {
    let dir = fresh_dir("unknown");
    let out = run_in(&dir, &["verify-example", "no-such-model"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown registry name"), "stderr: {err}");
    assert!(err.contains("ex-6.1.1"), "stderr should list known names: {err}");
}

#[test]
fn eigen_inline_wright_fisher() {
    let dir = fresh_dir("eigen-wf");
    let out = run_in(
        &dir,
        &["eigen", "--c", "x*(1-x)", "--interval", "0", "1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("eigen.json")).unwrap()).unwrap();
    let lambda = report["results"]["lambda"].as_f64().unwrap();
    assert!((lambda - 1.0).abs() < 1e-3, "lambda = {lambda}");
    // the report carries the fields of the declared schema
    for key in [
        "lambda",
        "residual_max",
        "epsilons",
        "per_epsilon_lambdas",
        "classification",
    ] {
        assert!(
            report["results"].get(key).is_some(),
            "missing field {key}"
        );
    }
}

#[test]
fn classify_inline_cubed_covariance_is_zero() {
    let dir = fresh_dir("classify-cubed");
    let out = run_in(
        &dir,
        &["classify", "--c", "x^3*(1-x)^3", "--interval", "0", "1"],
    );
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("classify.json")).unwrap()).unwrap();
    assert_eq!(report["results"]["lambda_sign"], "zero");
}

#[test]
fn identical_config_and_seed_give_byte_identical_reports() {
    let args = [
        "--seed",
        "42",
        "simulate",
        "--example",
        "ex-6.1.1",
        "--measure",
        "star",
        "--t",
        "0.5",
        "--dt",
        "1e-3",
        "--paths",
        "500",
    ];
    let d1 = fresh_dir("repro-1");
    let d2 = fresh_dir("repro-2");
    assert!(run_in(&d1, &args).status.success());
    assert!(run_in(&d2, &args).status.success());
    let r1 = strip_wall_clock(&fs::read_to_string(d1.join("simulate.json")).unwrap());
    let r2 = strip_wall_clock(&fs::read_to_string(d2.join("simulate.json")).unwrap());
    assert_eq!(r1, r2, "reports differ beyond the wall clock");
}

#[test]
fn config_file_supplies_parameters_and_flags_override() {
    let dir = fresh_dir("config");
    let cfg_path = dir.join("run.toml");
    fs::write(
        &cfg_path,
        r#"
[run]
seed = 7

[model]
example = "ex-6.1.1"

[sim]
t = 0.25
dt = 1e-3
paths = 200
"#,
    )
    .unwrap();
    let out = run_in(
        &dir,
        &["--config", cfg_path.to_str().unwrap(), "simulate"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["inputs"]["config"]["n_paths"], 200);

    // a flag overrides the file value
    let out = run_in(
        &dir,
        &[
            "--config",
            cfg_path.to_str().unwrap(),
            "--seed",
            "9",
            "simulate",
            "--paths",
            "100",
        ],
    );
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["inputs"]["config"]["n_paths"], 100);
}

#[test]
fn error_messages_name_the_violated_precondition_and_module() {
    // missing model entirely
    let dir = fresh_dir("err-model");
    let out = run_in(&dir, &["eigen"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model module"), "stderr: {err}");

    // inverted interval
    let out = run_in(
        &dir,
        &["eigen", "--c", "x", "--interval", "1", "0"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("alpha < beta") && err.contains("model module"),
        "stderr: {err}"
    );

    // bad epsilon ordering reaches the eigen1d validator
    let out = run_in(
        &dir,
        &[
            "eigen",
            "--c",
            "x*(1-x)",
            "--interval",
            "0",
            "1",
            "--epsilons",
            "1e-3,1e-5,1e-4",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eigen1d"), "stderr: {err}");
    assert!(err.contains("strictly decreasing"), "stderr: {err}");

    // start point outside the effective interior reaches the sde validator
    let out = run_in(
        &dir,
        &[
            "simulate",
            "--example",
            "ex-6.1.1",
            "--x0",
            "0.0001",
            "--t",
            "0.1",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sde"), "stderr: {err}");
}

#[test]
fn simulate_writes_states_csv_when_asked() {
    let dir = fresh_dir("csv");
    let out = run_in(
        &dir,
        &[
            "simulate",
            "--example",
            "ex-6.1.1",
            "--t",
            "0.05",
            "--dt",
            "1e-3",
            "--paths",
            "3",
            "--csv",
        ],
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.join("simulate_states.csv")).unwrap();
    assert!(csv.starts_with("path_id,t,x_1,absorbed"));
}

#[test]
fn numeraire_gate_passes_for_zero_candidate() {
    let dir = fresh_dir("numeraire");
    let out = run_in(
        &dir,
        &[
            "numeraire",
            "--example",
            "ex-6.1.1",
            "--candidate",
            "zero",
            "--t",
            "2",
            "--dt",
            "1e-3",
            "--paths",
            "2000",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("numeraire_ratio.csv").exists());
}

#[test]
fn growth_runs_on_wright_fisher_example() {
    let dir = fresh_dir("growth");
    let out = run_in(
        &dir,
        &[
            "growth",
            "--example",
            "ex-6.1.1",
            "--t",
            "20",
            "--dt",
            "1e-3",
            "--paths",
            "200",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("growth.json")).unwrap()).unwrap();
    let g_hat = report["results"]["g_hat"].as_f64().unwrap();
    assert!((g_hat - 1.0).abs() < 0.25, "g_hat = {g_hat}");
    assert!(dir.join("growth_curve.csv").exists());
}

#[test]
fn arbitrage_gate_passes_on_the_half_line_model() {
    let dir = fresh_dir("arbitrage");
    let out = run_in(
        &dir,
        &[
            "arbitrage",
            "--t",
            "1",
            "--horizons",
            "4,16,64",
            "--dt",
            "1e-3",
            "--paths",
            "300",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.join("arbitrage_deviation.csv").exists());
}

#[test]
fn robustness_sweep_reports_tightness() {
    let dir = fresh_dir("sweep");
    let out = run_in(
        &dir,
        &[
            "robustness-sweep",
            "--example",
            "ex-6.1.1",
            "--drift",
            "5*(0.5-x)",
            "--drift",
            "-5*x",
            "--t",
            "20",
            "--dt",
            "1e-3",
            "--paths",
            "100",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("robustness-sweep.json")).unwrap())
            .unwrap();
    let rows = report["results"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["tight"], true);
    assert_eq!(rows[1]["tight"], false);
}
