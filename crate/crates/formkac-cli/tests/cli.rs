//! End-to-end tests of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_formkac"))
}

#[test]
fn list_models_table_and_json() {
    let out = bin().args(["list-models"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("hyperbolic_tube"));
    assert!(text.contains("euclidean_slab"));
    assert!(text.contains("(0, inf)"), "parameter ranges missing: {text}");

    let out = bin().args(["list-models", "--json"]).output().unwrap();
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ids: Vec<&str> = parsed
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["id"].as_str().unwrap())
        .collect();
    assert!(ids.contains(&"hyperbolic_tube"));
    assert_eq!(ids.len(), 8);
}

#[test]
fn malformed_config_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[experiment]\nkind = \"fk\"\nmodel = \"euclidean_halfspace\"\ndim = 3\ndt = 1e-3\nn_paths = 1000\nt_grid = [0.1]\nq = 1\nx0 = [0.0, 0.0, 0.5]\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("seed"), "stderr should name the field: {err}");
}

#[test]
fn selftest_reports_zero_failures() {
    let out = bin().args(["selftest"]).output().unwrap();
    assert!(out.status.success(), "selftest failed: {out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0 failures"), "{text}");
}

#[test]
fn run_writes_reports_and_honors_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
[experiment]
kind = "fk"
model = "euclidean_ball"
dim = 3
seed = 5
dt = 1e-3
n_paths = 300
t_grid = [0.1]
q = 1
x0 = [0.3, 0.0, 0.0]

[experiment.fields]
omega0 = "gaussian_coeffs"
"#,
    )
    .unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let out_c = dir.path().join("c");
    let run = |outdir: &std::path::Path, extra: &[&str]| {
        let mut cmd = bin();
        cmd.args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            outdir.to_str().unwrap(),
        ]);
        cmd.args(extra);
        cmd.output().unwrap()
    };
    let s = run(&out_a, &["--threads", "1"]);
    assert!(s.status.success(), "{s:?}");
    let s = run(&out_b, &["--threads", "2"]);
    assert!(s.status.success());
    let a = std::fs::read(out_a.join("results.csv")).unwrap();
    let b = std::fs::read(out_b.join("results.csv")).unwrap();
    assert_eq!(a, b, "results differ across --threads");

    let s = run(&out_c, &["--seed-override", "6"]);
    assert!(s.status.success());
    let c = std::fs::read(out_c.join("results.csv")).unwrap();
    assert_ne!(a, c, "seed override had no effect");

    // summary validates against the shipped schema
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["seed"], 5);
}

#[test]
fn threads_env_fallback_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
[experiment]
kind = "algebra-suite"
seed = 1
"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .env("FORMKAC_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
}
