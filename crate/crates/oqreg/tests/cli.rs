//! End-to-end tests of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oqreg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn simulate(dir: &Path, model: &str, n: usize, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("{model}_{seed}.csv"));
    let st = run(&[
        "simulate",
        "--model",
        model,
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    out
}

fn fit_args<'a>(model: &'a str, data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "fit",
        "--model",
        model,
        "--data",
        data,
        "--response",
        "y",
        "--covariates",
        "x1,x2",
        "--burn",
        "150",
        "--mcmc",
        "400",
        "--seed",
        "11",
        "--emit-draws",
        "--emit-plots",
        "--quiet",
        "--out",
        out,
    ]
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn missing_data_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let mut args = fit_args("or1", "/nonexistent/file.csv", out_dir.to_str().unwrap());
    let out = run(&args.split_off(0));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_quantile_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "or1", 120, 5);
    let out_dir = dir.path().join("out");
    let mut args = fit_args("or1", data.to_str().unwrap(), out_dir.to_str().unwrap());
    args.extend(["--p", "1.5"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn or2_on_four_category_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "or1", 150, 6);
    let out_dir = dir.path().join("out");
    let out = run(&fit_args("or2", data.to_str().unwrap(), out_dir.to_str().unwrap()));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3 outcome categories"));
}

#[test]
fn fit_writes_summary_draws_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "or1", 200, 7);
    let out_dir = dir.path().join("out");
    let out = run(&fit_args("or1", data.to_str().unwrap(), out_dir.to_str().unwrap()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    for key in [
        "model",
        "quantile",
        "burn",
        "mcmc",
        "seed",
        "parameters",
        "acceptance_rate",
        "log_marg_like",
        "dic",
        "pd",
        "dev_post_mean",
        "config_hash",
    ] {
        assert!(summary.get(key).is_some(), "summary.json missing {key}");
    }
    assert_eq!(summary["model"], "or1");
    assert_eq!(summary["burn"], 150);
    assert_eq!(summary["mcmc"], 400);
    let params = summary["parameters"].as_array().unwrap();
    // 3 coefficients + 2 cut-point transforms for 4 categories
    assert_eq!(params.len(), 5);
    for p in params {
        assert!(p["post_std"].as_f64().unwrap() > 0.0);
        assert!(p["lower_credible"].as_f64().unwrap() <= p["upper_credible"].as_f64().unwrap());
    }

    let draws = fs::read_to_string(out_dir.join("draws.csv")).unwrap();
    let mut lines = draws.lines();
    assert!(lines.next().unwrap().starts_with("# seed=11 config="));
    assert_eq!(lines.next().unwrap(), "intercept,x1,x2,delta_1,delta_2");
    // one row per sweep including burn-in
    assert_eq!(draws.lines().count(), 2 + 150 + 400);

    for name in ["intercept", "x1", "x2", "delta_1", "delta_2"] {
        let svg = out_dir.join(format!("trace_{name}.svg"));
        let text = fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<?xml"), "{name} trace is not XML");
        assert!(text.contains("<polyline"));
    }
}

#[test]
fn or2_summary_has_sigma_and_no_acceptance_rate() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "or2", 200, 8);
    let out_dir = dir.path().join("out");
    let out = run(&fit_args("or2", data.to_str().unwrap(), out_dir.to_str().unwrap()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["model"], "or2");
    assert!(summary.get("acceptance_rate").is_none());
    let params = summary["parameters"].as_array().unwrap();
    assert_eq!(params.last().unwrap()["name"], "sigma");
    assert!(params.last().unwrap()["post_mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn identical_seed_and_config_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "or1", 150, 9);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let st = run(&fit_args("or1", data.to_str().unwrap(), out_dir.to_str().unwrap()));
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    for file in ["summary.json", "draws.csv", "trace_x1.svg"] {
        let a = fs::read(out_a.join(file)).unwrap();
        let b = fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn env_seed_is_fallback_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let env_csv = dir.path().join("env.csv");
    let flag_csv = dir.path().join("flag.csv");
    let both_csv = dir.path().join("both.csv");
    // seed from environment only
    let st = bin()
        .env("OQR_SEED", "123")
        .args(["simulate", "--model", "or1", "--n", "100", "--out", env_csv.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(st.status.success());
    // flag overrides environment
    let st = bin()
        .env("OQR_SEED", "999")
        .args([
            "simulate",
            "--model",
            "or1",
            "--n",
            "100",
            "--seed",
            "123",
            "--out",
            flag_csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(st.status.success());
    // plain flag for reference
    let st = run(&[
        "simulate",
        "--model",
        "or1",
        "--n",
        "100",
        "--seed",
        "123",
        "--out",
        both_csv.to_str().unwrap(),
    ]);
    assert!(st.status.success());
    let body = |p: &Path| {
        let t = fs::read_to_string(p).unwrap();
        t.lines().skip(1).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(body(&env_csv), body(&flag_csv));
    assert_eq!(body(&flag_csv), body(&both_csv));

    let st = bin()
        .env("OQR_SEED", "not-a-number")
        .args(["simulate", "--model", "or1", "--n", "100", "--out", env_csv.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn summary_subcommand_matches_fit_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "or2", 150, 10);
    let out_dir = dir.path().join("out");
    let st = run(&fit_args("or2", data.to_str().unwrap(), out_dir.to_str().unwrap()));
    assert!(st.status.success());
    let out = run(&[
        "summary",
        "--draws",
        out_dir.join("draws.csv").to_str().unwrap(),
        "--burn",
        "150",
    ]);
    assert!(out.status.success());
    let re: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let a = re["parameters"].as_array().unwrap();
    let b = fit["parameters"].as_array().unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x["name"], y["name"]);
        let dx = x["post_mean"].as_f64().unwrap();
        let dy = y["post_mean"].as_f64().unwrap();
        assert!((dx - dy).abs() < 1e-12, "{dx} vs {dy}");
    }
}

#[test]
fn coveffect_sums_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "or1", 200, 12);
    let out_json = dir.path().join("effect.json");
    let out = run(&[
        "coveffect",
        "--model",
        "or1",
        "--data",
        data.to_str().unwrap(),
        "--response",
        "y",
        "--covariates",
        "x1,x2",
        "--burn",
        "150",
        "--mcmc",
        "400",
        "--seed",
        "13",
        "--quiet",
        "--covariate",
        "x1",
        "--amount",
        "0.1",
        "--out",
        out_json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_json).unwrap()).unwrap();
    let effects: Vec<f64> = doc["effects"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(effects.len(), 4);
    let total: f64 = effects.iter().sum();
    assert!(total.abs() < 1e-10, "effects sum to {total}");
    assert!(effects.iter().any(|e| e.abs() > 1e-4));
}
