use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dpmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpmix")).args(args).output().expect("binary runs")
}

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo").join(name)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn column(csv: &[u8]) -> Vec<f64> {
    std::str::from_utf8(csv)
        .unwrap()
        .lines()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "g.json", r#"{"type": "gaussian", "mus": [0.0], "sigmas": [1.0]}"#);
    let a = dpmix(&["gen", "--model", &model, "--n", "5", "--seed", "1"]);
    let b = dpmix(&["gen", "--model", &model, "--n", "5", "--seed", "1"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().all(|l| !l.contains(',')));
    let c = dpmix(&["gen", "--model", &model, "--n", "5", "--seed", "2"]);
    assert_ne!(text.as_bytes(), c.stdout.as_slice());
}

#[test]
fn gen_corruption_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "c.json",
        r#"{"type": "corrupted", "gamma": 0.9,
            "target": {"type": "gaussian", "mus": [0.0], "sigmas": [1.0]},
            "contaminant": {"type": "gaussian", "mus": [100.0], "sigmas": [1.0]}}"#,
    );
    let out = dpmix(&["gen", "--model", &model, "--n", "100000", "--seed", "3"]);
    let xs = column(&out.stdout);
    let frac = xs.iter().filter(|&&x| x > 50.0).count() as f64 / xs.len() as f64;
    assert!((frac - 0.9).abs() <= 0.01, "{frac}");
}

#[test]
fn gen_mixture_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "m.json",
        r#"{"type": "mixture", "weights": [0.3, 0.7], "mus": [[-50.0], [50.0]], "sigmas": [[1.0], [1.0]]}"#,
    );
    let out = dpmix(&["gen", "--model", &model, "--n", "100000", "--seed", "4"]);
    let xs = column(&out.stdout);
    let left = xs.iter().filter(|&&x| x < 0.0).count() as f64 / xs.len() as f64;
    assert!((left - 0.3).abs() <= 0.01, "{left}");
}

#[test]
fn bad_model_schema_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "bad.json", r#"{"type": "mixture", "weights": [1.0], "mus": [["x"]], "sigmas": [[1.0]]}"#);
    let out = dpmix(&["gen", "--model", &model, "--n", "5"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("$.mus[0][0]"), "{}", stderr(&out));
}

#[test]
fn learn_missing_input_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("model.json");
    let out = dpmix(&["learn", "--input", "/no/such/data.csv", "--output", output.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!output.exists());
}

#[test]
fn learn_below_plan_names_required_n() {
    let out = dpmix(&["learn", "--input", demo("k2_univariate.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("23070853029"), "{}", stderr(&out));
}

#[test]
fn learn_overflow_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("model.json");
    let out = dpmix(&["learn", "--config", demo("learn_k2.json").to_str().unwrap(), "--output", output.to_str().unwrap()]);
    assert_eq!(code(&out), 5);
    assert_eq!(stderr(&out), std::fs::read_to_string(demo("expected/learn_k2.stderr")).unwrap());
    assert!(!output.exists());
}

#[test]
fn decode_demos_match_fixtures() {
    for name in ["decode_k2", "decode_identity"] {
        let out = dpmix(&["decode", "--config", demo(&format!("{name}.json")).to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let expected = std::fs::read(demo(&format!("expected/{name}.json"))).unwrap();
        assert_eq!(out.stdout, expected, "{name}");
    }
}

#[test]
fn decode_k2_lists_both_components() {
    let out = dpmix(&["decode", "--config", demo("decode_k2.json").to_str().unwrap()]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let means: Vec<f64> = report["means"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for centre in [-10.0, 10.0] {
        assert!(means.iter().any(|m| (m - centre).abs() <= 0.25), "{means:?}");
    }
    assert!(report["candidates"].as_f64().unwrap() <= report["list_cap"].as_f64().unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "cfg.json",
        &format!(
            r#"{{"input": "{}", "family": "known-sigma", "sigma": 1.0, "epsilon": 5.0}}"#,
            demo("k2_univariate.csv").display()
        ),
    );
    assert_eq!(code(&dpmix(&["decode", "--config", &config])), 2);
    let out = dpmix(&["decode", "--config", &config, "--epsilon", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let typo = write(dir.path(), "typo.json", r#"{"epsilonn": 1.0}"#);
    assert_eq!(code(&dpmix(&["decode", "--config", &typo])), 2);
}

#[test]
fn small_learn_run_writes_model_report_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "g.json", r#"{"type": "gaussian", "mus": [4.0], "sigmas": [2.0]}"#);
    let data = dir.path().join("data.csv");
    assert_eq!(
        code(&dpmix(&["gen", "--model", &model, "--n", "20000", "--seed", "7", "--output", data.to_str().unwrap()])),
        0
    );
    let (fitted, report, matrix) = (dir.path().join("fit.json"), dir.path().join("report.json"), dir.path().join("m.csv"));
    let out = dpmix(&[
        "learn", "--input", data.to_str().unwrap(), "--k", "1", "--alpha", "0.5", "--family", "known-sigma",
        "--sigma", "2", "--force", "--dedup", "--seed", "1",
        "--output", fitted.to_str().unwrap(), "--report", report.to_str().unwrap(),
        "--contest-matrix", matrix.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let r: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    for key in ["n1", "n2", "L", "net_size", "candidates", "budget_ledger", "selected_score"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    let tv = dpmix(&["eval", &model, fitted.to_str().unwrap()]);
    let tv: Value = serde_json::from_slice(&tv.stdout).unwrap();
    assert!(tv["estimate"].as_f64().unwrap() <= 0.5);

    let text = std::fs::read_to_string(&matrix).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    let m = r["candidates"].as_u64().unwrap() as usize;
    assert_eq!(rows.len(), m);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), m);
        assert_eq!(row[i], "D");
        for (j, &cell) in row.iter().enumerate() {
            let flip = match rows[j][i] {
                "W" => "L",
                "L" => "W",
                _ => "D",
            };
            assert_eq!(cell, flip);
        }
    }
}

#[test]
fn eval_closed_form_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{"type": "gaussian", "mus": [0.0], "sigmas": [1.0]}"#);
    let b = write(dir.path(), "b.json", r#"{"type": "gaussian", "mus": [2.0], "sigmas": [1.0]}"#);
    let c = write(dir.path(), "c.json", r#"{"type": "gaussian", "mus": [0.0, 0.0], "sigmas": [1.0, 1.0]}"#);

    let same: Value = serde_json::from_slice(&dpmix(&["eval", &a, &a]).stdout).unwrap();
    assert_eq!(same["estimate"].as_f64().unwrap(), 0.0);

    // erf(1/√2) to 15 digits
    let apart: Value = serde_json::from_slice(&dpmix(&["eval", &a, &b]).stdout).unwrap();
    assert!((apart["estimate"].as_f64().unwrap() - 0.682_689_492_137_086).abs() <= 1e-6);
    assert_eq!(apart["method"], "closed-form");

    assert_eq!(code(&dpmix(&["eval", &a, &c])), 2);
}

#[test]
fn eval_mixtures_resolves_finely() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(
        dir.path(),
        "a.json",
        r#"{"type": "mixture", "weights": [0.4, 0.6], "mus": [[-1.0], [2.5]], "sigmas": [[1.0], [0.7]]}"#,
    );
    let b = write(
        dir.path(),
        "b.json",
        r#"{"type": "mixture", "weights": [0.55, 0.45], "mus": [[-0.5], [3.0]], "sigmas": [[1.3], [0.9]]}"#,
    );
    let out = dpmix(&["eval", &a, &b, "--effort", "10000000"]);
    let tv: Value = serde_json::from_slice(&out.stdout).unwrap();
    let estimate = tv["estimate"].as_f64().unwrap();
    assert!(estimate > 0.0 && estimate < 1.0);
    assert!(tv["std_error"].as_f64().unwrap() <= 1e-3);
}

fn sweep_rows(args: &[&str]) -> Vec<Vec<String>> {
    let out = dpmix(args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,param_name,param_value,trials,successes,success_rate,mean_tv,mean_runtime_s");
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

fn rate(row: &[String]) -> f64 {
    row[5].parse().unwrap()
}

/// `later` may fall short of `earlier` by at most two standard errors.
fn non_decreasing(rates: &[f64], trials: f64) {
    for w in rates.windows(2) {
        let se = ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / trials).sqrt();
        assert!(w[1] >= w[0] - 2.0 * se, "{rates:?}");
    }
}

#[test]
fn one_point_sweep() {
    let rows = sweep_rows(&["sweep", "--n", "1000", "--trials", "1"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][3], "1");
}

#[test]
fn mean_decoder_sweep_is_monotone() {
    let rows = sweep_rows(&["sweep", "--task", "mean-decoder", "--n", "1000,10000,100000", "--gamma", "0.5", "--trials", "20"]);
    let ns: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(ns, vec![1000, 10000, 100000]);
    non_decreasing(&rows.iter().map(|r| rate(r)).collect::<Vec<_>>(), 20.0);

    let rows = sweep_rows(&[
        "sweep", "--task", "mean-decoder", "--n", "400", "--param", "epsilon", "--values", "0.25,0.5,1", "--trials", "40",
    ]);
    let rates: Vec<f64> = rows.iter().map(|r| rate(r)).collect();
    non_decreasing(&rates, 40.0);
    assert!(rates[2] > rates[0], "{rates:?}");
}

#[test]
fn sweep_outputs_are_reproducible_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("s.json");
    let config = demo("sweep_mean.json");
    let args = ["sweep", "--config", config.to_str().unwrap()];
    let strip = |rows: Vec<Vec<String>>| -> Vec<Vec<String>> { rows.into_iter().map(|r| r[..7].to_vec()).collect() };
    let a = strip(sweep_rows(&args));
    let b = strip(sweep_rows(&[&args[..], &["--summary", summary.to_str().unwrap()]].concat()));
    assert_eq!(a, b);
    let s: Value = serde_json::from_slice(&std::fs::read(&summary).unwrap()).unwrap();
    assert_eq!(s["rows"].as_array().unwrap().len(), a.len());
}
