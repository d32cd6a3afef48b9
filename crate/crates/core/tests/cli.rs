use std::path::{Path, PathBuf};
use std::process::Command;

use waitmarket::cli::{fmt_f64, main_with_args};
use waitmarket::config::{load_config, parse_config, Overrides};
use waitmarket::{fixtures, Error};

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_waitmarket"))
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn key_value(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

fn env_json(lambda: f64, v_buyer: [f64; 2]) -> String {
    format!(
        r#"{{"prior":[0.2,0.8],"v_buyer":[{},{}],"v_seller":[2,1],"arrival_rate":{lambda},
           "signals":{{"family":"binary-table","top":[0.1,0.2]}},"types":{{"family":"uninformed"}}}}"#,
        v_buyer[0], v_buyer[1]
    )
}

#[test]
fn bundled_config_loads() {
    let cfg = load_config(&repo_file("configs/env-a0.json")).unwrap();
    assert_eq!(cfg.environment, fixtures::env_a0(401));
    assert_eq!(cfg.seed, 20240101);
    assert_eq!(cfg.runs, 100_000);
    assert_eq!(cfg.sweep.unwrap().values().unwrap().len(), 10);
}

#[test]
fn negative_arrival_rate_is_rejected() {
    let text = format!(r#"{{"environment": {}}}"#, env_json(-1.0, [1.0, 2.0]));
    match parse_config(&text, Path::new("."), &Overrides::default()) {
        Err(Error::Config(m)) => assert!(m.contains("arrival_rate must be > 0"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_keys_and_syntax_errors() {
    let text = format!(r#"{{"environment": {}, "bogus": 1}}"#, env_json(1.0, [1.0, 2.0]));
    assert!(matches!(parse_config(&text, Path::new("."), &Overrides::default()), Err(Error::Config(_))));
    match parse_config("{\n  \"seed\": ,\n}", Path::new("."), &Overrides::default()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_crossing_violation_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", &format!(r#"{{"environment": {}}}"#, env_json(1.0, [3.0, 4.0])));
    assert!(matches!(load_config(&cfg), Err(Error::InvalidEnvironment(_))));

    let out = binary().arg("--config").arg(&cfg).arg("validate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("b:surplus-single-crossing"));
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["error"], "invalid-environment");
    assert!(record["failed_checks"].as_array().unwrap().iter().any(|c| c == "b:surplus-single-crossing"));
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"{{"environment": {}, "sweep": {{"parameter": "prior_high", "start": 0.5, "stop": 0.9, "steps": 0}}}}"#,
        env_json(1.0, [1.0, 2.0])
    );
    let cfg = write(dir.path(), "cfg.json", &text);
    let out = dir.path().join("out");
    let code = main_with_args(["waitmarket", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "sweep"]);
    assert_eq!(code, 2);
}

#[test]
fn unknown_subcommand_exits_with_usage_code() {
    assert_eq!(main_with_args(["waitmarket", "frobnicate"]), 2);
}

#[test]
fn solve_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/env-a0.json");
    let run = |sub: &str, out: &Path| {
        let code = main_with_args([
            "waitmarket",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--grid-nodes",
            "101",
            "--runs",
            "2000",
            sub,
        ]);
        assert_eq!(code, 0, "{sub}");
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run("solve-commitment", out);
        run("solve-equilibrium", out);
        run("simulate", out);
    }
    for name in ["exit_profile.csv", "prices.csv", "value.txt", "equilibrium.csv", "thresholds.csv", "runs.csv", "summary.csv"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
        assert!(!x.contains(&b'\r'));
    }
    let exits = read(&a, "exit_profile.csv");
    assert!(exits.starts_with("y,s_bar\n"));
    let s: f64 = exits.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((s - 8f64.ln() / 0.1).abs() < 1e-6);
    assert_eq!(read(&a, "runs.csv").lines().count(), 2001);
}

#[test]
fn float_format_round_trips() {
    for x in [0.1, 1.0 / 3.0, 20.794415416798357, -2.5e-300, 0.0] {
        let s = fmt_f64(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert!(!s.contains(','));
    }
    assert_eq!(fmt_f64(f64::NAN), "nan");
    assert_eq!(fmt_f64(f64::INFINITY), "inf");
}

#[test]
fn reproduce_figure1() {
    let dir = tempfile::tempdir().unwrap();
    let code = main_with_args(["waitmarket", "--out", dir.path().to_str().unwrap(), "--grid-nodes", "201", "reproduce", "figure1"]);
    assert_eq!(code, 0);
    let csv = read(dir.path(), "figure1.csv");
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 201);
    let column = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let low = column(2);
    assert!(low.windows(2).all(|w| w[1] >= w[0]));
    let mid = column(3);
    assert!(mid.windows(2).any(|w| w[1] > w[0]) && mid.windows(2).any(|w| w[1] < w[0]));
    // high prior: decreasing over the bulk of the type range
    let high = column(1);
    assert!(high[..150].windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn reproduce_appendix_d3() {
    let dir = tempfile::tempdir().unwrap();
    let code = main_with_args(["waitmarket", "--out", dir.path().to_str().unwrap(), "reproduce", "appendix-d3"]);
    assert_eq!(code, 0);
    let csv = read(dir.path(), "appendix_d3.csv");
    assert_eq!(key_value(&csv, "t"), 13.0);
    for key in ["posterior_signal_0", "posterior_top_signal", "p_hat", "highest_surviving_type"] {
        assert!(key_value(&csv, key).is_finite(), "{key}");
    }
    assert_eq!(key_value(&csv, "p_hat"), key_value(&csv, "posterior_top_signal"));
    assert!(key_value(&csv, "posterior_signal_0") < key_value(&csv, "p_hat"));
}
