//! End-to-end runs of the `arnold` binary.

use std::process::{Command, Output};

use serde_json::Value;

fn arnold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arnold")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = arnold(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut v = args.to_vec();
    v.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&v)).unwrap()
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn regime_examples() {
    for (a10, want) in [("0.6", "SingleMap"), ("0.9", "Tangency"), ("1.5", "Holes")] {
        let v = json(&["regime", "--a10", a10, "--a01", "1"]);
        assert_eq!(v["regime"], want);
    }
}

#[test]
fn crest_samples() {
    let (h, rows) = csv(&stdout(&["crests", "--mu", "0.6", "--I", "1.2", "--grid", "50"]));
    assert_eq!(h, ["branch", "phi", "s", "residual"]);
    assert_eq!(rows.len(), 100);
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() <= 1e-12);
    }
    assert_eq!(json(&["crests", "--mu", "0.6", "--I", "1.2"])["orientation"], "Horizontal");
    assert_eq!(json(&["crests", "--mu", "1.2", "--I", "1"])["orientation"], "Vertical");
}

#[test]
fn portrait_grid_and_contours() {
    let args = ["portrait", "--mu", "0.6", "--grid", "21", "--I-min", "-3", "--I-max", "3"];
    let text = stdout(&args);
    let (h, rows) = csv(&text);
    assert_eq!(h, ["kind", "index", "I", "theta", "value"]);
    let grid: Vec<f64> = rows.iter().filter(|r| r[0] == "grid").map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(grid.len(), 21 * 21);
    assert!(rows.iter().any(|r| r[0] == "contour"));
    // rows of I and −I agree
    for a in 0..21 {
        for b in 0..21 {
            assert!((grid[a * 21 + b] - grid[(20 - a) * 21 + b]).abs() < 1e-10);
        }
    }
    // byte-stable
    assert_eq!(text, stdout(&args));

    let v = json(&["portrait", "--mu", "1.5", "--grid", "60"]);
    let holes = v["values"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).filter(|x| x.is_null()).count();
    assert!(holes > 0);
    let csv_holes = stdout(&["portrait", "--mu", "1.5", "--grid", "60"]).matches(",NaN").count();
    assert_eq!(csv_holes, holes);
}

#[test]
fn highways_and_tangency_tables() {
    let (h, rows) = csv(&stdout(&["highways", "--mu", "0.6", "--grid", "81"]));
    assert_eq!(h, ["side", "I", "theta", "psi", "residual"]);
    assert_eq!(rows.len(), 2 * 81);
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() <= 1e-10));
    let (h, rows) = csv(&stdout(&["tangency", "--mu", "0.9", "--grid", "30", "--Istar", "3"]));
    assert_eq!(h, ["I", "psi1", "psi2", "theta1", "theta2"]);
    assert!(!rows.is_empty());
    let (_, none) = csv(&stdout(&["tangency", "--mu", "0.5", "--grid", "30"]));
    assert!(none.is_empty());
}

#[test]
fn orbit_example() {
    let (h, rows) = csv(&stdout(&["orbit", "--mu", "0.6", "--eps", "0.05", "--Istar", "4"]));
    assert_eq!(h, ["leg", "mechanism", "I", "theta", "model_time"]);
    let last: f64 = rows.last().unwrap()[2].parse().unwrap();
    assert!(last >= 4.0);
    assert!(rows.iter().any(|r| r[1] == "inner"));
    let v = json(&["orbit", "--mu", "0.6", "--eps", "0.05", "--Istar", "1", "--side", "right"]);
    assert!(v["legs"].as_array().unwrap().len() > 1);
}

#[test]
fn difftime_and_epsstar() {
    let out = arnold(&["difftime", "--eps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&["difftime", "--Istar", "2"]);
    for key in ["Ts", "Ns", "Nss", "Th", "Ti", "C", "Td", "delta", "ratio"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let e = json(&["epsstar", "--mu", "0.9", "--Istar", "4"]);
    let eps = e["eps_star"].as_f64().unwrap();
    assert!((eps - 0.07).abs() <= 0.2 * 0.07, "{eps}");
}

#[test]
fn verify_suite_passes() {
    let out = arnold(&["verify"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("check,status,detail\n"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn configuration_errors_and_precedence() {
    assert_eq!(arnold(&["regime", "--mu", "0.9", "--a10", "0.9"]).status.code(), Some(2));
    assert_eq!(arnold(&["portrait", "--grid", "1"]).status.code(), Some(2));
    assert_eq!(arnold(&["regime", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(arnold(&["regime", "--a10", "0"]).status.code(), Some(2));
    assert_eq!(arnold(&["regime", "--config", "/nonexistent/arnold.cfg"]).status.code(), Some(2));

    let dir = std::env::temp_dir().join(format!("arnold-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# paper example\na10 = 0.9\nformat = json\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let v: Value = serde_json::from_str(&stdout(&["regime", "--config", cfg_s])).unwrap();
    assert_eq!(v["regime"], "Tangency");
    let v: Value = serde_json::from_str(&stdout(&["regime", "--config", cfg_s, "--a10", "1.5"])).unwrap();
    assert_eq!(v["regime"], "Holes");

    let out = dir.join("regime.csv");
    stdout(&["regime", "--out", out.to_str().unwrap()]);
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("regime,mu,"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn numeric_failure_exit_code() {
    // vertical crest at I* = 1 for μ = 1.5: ε* needs a horizontal one
    let out = arnold(&["epsstar", "--mu", "1.5", "--Istar", "1"]);
    assert_eq!(out.status.code(), Some(1));
    // no drift without a perturbation
    let out = arnold(&["orbit", "--mu", "0.6", "--eps", "0", "--Istar", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("arnold: "));
}
