use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FREE: &str = r#"
seed = 5

[geometry]
space = "euclidean"
window = [[0.0, 4.0]]

[kernel]
kernel = "gaussian"
dim = 1

[potential]
potential = "widom_rowlinson"
beta = 0.0

[sampler]
intensity = 2.0
thin = 20
chains = 3
n_samples = 3200

[[estimate]]
kind = "laplace"
h = { kind = "cosine_bump", center = [2.0], radius = 1.0, height = 1.0 }

[[estimate]]
kind = "moment"
points = [[{ re = 2.0, im = 0.3 }], [{ re = 1.5, im = 0.0 }]]
conj = [true, false]

[verify]
tests = ["conditions", "poisson_null", "dominance"]
"#;

fn wickfield(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_wickfield"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn same_seed_gives_identical_bytes_across_worker_counts() {
    let mut outputs = Vec::new();
    for workers in ["1", "3", "1"] {
        let dir = TempDir::new().unwrap();
        let out = wickfield(dir.path(), FREE, &["estimate", "--workers", workers]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(dir.path().join("estimates.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let dir = TempDir::new().unwrap();
    let out = wickfield(dir.path(), FREE, &["estimate", "--seed", "6"]);
    assert!(out.status.success());
    assert_ne!(outputs[0], std::fs::read(dir.path().join("estimates.json")).unwrap());
}

#[test]
fn empty_estimate_list_writes_empty_records() {
    let config: String = FREE.split("[[estimate]]").next().unwrap().to_string() + "[verify]\ntests = []\n";
    let dir = TempDir::new().unwrap();
    let out = wickfield(dir.path(), &config, &["estimate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = read_json(&dir.path().join("estimates.json"));
    assert_eq!(json["records"], Value::Array(vec![]));
    assert_eq!(json["config"]["estimate"], Value::Array(vec![]));
}

/// `int_0^4 (e^{-h} - 1) dx` for the cosine bump by composite Simpson.
fn laplace_exponent() -> f64 {
    let n = 4000;
    let dx = 2.0 / n as f64;
    let f = |x: f64| {
        let h = (std::f64::consts::FRAC_PI_2 * (x - 2.0)).cos().powi(2);
        (-h).exp() - 1.0
    };
    let mut s = f(1.0) + f(3.0);
    for i in 1..n {
        s += f(1.0 + i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * dx / 3.0
}

#[test]
fn free_model_end_to_end() {
    let dir = TempDir::new().unwrap();
    let out = wickfield(dir.path(), FREE, &["sample"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let archive = read_json(&dir.path().join("samples.json"));
    assert_eq!(archive["samples"].as_array().unwrap().len(), 3200);
    assert_eq!(archive["config"]["sampler"]["n_samples"], 3200);
    assert_eq!(archive["config"]["potential"]["grid_h"], 0.05);

    let samples = dir.path().join("samples.json");
    let out = wickfield(dir.path(), FREE, &["estimate", "--samples", samples.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = read_json(&dir.path().join("estimates.json"));
    let rec = &json["records"][0];
    assert_eq!(rec["label"], "laplace_0");
    let exact = (2.0 * laplace_exponent()).exp();
    let value = rec["value"]["re"].as_f64().unwrap();
    let se = rec["stderr_re"].as_f64().unwrap();
    assert!((value - exact).abs() <= 3.0 * se, "L(h) = {value} +- {se}, exact {exact}");
    assert_eq!(rec["value"]["im"], 0.0);
    let moment = &json["records"][1];
    assert_eq!(moment["points"][0][0]["im"], 0.3);
    assert_eq!(moment["conj"], serde_json::json!([true, false]));

    let out = wickfield(dir.path(), FREE, &["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json = read_json(&dir.path().join("verify.json"));
    assert_eq!(json["passed"], true);
    assert_eq!(json["reports"].as_array().unwrap().len(), 3);
}

#[test]
fn report_compares_against_the_oracle() {
    let config = FREE.replace("[[0.0, 4.0]]", "[[1.5, 2.5]]") + "\n[oracle]\nnmax = 18\n";
    let dir = TempDir::new().unwrap();
    let out = wickfield(dir.path(), &config, &["report"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("label,estimate_re"));
    for line in &lines[1..] {
        assert!(line.ends_with(",true"), "{line}");
    }
}

#[test]
fn validation_errors_exit_with_one() {
    let cases = [
        FREE.replace("[[0.0, 4.0]]", "[[4.0, 0.0]]"),
        FREE.replace("beta = 0.0", "beta = 0.0\nbogus = 1"),
        FREE.replace("\"poisson_null\"", "\"no_such_test\""),
        FREE.replace("dim = 1", "dim = 2"),
        FREE.replace("thin = 20", "thin = 0"),
    ];
    for config in cases {
        let dir = TempDir::new().unwrap();
        let out = wickfield(dir.path(), &config, &["estimate"]);
        assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
        assert!(!dir.path().join("estimates.json").exists());
    }
}

#[test]
fn numerical_failure_exits_with_two() {
    let config = format!("{FREE}\n[oracle]\nnmax = 3\n");
    let dir = TempDir::new().unwrap();
    let out = wickfield(dir.path(), &config, &["oracle"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_verification_exits_with_three() {
    // With no boost the mixed moment is unchanged, so the non-invariance claim fails.
    let config = r#"
[geometry]
space = "euclidean"
window = [[-5.0, 5.0], [-5.0, 5.0]]

[kernel]
kernel = "gaussian"
dim = 2

[potential]
potential = "widom_rowlinson"
beta = 0.0

[verify]
tests = ["mixed_exact"]
chi = 0.0
"#;
    let dir = TempDir::new().unwrap();
    let out = wickfield(dir.path(), config, &["verify"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(read_json(&dir.path().join("verify.json"))["passed"], false);
}
