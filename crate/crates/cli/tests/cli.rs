use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qssm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qssm")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_header(p: &Path) -> String {
    fs::read_to_string(p).unwrap().lines().next().unwrap().to_string()
}

const GHZ4: &str = r#"
seed = 5

[target]
family = "ghz"
n = 4

[train]
depth = 4
cost_tol = 0.0
"#;

fn learn(dir: &TempDir, command: &str, sub: &str) -> std::path::PathBuf {
    let cfg = write_config(dir.path(), "ghz4.toml", GHZ4);
    let out = dir.path().join(sub);
    let o = qssm(&[command, "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn learn_ghz4() {
    let dir = TempDir::new().unwrap();
    let out = learn(&dir, "learn", "q");
    let s = read_json(&out.join("summary.json"));
    assert!(s["fidelity"].as_f64().unwrap() >= 0.99, "{s}");
    assert_eq!(s["widths"], serde_json::json!([2, 3, 2, 1]));
    assert!(out.join("model.json").exists());
    for k in 1..=4 {
        assert_eq!(csv_header(&out.join(format!("trace_layer_{k}.csv"))), "iteration,cost");
    }
}

#[test]
fn compare_identical_runs_has_zero_deltas() {
    let dir = TempDir::new().unwrap();
    let out = learn(&dir, "learn", "q");
    let summary = out.join("summary.json");
    let s = summary.to_str().unwrap();
    let cmp = dir.path().join("cmp");
    let o = qssm(&["compare", s, s, "--out", cmp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = read_json(&cmp.join("comparison.json"));
    assert_eq!(c["fidelity_delta"].as_f64(), Some(0.0));
    assert_eq!(c["total_iterations_delta"].as_i64(), Some(0));
}

#[test]
fn compare_against_global_run() {
    let dir = TempDir::new().unwrap();
    let q = learn(&dir, "learn", "q");
    let g = learn(&dir, "learn-global", "g");
    assert_eq!(csv_header(&g.join("trace_global.csv")), "iteration,cost");
    let cmp = dir.path().join("cmp");
    let o = qssm(&[
        "compare",
        q.join("summary.json").to_str().unwrap(),
        g.join("summary.json").to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = read_json(&cmp.join("comparison.json"));
    let d = c["first_fidelity"].as_f64().unwrap() - c["second_fidelity"].as_f64().unwrap();
    assert!((c["fidelity_delta"].as_f64().unwrap() - d).abs() < 1e-15);
}

#[test]
fn rank_seq_prints_braced_list() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "r.toml", "[target]\nfamily = \"ghz\"\nn = 6\n");
    let o = qssm(&["rank-seq", "--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "{2,2,2,2,2,1}");
}

#[test]
fn invalid_fields_are_all_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[target]\nfamily = \"gaussian\"\nn = 4\nsigma = -1.0\n\n[train]\nlearning_rate = 0.0\n",
    );
    let out = dir.path().join("bad");
    let o = qssm(&["learn", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sigma") && err.contains("learning_rate"), "{err}");
    let report = read_json(&out.join("error.json"));
    assert_eq!(report["error"], "validation");
    assert_eq!(report["violations"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = qssm(&["learn", "--config", missing.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("\"io\""));
}

#[test]
fn unknown_field_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "u.toml", "command = \"learn\"\nsede = 3\n");
    let o = qssm(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sede"));
}

#[test]
fn json_config_and_run_command() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "h.json",
        r#"{"command": "haar-check", "seed": 2, "haar": {"dims": [2], "samples": 2000}}"#,
    );
    let out = dir.path().join("h");
    let o = qssm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_header(&out.join("haar.csv")), "identity,d,samples,estimate,exact,rel_error");
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn variance_sweep_writes_csv_and_slopes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "v.toml",
        "[variance]\nfamily = \"ghz\"\nn_values = [2, 4]\nsteps = [\"last\", \"global\"]\nsamples = 50\nseed = 1\n",
    );
    let out = dir.path().join("v");
    let o = qssm(&["variance", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let header = csv_header(&out.join("variance.csv"));
    assert!(header.starts_with("family,n,step,k,width,samples,mean,variance"), "{header}");
    let s = read_json(&out.join("summary.json"));
    assert!(s["steps"]["global"]["log2_slope"].is_number());
}

#[test]
fn noisy_run_writes_traces() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "n.toml",
        "[target]\nfamily = \"ghz\"\nn = 2\n\n[noisy]\nrestarts = 2\n\n[noisy.optimizer]\nmax_evals = 60\n\n[shots]\nshots = 256\n",
    );
    let out = dir.path().join("n");
    let o = qssm(&["noisy", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_header(&out.join("noisy_trace.csv")), "iteration,cost,restart,k");
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["chosen_restarts"].as_array().unwrap().len(), 2);
    assert_eq!(s["distribution"].as_array().unwrap().len(), 4);
}

#[test]
fn noisy_rejects_large_targets() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "n.toml", "[target]\nfamily = \"ghz\"\nn = 8\n");
    let o = qssm(&["noisy", "--config", &cfg, "--out", dir.path().join("n").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target.n"));
}
