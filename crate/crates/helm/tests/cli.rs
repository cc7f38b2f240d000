mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::repo_path;

const BEP: &str = "preset = \"bep-echoboat-160\"\nseed = 5\n";

fn helm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helm")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{BEP}{body}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn size_prints_the_plan() {
    let cfg = repo_path("configs/bep-default.toml");
    let o = helm(&["size", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("4 x 161.0 N units"), "{text}");
    let o = helm(&["size", "--config", cfg.to_str().unwrap(), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["plan"]["thruster_count"], 4);
    assert!((v["equilibrium"][0]["speed"].as_f64().unwrap() - 2.2).abs() < 0.01);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[control.loiter]\nradiuss = 3.0\n");
    let o = helm(&["size", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("control.loiter.radiuss"));
    let o = helm(&["sim", "--config", "/nonexistent/helm.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sim_exit_codes_follow_termination() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cfg = write_config(
        dir.path(),
        "[mission]\nitems = [{ kind = \"vel_head_leg\", speed = 1.0, heading = 90.0, duration = 5.0 }]\n",
    );
    let o = helm(&["sim", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["termination"], "completed");
    for f in ["run.jsonl", "run.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }

    let cfg = write_config(
        dir.path(),
        "[mission]\nlink_loss_after = 2.0\nitems = [{ kind = \"vel_head_leg\", speed = 1.0, heading = 0.0, duration = 60.0 }]\n",
    );
    assert_eq!(helm(&["sim", "--config", &cfg, "--out", out]).status.code(), Some(3));

    let cfg = write_config(dir.path(), "[mission]\ntimeout = 3.0\nitems = [{ kind = \"wait\", duration = 10.0 }]\n");
    assert_eq!(helm(&["sim", "--config", &cfg, "--out", out]).status.code(), Some(1));

    let cfg = write_config(dir.path(), "");
    assert_eq!(helm(&["sim", "--config", &cfg, "--out", out]).status.code(), Some(2));
}

#[test]
fn report_reads_a_recorded_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = repo_path("configs/fast-leg.toml");
    let o = helm(&["sim", "--config", cfg.to_str().unwrap(), "--out", out, "--format", "jsonl"]);
    assert_eq!(o.status.code(), Some(0));
    let from_sim: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let log = dir.path().join("run.jsonl");
    let o = helm(&["report", log.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let from_log: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(from_sim, from_log);
    let o = helm(&["report", log.to_str().unwrap()]);
    assert!(stdout(&o).contains("speed rmse"));
    assert_eq!(helm(&["report", "/nonexistent.jsonl"]).status.code(), Some(1));
}

#[test]
fn schema_and_vectors_match_committed_files() {
    let o = helm(&["schema"]);
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let committed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(repo_path("configs/config.schema.json")).unwrap()).unwrap();
    assert_eq!(printed, committed);
    let o = helm(&["vectors"]);
    assert_eq!(stdout(&o), fs::read_to_string(repo_path("testdata/protocol_vectors.json")).unwrap());
}
