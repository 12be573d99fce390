use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tailkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tailkit")).current_dir(dir).args(args).output().expect("binary runs")
}

fn error_of(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"));
    v["error"].clone()
}

const MIXTURE: &str = r#"
seed = 5
[data]
margin = "gumbel"
[tailprob]
cut = { blocks = 2 }
bootstrap = 10
[synthetic]
n = 3000
[synthetic.model]
kind = "mixture"
sizes = [2, 2]
weights = [0.9, 0.9]
"#;

#[test]
fn missing_seed_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tailkit(tmp.path(), &["simulate-synthetic"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_of(&out);
    assert_eq!(e["kind"], "usage");
    assert!(e["message"].as_str().unwrap().contains("seed"));
}

#[test]
fn bad_arguments_print_error_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tailkit(tmp.path(), &["--seed", "1", "no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "usage");
    let out = tailkit(tmp.path(), &["--seed", "1", "condex-prob", "--data", "x.csv"]);
    assert_eq!(out.status.code(), Some(2), "--region is required");
}

#[test]
fn help_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tailkit(tmp.path(), &["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("stability-scan"));
}

#[test]
fn missing_input_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tailkit(tmp.path(), &["--seed", "1", "edm", "--data", "absent.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["kind"], "input");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "seed = 1\n[tailprob]\nphii = 0.1\n").unwrap();
    let out = tailkit(tmp.path(), &["--config", "c.toml", "simulate-synthetic"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_of(&out)["message"].as_str().unwrap().contains("phii"));
}

#[test]
fn tailprob_workflow_writes_envelope_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("m.toml"), MIXTURE).unwrap();
    assert!(tailkit(dir, &["--config", "m.toml", "--out", "d", "simulate-synthetic"]).status.success());
    let out = tailkit(dir, &["--config", "m.toml", "--out", "r", "cluster", "--data", "d/data.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let env: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("r/cluster.json")).unwrap()).unwrap();
    assert_eq!(env["command"], "cluster");
    assert_eq!(env["seed"], 5);
    assert_eq!(env["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(env["result"]["blocks"], serde_json::json!([[0, 1], [2, 3]]));
    let edm = fs::read_to_string(dir.join("r/edm.csv")).unwrap();
    assert_eq!(edm.lines().count(), 5);
    assert_eq!(fs::read_to_string(dir.join("r/dendrogram.csv")).unwrap().lines().count(), 4);

    // a seed on the command line overrides the config
    fs::write(dir.join("w.txt"), "1 1 2 2\n").unwrap();
    let out = tailkit(dir, &["--config", "m.toml", "--seed", "9", "--out", "t", "tailprob", "--data", "d/data.csv", "--weights", "w.txt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let env: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("t/tailprob.json")).unwrap()).unwrap();
    assert_eq!(env["seed"], 9);
    let caveats = env["caveats"].as_array().unwrap();
    assert!(caveats.iter().any(|c| c.as_str().unwrap().contains("unequal weights")));
    assert!(env["result"]["log_p"].as_f64().unwrap() < 0.0);
}

#[test]
fn condex_regions_are_validated_before_fitting() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("d.csv"), "Y1,Y2,Y3\n1,2,3\n").unwrap();
    fs::write(dir.join("c.toml"), "seed = 1\n[data]\nresponses = [\"Y1\", \"Y2\", \"Y3\"]\nmargin = \"gumbel\"\n").unwrap();
    for (region, needle) in [("Y4>1", "unknown"), ("Y1=1", "'>' or '<'"), ("Y1>1,Y1<3", "twice"), ("Y1>abc", "bad number")] {
        let out = tailkit(dir, &["--config", "c.toml", "condex-prob", "--data", "d.csv", "--region", region]);
        assert_eq!(out.status.code(), Some(2), "{region}");
        let msg = error_of(&out)["message"].as_str().unwrap().to_string();
        assert!(msg.contains(needle), "{region}: {msg}");
    }
}
