use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn affectsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affectsim"))
        .args(args)
        .env_remove("AFFECTSIM_API_BASE")
        .env_remove("AFFECTSIM_SCORER_URL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(affectsim(&["--help"]).status.code(), Some(0));
    assert_eq!(affectsim(&["--version"]).status.code(), Some(0));
    assert_eq!(affectsim(&["chat", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(affectsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(affectsim(&["analyze"]).status.code(), Some(1));
    assert_eq!(affectsim(&["chat", "--pairing", "happy-sad", "--mock", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(affectsim(&["preliminary", "--mock", "--iterations", "0", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(affectsim(&["score"]).status.code(), Some(1));
    assert_eq!(affectsim(&["validate-config"]).status.code(), Some(1));
    // live run without an endpoint
    let o = affectsim(&["preliminary", "--models", "m1", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn runtime_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.jsonl");
    let o = affectsim(&["analyze", "--in", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.jsonl"));

    let bad = write(tmp.path(), "bad.jsonl", "{\"run_id\": 1}\n");
    let o = affectsim(&["analyze", "--in", &bad, "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn validate_config_resolves_paths_and_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(
        tmp.path(),
        "run.toml",
        "experiment = \"chat_opposing\"\npairing = \"lvha-nvla\"\nmock = true\nseed = 9\nrounds = 6\noutput = \"out\"\n",
    );
    let o = affectsim(&["validate-config", &good]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pairing"], "lvha-nvla");
    assert_eq!(v["experiment"]["rounds"], 6);
    assert_eq!(v["experiment"]["seed"], 9);
    assert_eq!(v["output"], tmp.path().join("out").display().to_string());

    let typo = write(tmp.path(), "typo.toml", "experimnet = \"chat_sampled\"\nseed = 1\n");
    assert_eq!(affectsim(&["validate-config", &typo]).status.code(), Some(1));

    let seedless = write(tmp.path(), "seedless.toml", "experiment = \"chat_sampled\"\nmock = true\n");
    let o = affectsim(&["validate-config", &seedless]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        "experiment = \"chat_sampled\"\nmock = true\nseed = 5\niterations = 3\nrounds = 4\n",
    );
    let out = tmp.path().join("runs");
    let o = affectsim(&[
        "--config", &cfg, "chat", "--rounds", "2", "--seed", "6", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let path = stdout(&o);
    assert!(path.ends_with("chat_sampled-6.jsonl"), "{path}");
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    assert_eq!(lines, 3 * 2 * 2);
    assert!(Path::new(&path.replace(".jsonl", ".meta.json")).exists());
}

#[test]
fn score_prints_json_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let file = write(tmp.path(), "texts.txt", "I am so happy today\n\nthis is awful\n");
    let o = affectsim(&["score", "--text", "What a wonderful day", "--file", &file]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["text"], "What a wonderful day");
    for r in &rows {
        let v = r["valence"].as_f64().unwrap();
        let a = r["arousal"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v) && (0.0..=1.0).contains(&a));
        assert!(r["cell"].is_string());
    }
    assert!(rows[1]["valence"].as_f64() > rows[2]["valence"].as_f64());
}

#[test]
fn remote_scorer_without_url_is_a_clear_error() {
    let o = affectsim(&["score", "--text", "hi", "--scorer", "remote"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("AFFECTSIM_SCORER_URL"));
}

#[test]
fn analyze_writes_report_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path().to_str().unwrap();
    let prelim = stdout(&affectsim(&[
        "preliminary", "--mock", "--setting", "zero", "--iterations", "10", "--seed", "2", "--out", o,
    ]));
    let chat = stdout(&affectsim(&["chat", "--mock", "--pairing", "hvha-nvla", "--conversations", "2", "--rounds", "4", "--seed", "2", "--out", o]));
    let r = affectsim(&["analyze", "--in", &prelim, &chat, "--out", o, "--exclude-greeting"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report = tmp.path().join("report");
    for f in ["correlations.csv", "offsets.csv", "convergence.csv", "trajectories.csv", "summary.json"] {
        assert!(report.join(f).is_file(), "{f}");
    }
    let charts: Vec<_> = std::fs::read_dir(report.join("charts")).unwrap().collect();
    assert_eq!(charts.len(), 2);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(report.join("summary.json")).unwrap()).unwrap();
    assert!(summary["exclusion_reasons"].to_string().contains("greeting"));
}
