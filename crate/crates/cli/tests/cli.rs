use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn neurodecode(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurodecode"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NEURODECODE_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = neurodecode(args, cwd);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for name in ["a.eegb", "b.eegb"] {
        ok(&["synth", "--mode", "xor", "--trials", "100", "--seed", "7", "--out", name], p);
    }
    assert_eq!(digest(&p.join("a.eegb")), digest(&p.join("b.eegb")));
    assert_eq!(digest(&p.join("a.eegb.meta.jsonl")), digest(&p.join("b.eegb.meta.jsonl")));
    ok(&["synth", "--mode", "xor", "--trials", "100", "--seed", "8", "--out", "c.eegb"], p);
    assert_ne!(digest(&p.join("a.eegb")), digest(&p.join("c.eegb")));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["synth", "--mode", "linear", "--trials", "20", "--seed", "5", "--out", "flag.eegb"], p);
    let out = Command::new(env!("CARGO_BIN_EXE_neurodecode"))
        .args(["synth", "--mode", "linear", "--trials", "20", "--out", "env.eegb"])
        .current_dir(p)
        .env("NEURODECODE_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(digest(&p.join("flag.eegb")), digest(&p.join("env.eegb")));
}

#[test]
fn missing_data_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = neurodecode(
        &["train", "--data", "missing.eegb", "--arch", "eegnet", "--out", "run"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.eegb"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(neurodecode(&["train", "--arch", "resnet"], p).status.code(), Some(1));
    assert_eq!(neurodecode(&["frobnicate"], p).status.code(), Some(1));
    ok(&["synth", "--mode", "subject", "--subjects", "2", "--trials", "40", "--out", "s.eegb"], p);
    let large_single = neurodecode(
        &["train", "--data", "s.eegb", "--arch", "eegnet", "--size", "large", "--task", "single:1", "--out", "r"],
        p,
    );
    assert_eq!(large_single.status.code(), Some(1));
    let unknown = neurodecode(
        &["train", "--data", "s.eegb", "--arch", "eegnet", "--task", "single:9", "--out", "r"],
        p,
    );
    assert_eq!(unknown.status.code(), Some(1));
    assert_eq!(neurodecode(&["--version"], p).status.code(), Some(0));
}

#[test]
fn audit_lists_reference_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["audit-params"], dir.path());
    let eegnet_small = out
        .lines()
        .find(|l| l.starts_with("eegnet") && l.contains("small") && !l.contains('<'))
        .unwrap();
    assert!(eegnet_small.split_whitespace().any(|w| w == "1888"), "{eegnet_small}");
    assert_eq!(out.lines().filter(|l| l.ends_with("within") || l.ends_with("outside")).count(), 15);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["synth", "--mode", "linear", "--trials", "80", "--seed", "1", "--out", "d.eegb"], p);
    fs::write(
        p.join("train.json"),
        r#"{"batch_size": 16, "momentum": 0.9, "weight_decay": 0.001, "t0": 2, "t_mult": 2,
            "lr_max": 0.01, "lr_min": 0.0001, "epochs": 4, "seed": 9}"#,
    )
    .unwrap();
    ok(
        &["train", "--data", "d.eegb", "--arch", "lstm", "--config", "train.json", "--epochs", "2", "--out", "run", "--quiet"],
        p,
    );
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("run/config.json")).unwrap()).unwrap();
    let train = &config["config"]["train"];
    assert_eq!(train["epochs"], 2);
    assert_eq!(train["batch_size"], 16);
    assert_eq!(train["seed"], 9);
    assert_eq!(config["restart_epochs"], serde_json::json!([2]));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert!(manifest["config_path"].as_str().unwrap().ends_with("train.json"));

    fs::write(p.join("bad.json"), r#"{"batch_size": 16, "learning_rate": 1}"#).unwrap();
    let out = neurodecode(&["train", "--data", "d.eegb", "--arch", "lstm", "--config", "bad.json", "--out", "r2"], p);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn raw_recording_through_preprocess() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["synth", "--mode", "linear", "--raw", "--trials", "30", "--seed", "2", "--out", "raw.bin"], p);
    ok(&["preprocess", "--in", "raw.bin", "--out", "pre.eegb"], p);
    let set = neurodecode::dataset::load_epochs(&p.join("pre.eegb")).unwrap();
    assert_eq!(set.len(), 30);
    assert_eq!((set.n_channels, set.n_samples), (63, 50));
    assert!(p.join("pre.eegb.manifest.json").exists());
}

#[test]
fn single_subject_fan_out() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["synth", "--mode", "subject", "--subjects", "3", "--trials", "120", "--seed", "4", "--out", "s.eegb"], p);
    ok(
        &["train", "--data", "s.eegb", "--arch", "eegnet", "--task", "single:all", "--epochs", "1", "--jobs", "2", "--out", "runs", "--quiet"],
        p,
    );
    for id in 1..=3 {
        let run = p.join(format!("runs/subject-{id:02}"));
        let history = neurodecode::training::load_history(&run).unwrap();
        assert_eq!(history.records.len(), 1);
        match history.config {
            neurodecode::training::RunConfig::Trained { spec, .. } => assert_eq!(spec.dropout, 0.5),
            other => panic!("{other:?}"),
        }
        let preds = neurodecode::training::load_predictions(&run).unwrap();
        assert!(preds.iter().all(|r| r.subject == id));
        assert!(run.join("manifest.json").exists());
    }
}
