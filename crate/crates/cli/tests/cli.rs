use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn tlshm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlshm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), stderr(&out));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Short records and few impulses so every command finishes in seconds.
fn small_sim(dir: &Path, impulses: usize) -> PathBuf {
    let path = dir.join("sim.json");
    let cfg = serde_json::json!({
        "simulation": { "length": 240, "downsample": 2, "impulses_per_scenario": impulses }
    });
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn simulate_small(root: &Path, name: &str, flag: &str, impulses: usize) -> PathBuf {
    let cfg = small_sim(root, impulses);
    let out = root.join(name);
    ok(tlshm(&["simulate", flag, "--seed", "7", "--config", p(&cfg), "--out", p(&out)]));
    out
}

fn train_file(root: &Path, epochs: usize) -> PathBuf {
    let path = root.join(format!("train{epochs}.json"));
    fs::write(&path, format!("{{\"epochs\": {epochs}, \"batch_size\": 8}}")).unwrap();
    path
}

#[test]
fn params_prints_reference_counts() {
    let s1 = ok(tlshm(&["params", "--arch", "shmnet11", "--strategy", "s1"]));
    let s1 = String::from_utf8(s1.stdout).unwrap();
    assert!(s1.contains("trainable 163853323 frozen 54720"), "{s1}");
    let s2 = String::from_utf8(ok(tlshm(&["params", "--arch", "shmnet11", "--strategy", "s2"])).stdout).unwrap();
    assert_eq!(s2.trim(), "trainable 65995 frozen 163842048 total 163908043");
    let full37 = String::from_utf8(ok(tlshm(&["params", "--arch", "shmnet37"])).stdout).unwrap();
    assert_eq!(full37.trim(), "trainable 163934693 frozen 0 total 163934693");
}

#[test]
fn params_rejects_unknown_arch() {
    let out = tlshm(&["params", "--arch", "lenet"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn simulate_is_deterministic_and_sized() {
    let root = tempfile::tempdir().unwrap();
    let a = simulate_small(root.path(), "a", "--surrogate-lab", 3);
    let b = simulate_small(root.path(), "b", "--surrogate-lab", 3);
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["extra"]["dataset_hash"], mb["extra"]["dataset_hash"]);
    assert_eq!(ma["extra"]["n_records"], 33);
    assert_eq!(ma["extra"]["record_len"], 120);
    assert_eq!(fs::read(a.join("data.bin")).unwrap(), fs::read(b.join("data.bin")).unwrap());

    let t = simulate_small(root.path(), "t", "--table3", 2);
    assert_eq!(manifest(&t)["extra"]["n_records"], 74);
    let meta: Value = serde_json::from_slice(&fs::read(t.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["label_vocabulary"].as_array().unwrap().len(), 37);
    assert_eq!(&fs::read(t.join("data.bin")).unwrap()[..4], b"TLSD");
}

#[test]
fn bad_config_is_exit_2_with_field_name() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.json");
    fs::write(&cfg, r#"{"simulation": {"lenght": 100}}"#).unwrap();
    let out = tlshm(&["simulate", "--table3", "--config", p(&cfg), "--out", p(&root.path().join("x"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("lenght"), "{}", stderr(&out));

    fs::write(&cfg, r#"{"simulation": {"length": 101, "downsample": 2}}"#).unwrap();
    let out = tlshm(&["simulate", "--table3", "--config", p(&cfg), "--out", p(&root.path().join("y"))]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn missing_or_tampered_artifacts_are_exit_4() {
    let root = tempfile::tempdir().unwrap();
    let data = simulate_small(root.path(), "d", "--surrogate-lab", 2);
    let out = tlshm(&["evaluate", "--checkpoint", p(&root.path().join("nope.tlck")), "--data", p(&data), "--out", p(&root.path().join("e"))]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));

    let mut bytes = fs::read(data.join("data.bin")).unwrap();
    bytes[20] ^= 0xff;
    fs::write(data.join("data.bin"), bytes).unwrap();
    let out = tlshm(&["pretrain", "--data", p(&data), "--out", p(&root.path().join("m"))]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn pretrain_transfer_evaluate_pipeline() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let source = simulate_small(r, "src", "--table3", 2);
    let target = simulate_small(r, "tgt", "--surrogate-lab", 3);
    let train = train_file(r, 2);

    let pre = r.join("pre");
    ok(tlshm(&["pretrain", "--data", p(&source), "--arch", "shmnet37", "--config", p(&train), "--seed", "3", "--out", p(&pre)]));
    let ckpt = pre.join("model.tlck");
    assert_eq!(&fs::read(&ckpt).unwrap()[..4], b"TLCK");
    let history = fs::read_to_string(pre.join("history.csv")).unwrap();
    assert!(history.starts_with("arm,seed,epoch,loss,accuracy\npretrain,3,0,"), "{history}");
    assert_eq!(history.lines().count(), 3);

    let tl = r.join("tl");
    ok(tlshm(&[
        "transfer", "--checkpoint", p(&ckpt), "--data", p(&target), "--replicates", "0",
        "--strategy", "s1", "--config", p(&train), "--out", p(&tl),
    ]));
    let ev = r.join("ev");
    ok(tlshm(&["evaluate", "--checkpoint", p(&tl.join("model.tlck")), "--data", p(&target), "--replicates", "1-2", "--out", p(&ev)]));
    let metrics: Value = serde_json::from_slice(&fs::read(ev.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["n_test"], 22);
    let rows: Vec<u64> = metrics["confusion"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row.as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum())
        .collect();
    assert_eq!(rows, vec![2; 11]);

    for dir in [&pre, &tl, &ev] {
        let m = manifest(dir);
        assert!(m["started_at"].is_string() && m["finished_at"].is_string());
        assert!(!m["outputs"].as_array().unwrap().is_empty());
    }
    assert_eq!(manifest(&tl)["inputs"].as_array().unwrap().len(), 3);

    // Empty selection and the wrong label set are data errors.
    let out = tlshm(&["evaluate", "--checkpoint", p(&tl.join("model.tlck")), "--data", p(&target), "--replicates", "9", "--out", p(&r.join("empty"))]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    assert!(!stderr(&out).is_empty());
    let out = tlshm(&["evaluate", "--checkpoint", p(&tl.join("model.tlck")), "--data", p(&source), "--out", p(&r.join("vocab"))]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));

    // A checkpoint edited after its manifest was written no longer verifies.
    let mut bytes = fs::read(&ckpt).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&ckpt, bytes).unwrap();
    let out = tlshm(&["transfer", "--checkpoint", p(&ckpt), "--data", p(&target), "--out", p(&r.join("tl2"))]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn experiment_reports_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("exp.json");
    let doc = serde_json::json!({
        "case": "case1",
        "task": 2,
        "strategies": ["off", "s1", "s2"],
        "pretrain_epochs": 2,
        "finetune_epochs": 2,
        "simulation": { "length": 240, "downsample": 2, "impulses_per_scenario": 6 }
    });
    fs::write(&cfg, doc.to_string()).unwrap();
    let run = |name: &str| {
        let out = root.path().join(name);
        ok(tlshm(&["experiment", "--config", p(&cfg), "--seeds", "2", "--out", p(&out)]));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let ra = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("report.json")).unwrap());
    assert_eq!(fs::read(a.join("history.csv")).unwrap(), fs::read(b.join("history.csv")).unwrap());

    let report: Value = serde_json::from_slice(&ra).unwrap();
    let arms = report["arms"].as_array().unwrap();
    assert_eq!(arms.len(), 3);
    assert!(arms.iter().all(|a| a["runs"].as_array().unwrap().len() == 2));
    assert_eq!(report["config"]["seeds"], serde_json::json!([1, 2]));
    assert!(report["reference"]["accuracy"]["s1"].is_number());
    assert!(!String::from_utf8_lossy(&ra).contains("seconds"));
    assert!(manifest(&a)["extra"]["timings"].is_array());
}

#[test]
fn experiment_needs_a_task_for_case_1() {
    let root = tempfile::tempdir().unwrap();
    let out = tlshm(&["experiment", "--case", "1", "--out", p(&root.path().join("x"))]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}
