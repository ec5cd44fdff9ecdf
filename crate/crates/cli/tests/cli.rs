use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hitea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitea"))
        .args(args)
        .env("HITEA_DETERMINISTIC", "1")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small corpus plus its directory.
fn corpus(dir: &Path, seed: &str) -> PathBuf {
    let data = dir.join(format!("c{seed}.jsonl"));
    let out = hitea(&[
        "gen-data",
        "--seed",
        seed,
        "--num-videos",
        "8",
        "--frames-per-clip",
        "16",
        "--out",
        p(&data),
        "--out-dir",
        p(dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    data
}

#[test]
fn gen_data_is_deterministic_and_fingerprinted() {
    let dir = tempfile::tempdir().unwrap();
    let a = corpus(dir.path(), "7");
    let first = std::fs::read(&a).unwrap();
    let manifest = read_json(&dir.path().join("gen-data.manifest.json"));
    let b = corpus(dir.path(), "7");
    assert_eq!(a, b);
    assert_eq!(first, std::fs::read(&b).unwrap());
    let hash = manifest["corpus_fingerprint"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(manifest["config"]["corpus"]["num_videos"], 8);
    assert_eq!(manifest["seeds"]["corpus"], 7);
}

#[test]
fn missing_out_is_a_usage_error() {
    let out = hitea(&["gen-data", "--num-videos", "8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--out"), "{}", stderr(&out));
}

#[test]
fn unknown_loss_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "1");
    let out = hitea(&[
        "pretrain",
        "--data",
        p(&data),
        "--losses",
        "base,ctc",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("valid names") && err.contains("prefix_lm"), "{err}");
}

#[test]
fn missing_dataset_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = hitea(&[
        "pretrain",
        "--data",
        p(&dir.path().join("nope.jsonl")),
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn pretrain_eval_and_sweep_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "3");
    let run = dir.path().join("run");
    let out = hitea(&[
        "pretrain",
        "--data",
        p(&data),
        "--losses",
        "base,cme,mtre",
        "--epochs",
        "0",
        "--out-dir",
        p(&run),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = read_json(&run.join("pretrain.manifest.json"));
    let flags = &manifest["config"]["train"]["objectives"]["losses"];
    for name in ["vtc", "vtm", "mlm", "prefix_lm", "cme", "mtre"] {
        assert_eq!(flags[name], true, "{name}");
    }
    let ckpt = run.join("model.safetensors");
    assert!(hitea::model::load_checkpoint(&ckpt).is_ok());

    let eval_dir = dir.path().join("eval");
    let out = hitea(&[
        "eval",
        "--data",
        p(&data),
        "--checkpoint",
        p(&ckpt),
        "--task",
        "retrieval",
        "--shuffle-test",
        "--out-dir",
        p(&eval_dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&eval_dir.join("eval.report.json"));
    let r = &report["result"]["retrieval"];
    assert!(r["r1"].as_f64().unwrap() <= r["r5"].as_f64().unwrap());
    let s = &report["shuffle"];
    let gap = s["original"].as_f64().unwrap() - s["shuffled"].as_f64().unwrap();
    assert_eq!(s["gap"].as_f64().unwrap(), gap);
    assert!(eval_dir.join("eval.manifest.json").exists());

    let sweep_dir = dir.path().join("sweep");
    let cfg = dir.path().join("zero.toml");
    std::fs::write(&cfg, "[train]\nepochs = 0\n").unwrap();
    let out = hitea(&[
        "eval",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--k-sweep",
        "5",
        "--out-dir",
        p(&sweep_dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_json(&sweep_dir.join("eval.report.json"))["k_sweep"]
        .as_array()
        .unwrap()
        .clone();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["k"], 5);
}

#[test]
fn checkpoint_dataset_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "4");
    let run = dir.path().join("run");
    let out = hitea(&["pretrain", "--data", p(&data), "--epochs", "0", "--out-dir", p(&run)]);
    assert!(out.status.success(), "{}", stderr(&out));

    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "[corpus]\nframe_height = 8\nframe_width = 8\n").unwrap();
    let small = dir.path().join("small.jsonl");
    let out = hitea(&[
        "gen-data",
        "--config",
        p(&cfg),
        "--num-videos",
        "8",
        "--frames-per-clip",
        "16",
        "--out",
        p(&small),
        "--out-dir",
        p(dir.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = hitea(&[
        "eval",
        "--data",
        p(&small),
        "--checkpoint",
        p(&run.join("model.safetensors")),
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = hitea(&["eval", "--data", p(&data), "--task", "dance", "--checkpoint", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn killed_run_leaves_a_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "5");
    let run = dir.path().join("run");
    let mut child = Command::new(env!("CARGO_BIN_EXE_hitea"))
        .args([
            "pretrain",
            "--data",
            p(&data),
            "--epochs",
            "100000",
            "--out-dir",
            p(&run),
        ])
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let history = run.join("history.jsonl");
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(120);
    loop {
        let steps = std::fs::read_to_string(&history)
            .map(|s| s.lines().count())
            .unwrap_or(0);
        if steps >= 3 {
            break;
        }
        assert!(std::time::Instant::now() < deadline, "training made no progress");
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(hitea::model::load_checkpoint(&run.join("model.safetensors")).is_ok());
    assert!(!run.join("pretrain.manifest.json").exists());
}
