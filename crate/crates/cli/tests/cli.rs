use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gesture_dit::audio::{read_tokens, write_wav, AudioSignal};
use gesture_dit::motion::read_motion;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gesture-dit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cli")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn toy_data(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    ok(&["make-toy-data", "--out", s(&data), "--tempos", "2,3", "--frames", "16"]);
    data
}

/// A small model so a few training steps finish quickly.
fn tiny_config(dir: &Path, steps: usize) -> PathBuf {
    let cfg = serde_json::json!({
        "model": { "hidden": 8, "heads": 2, "dual_blocks": 1, "fusion_blocks": 1, "mlp_ratio": 2 },
        "steps": steps,
        "batch_size": 2,
        "seq_len": 16,
        "optimizer": { "lr": 1e-3 }
    });
    let p = dir.join("train.json");
    std::fs::write(&p, cfg.to_string()).unwrap();
    p
}

#[test]
fn toy_data_has_paired_files() {
    let dir = TempDir::new().unwrap();
    let data = toy_data(dir.path());
    for i in 0..2 {
        assert!(data.join(format!("pair{i}.wav")).is_file());
        assert_eq!(read_motion(&data.join(format!("pair{i}.motn"))).unwrap().num_frames(), 16);
    }
}

#[test]
fn quantize_is_reproducible_and_silence_is_all_zero() {
    let dir = TempDir::new().unwrap();
    let data = toy_data(dir.path());
    let wav = data.join("pair0.wav");
    let (a, b) = (dir.path().join("a.qmel"), dir.path().join("b.qmel"));
    for out in [&a, &b] {
        ok(&["quantize", "--wav", s(&wav), "--out", s(out), "--mode", "train", "--seed", "4", "--json"]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(a.with_extension("json").is_file());
    assert_eq!(&std::fs::read(&a).unwrap()[..4], b"QMEL");

    let quiet = dir.path().join("quiet.wav");
    write_wav(&quiet, &AudioSignal::silence(0.5, 16_000)).unwrap();
    let q = dir.path().join("quiet.qmel");
    ok(&["quantize", "--wav", s(&quiet), "--out", s(&q)]);
    assert!(read_tokens(&q).unwrap().tokens.iter().all(|&t| t == 0));
}

#[test]
fn training_is_seeded_and_resumable() {
    let dir = TempDir::new().unwrap();
    let data = toy_data(dir.path());
    let cfg = tiny_config(dir.path(), 6);
    let train = |out: &Path, steps: &str| {
        ok(&["train", "--data", s(&data), "--out", s(out), "--config", s(&cfg), "--steps", steps, "--seed", "3"]);
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(&a, "6");
    train(&b, "6");
    let csv_a = std::fs::read_to_string(a.join("loss.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(b.join("loss.csv")).unwrap());
    assert_eq!(csv_a.lines().count(), 7);
    assert!(csv_a.starts_with("step,total,rot6d,trans,jitter"));

    let half = dir.path().join("half");
    train(&half, "3");
    let resumed = dir.path().join("resumed");
    ok(&[
        "train", "--data", s(&data), "--out", s(&resumed), "--config", s(&cfg), "--steps", "6", "--resume",
        s(&half.join("checkpoint.ckpt")),
    ]);
    let last = |p: &Path| -> f64 {
        let csv = std::fs::read_to_string(p.join("loss.csv")).unwrap();
        csv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap()
    };
    let csv_r = std::fs::read_to_string(resumed.join("loss.csv")).unwrap();
    assert_eq!(csv_r.lines().count(), 7);
    let (full, res) = (last(&a), last(&resumed));
    assert!((full - res).abs() <= 0.1 * full.abs(), "{full} vs {res}");
}

#[test]
fn sample_and_evaluate_write_their_outputs() {
    let dir = TempDir::new().unwrap();
    let data = toy_data(dir.path());
    let cfg = tiny_config(dir.path(), 2);
    let model = dir.path().join("model");
    ok(&["train", "--data", s(&data), "--out", s(&model), "--config", s(&cfg)]);
    let ckpt = model.join("checkpoint.ckpt");
    let wav = data.join("pair0.wav");
    let samples = dir.path().join("samples");
    let sample = |dir: &Path| {
        ok(&[
            "sample", "--checkpoint", s(&ckpt), "--wav", s(&wav), "--out-dir", s(dir), "--seeds", "1,2", "--steps", "5",
        ]);
    };
    sample(&samples);
    let again = dir.path().join("again");
    sample(&again);
    for seed in [1, 2] {
        let name = format!("sample_seed{seed}.motn");
        assert_eq!(std::fs::read(samples.join(&name)).unwrap(), std::fs::read(again.join(&name)).unwrap());
    }
    assert_ne!(
        std::fs::read(samples.join("sample_seed1.motn")).unwrap(),
        std::fs::read(samples.join("sample_seed2.motn")).unwrap()
    );

    let report = dir.path().join("report");
    ok(&[
        "evaluate", "--pred", s(&data.join("pair0.motn")), "--gt", s(&data.join("pair1.motn")), "--wav", s(&wav),
        "--samples", s(&data.join("pair1.motn")), "--out-dir", s(&report),
    ]);
    for f in ["report.json", "report.txt", "beats_audio.csv", "beats_bc.csv", "beats_smooth.csv"] {
        assert!(report.join(f).is_file(), "{f}");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    assert!(json["bc"]["raw"].is_number());
    assert!(json["inter_div"]["raw"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let quiet = dir.path().join("quiet.wav");
    write_wav(&quiet, &AudioSignal::silence(1.0, 16_000)).unwrap();
    let out = run(&["noise-diagnostic", "--wav", s(&quiet)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("not applicable"));

    let missing = dir.path().join("missing.wav");
    assert_eq!(run(&["quantize", "--wav", s(&missing), "--out", s(&dir.path().join("x"))]).status.code(), Some(2));
    assert_eq!(run(&["quantize", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let bad = dir.path().join("bad.wav");
    std::fs::write(&bad, b"not a wav file").unwrap();
    assert_eq!(run(&["quantize", "--wav", s(&bad), "--out", s(&dir.path().join("y"))]).status.code(), Some(2));
    let out = run(&["quantize", "--wav", s(&quiet), "--out", s(&dir.path().join("z")), "--window", "0"]);
    assert_eq!(out.status.code(), Some(1));
}
