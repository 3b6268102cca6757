//! Drives the `gazesig` binary end to end on a small synthetic set.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gazesig::harness::{read_verdict_lines, summarize, EvalReport, Manifest, TrainMetrics};
use gazesig::signature::{RAW_GAZE_ROWS, ROWS};
use gazesig::{read_signatures, Label};

fn gazesig(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazesig"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gazesig(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    gazesig(dir, args).status.code().unwrap()
}

#[test]
fn pipeline_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("run.cfg"), "# small run\nseed = 4\nn_per_class = 10\nn_frames = 70\nepochs = 4\n").unwrap();

    ok(dir, &["--config", "run.cfg", "--out", "tracks", "synth"]);
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("tracks/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.tracks.len(), 20);
    assert_eq!(manifest.tracks.iter().filter(|t| t.label == Label::Fake).count(), 10);
    assert!(manifest.tracks.iter().all(|t| dir.join("tracks").join(&t.file).exists()));

    // 70-frame tracks at ω=32 give two sequences each.
    ok(dir, &["--config", "run.cfg", "--out", "sigs.gzsg", "signatures", "tracks"]);
    let sigs = read_signatures(dir.join("sigs.gzsg")).unwrap();
    assert_eq!(sigs.len(), 40);

    ok(dir, &["--config", "run.cfg", "--out", "train", "train", "sigs.gzsg"]);
    let metrics: TrainMetrics = serde_json::from_str(&fs::read_to_string(dir.join("train/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics.folds[0].report.epoch_loss.len(), 4);
    assert_eq!(metrics.folds[0].n_train_videos + metrics.folds[0].n_test_videos, 20);

    let stdout = ok(dir, &["--out", "eval", "eval", "train/model.gzmd", "train/test.gzsg"]);
    assert!(stdout.contains("S.Acc"));
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(dir.join("eval/eval.json")).unwrap()).unwrap();
    let lines = read_verdict_lines(&dir.join("eval/verdicts.jsonl")).unwrap();
    assert_eq!(summarize(&lines), report.summary);
    assert_eq!(report.summary.schemes.len(), 4);

    ok(dir, &["--out", "img", "render", "train/test.gzsg"]);
    let images: Vec<_> = fs::read_dir(dir.join("img")).unwrap().collect();
    assert_eq!(images.len(), read_signatures(dir.join("train/test.gzsg")).unwrap().len());
    let first = fs::read(images[0].as_ref().unwrap().path()).unwrap();
    assert!(first.starts_with(b"P6\n32 40\n255\n"));
    assert_eq!(first.len(), b"P6\n32 40\n255\n".len() + ROWS * 32 * 3);

    // A model for ω=32 cannot score ω=16 signatures.
    ok(dir, &["--config", "run.cfg", "--omega", "16", "--out", "sigs16.gzsg", "signatures", "tracks"]);
    assert_eq!(code(dir, &["--out", "eval16", "eval", "train/model.gzmd", "sigs16.gzsg"]), 2);
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for out in ["a", "b"] {
        ok(dir, &["--seed", "9", "--out", out, "synth", "--n", "3", "--frames", "40"]);
    }
    for entry in fs::read_dir(dir.join("a")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(dir.join("a").join(&name)).unwrap(),
            fs::read(dir.join("b").join(&name)).unwrap()
        );
    }
}

#[test]
fn metric_mask_zeroes_metric_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["--seed", "2", "--out", "tracks", "synth", "--n", "2", "--frames", "40"]);
    ok(
        dir,
        &["--mask", "visual,geometric,temporal,spectral", "--out", "s.gzsg", "signatures", "tracks"],
    );
    let sigs = read_signatures(dir.join("s.gzsg")).unwrap();
    assert!(!sigs.is_empty());
    for s in &sigs {
        for row in (16..20).chain(36..40) {
            assert_eq!(s.row_mean(row), 0.0, "row {row}");
        }
        assert!(RAW_GAZE_ROWS.iter().any(|&r| s.row_mean(r) > 0.0));
    }
}

#[test]
fn long_windows_warn_but_succeed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["--out", "tracks", "synth", "--n", "1", "--frames", "100"]);
    let out = gazesig(dir, &["--omega", "128", "--out", "s.gzsg", "signatures", "tracks"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no valid sequences"));
    assert!(read_signatures(dir.join("s.gzsg")).unwrap().is_empty());
    // Training on the empty file is a data error.
    assert_eq!(code(dir, &["--omega", "128", "train", "s.gzsg"]), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(code(dir, &["frobnicate"]), 1);
    assert_eq!(code(dir, &["synth", "--n", "0"]), 1);
    assert_eq!(code(dir, &["--scheme", "plurality", "synth"]), 1);
    assert_eq!(code(dir, &["--mask", "", "synth"]), 1);
    assert_eq!(code(dir, &["render", "missing.gzsg"]), 2);
    assert_eq!(code(dir, &["--config", "missing.cfg", "synth"]), 2);
    fs::write(dir.join("junk.gzsg"), b"not a signature file").unwrap();
    assert_eq!(code(dir, &["train", "junk.gzsg"]), 2);
    assert_eq!(code(dir, &["--help"]), 0);
}
