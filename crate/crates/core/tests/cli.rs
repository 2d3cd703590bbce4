use std::fs;
use std::path::Path;
use std::process::Command;

use deepacts::cli;
use deepacts::stamp::read_raw_file;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deepacts"))
}

fn run(args: &[&str]) {
    let mut all = vec!["deepacts"];
    all.extend_from_slice(args);
    cli::run(all).unwrap_or_else(|e| panic!("{args:?}: {}", e.one_line()));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_dataset(dir: &Path) {
    run(&["generate", "--out", p(dir), "--sequences-per-class", "6", "--seed", "5"]);
}

#[test]
fn unknown_flag_exits_with_usage_code() {
    let out = bin().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: usage:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn bad_values_are_reported_on_one_line() {
    let out = bin().args(["train", "--modalities", "body,tail", "--epochs", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail"));
    let missing = bin().args(["eval", "--model", "/nonexistent/model/dir"]).output().unwrap();
    assert_ne!(missing.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));
}

#[test]
fn grad_check_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["grad-check", "--out", p(dir.path())]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("gradcheck.txt")).unwrap();
    assert!(text.contains("graph_conv"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn generate_writes_a_readable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let (train, test) = deepacts::harness::read_dataset(dir.path()).unwrap();
    assert_eq!(train.len() + test.len(), 36);
    assert_eq!(train.classes.len(), 6);
}

#[test]
fn training_is_reproducible_and_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    small_dataset(&data);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        run(&["train", "--data", p(&data), "--epochs", "2", "--modalities", "body,hands", "--out", p(out)]);
    }
    let loss_a = fs::read_to_string(a.join(cli::LOSS_FILE)).unwrap();
    assert_eq!(loss_a, fs::read_to_string(b.join(cli::LOSS_FILE)).unwrap());
    assert_eq!(loss_a.lines().next(), Some("epoch,lr,loss,train_acc"));
    assert_eq!(loss_a.lines().count(), 3);
    assert_eq!(fs::read(a.join(cli::CHECKPOINT_FILE)).unwrap(), fs::read(b.join(cli::CHECKPOINT_FILE)).unwrap());

    let report = dir.path().join("report");
    run(&["eval", "--data", p(&data), "--model", p(&a), "--out", p(&report)]);
    let csv = fs::read_to_string(report.join(cli::CONFUSION_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(report.join(cli::HEATMAP_FILE).exists());
    assert!(fs::read_to_string(report.join(cli::REPORT_FILE)).unwrap().starts_with("accuracy "));
}

#[test]
fn eval_rejects_a_checkpoint_from_another_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    small_dataset(&data);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&["train", "--data", p(&data), "--epochs", "1", "--modalities", "body", "--out", p(&a)]);
    run(&["train", "--data", p(&data), "--epochs", "1", "--modalities", "hands", "--out", p(&b)]);
    fs::copy(b.join(cli::CHECKPOINT_FILE), a.join(cli::CHECKPOINT_FILE)).unwrap();
    let err = cli::run(["deepacts", "eval", "--data", p(&data), "--model", p(&a), "--out", p(&a)]).unwrap_err();
    assert_eq!(err.kind(), "checkpoint");
}

#[test]
fn encode_and_export_stamps() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    small_dataset(&data);
    let seq = data.join("seq00000.txt");
    let enc = dir.path().join("enc");
    run(&["encode", p(&seq), "--out", p(&enc), "--png", "--size", "16"]);
    let raws: Vec<_> = fs::read_dir(&enc)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "das"))
        .collect();
    assert_eq!(raws.len(), 5);
    for r in &raws {
        let st = read_raw_file(r).unwrap();
        assert_eq!((st.width, st.height), (16, 16));
    }
    let exp = dir.path().join("exp");
    run(&["export-stamps", p(&seq), "--out", p(&exp)]);
    let mut names: Vec<String> = fs::read_dir(&exp).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        ["seq00000.body.png", "seq00000.bones.png", "seq00000.face.png", "seq00000.flow.png", "seq00000.hands.png"]
    );
}

#[test]
fn ablate_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    small_dataset(&data);
    let out = dir.path().join("abl");
    run(&["ablate", "--data", p(&data), "--rows", "AF", "--epochs", "1", "--out", p(&out)]);
    let csv = fs::read_to_string(out.join(cli::ABLATION_FILE)).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).map(|l| &l[..1]).collect();
    assert_eq!(rows, ["A", "F"]);
}
