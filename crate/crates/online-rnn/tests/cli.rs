use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_online-rnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn train_writes_losses_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&["train", "--task", "add", "--alg", "uoro", "--steps", "500", "--seed", "3", "--out", out.to_str().unwrap()]);
    let losses = lines(&out.join("losses.csv"));
    assert_eq!(losses[0], "step,raw_loss");
    assert_eq!(losses.len(), 501);
    assert!(lines(&out.join("smoothed.csv"))[0].starts_with("point,loss"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["algorithm"], "uoro");
    assert_eq!(summary["config"]["seed"], 3);
    assert!(summary["final_loss"].as_f64().unwrap() > 0.0);
    assert!(summary["wall_clock_secs"].is_number());
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("override.toml");
    fs::write(&cfg, "lr = 0.003\nn = 8\n").unwrap();
    let out = dir.path().join("run");
    ok(&[
        "train", "--task", "mimic", "--alg", "rflo", "--alpha", "0.5", "--steps", "50", "--out",
        out.to_str().unwrap(), "--config", cfg.to_str().unwrap(),
    ]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["lr"], 0.003);
    assert_eq!(summary["config"]["n"], 8);
    assert_eq!(summary["config"]["alpha"], 0.5);
}

#[test]
fn unknown_override_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "learning_rate = 1\n").unwrap();
    let out = run(&[
        "train", "--task", "add", "--alg", "rtrl", "--steps", "5", "--out",
        dir.path().join("x").to_str().unwrap(), "--config", cfg.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}

#[test]
fn unknown_algorithm_is_rejected() {
    let out = run(&["train", "--task", "add", "--alg", "sgd", "--out", "/nonexistent"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rtrl"));
}

#[test]
fn gradcheck_reports_pass() {
    let stdout = ok(&["gradcheck", "--n", "4", "--steps", "20"]);
    assert!(stdout.contains("gradient check passed"), "{stdout}");
}

#[test]
fn align_writes_records_and_means() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("align");
    ok(&["align", "--task", "add", "--steps", "60", "--out", out.to_str().unwrap()]);
    let records = lines(&out.join("alignments.csv"));
    assert_eq!(records[0], "step,pair,cosine,norm_x,norm_y");
    assert!(records.iter().any(|l| l.contains(",rtrl:uoro,")));
    let means: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("alignment_means.json")).unwrap()).unwrap();
    assert!(means["pairs"]["rtrl:uoro"]["mean"].is_number());
}

#[test]
fn memtrace_writes_r2_and_scale_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mem");
    ok(&["memtrace", "--scheme", "diagonal", "--steps", "500", "--out", out.to_str().unwrap()]);
    let rows = lines(&out.join("r2.csv"));
    assert_eq!(rows[0], "delta_t,r2");
    assert_eq!(rows.len(), 32);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("r2.json")).unwrap()).unwrap();
    assert_eq!(meta["scheme"], "diagonal");
    assert!(meta["recurrent_scale"].as_str().unwrap().contains("N(0, 1)"));
}

#[test]
fn stream_dump_has_inputs_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stream.csv");
    ok(&["stream", "--task", "add", "--steps", "20", "--out", out.to_str().unwrap()]);
    let rows = lines(&out);
    assert_eq!(rows[0], "step,x0,x1,y0,y1");
    assert_eq!(rows.len(), 21);
}
