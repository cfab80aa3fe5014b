use std::path::{Path, PathBuf};
use std::process::Command;

use latgraph_cli::{run_with, EXIT_DATA, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("latgraph").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn t1_fixture(dir: &TempDir) -> PathBuf {
    write(dir, "t1.tsv", &format!("#labels: 1\n{}\t{}\n", 0.3f64.ln(), 0.7f64.ln()))
}

#[test]
fn loss_at_zero_lambda_on_single_frame() {
    let dir = TempDir::new().unwrap();
    let f = t1_fixture(&dir);
    let (code, out, _) = run(&["loss", "--lambda", "0", s(&f)]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    let l = v["L"].as_f64().unwrap();
    assert!((l - (-0.356675)).abs() < 1e-6);
    assert_eq!(v["L_aug"].as_f64().unwrap(), l);
    assert_eq!(v["minimize_loss"].as_f64().unwrap(), -l);
    let keys = ["L", "L_aug", "minimize_loss", "lambda", "expected_delay", "num_frames", "vocab_size", "num_labels"];
    assert_eq!(v.as_object().unwrap().len(), keys.len());
    let positions: Vec<usize> = keys.iter().map(|k| out.find(&format!("\"{k}\":")).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "key order changed");
}

#[test]
fn loss_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("g.tsv");
    assert_eq!(run(&["gen", "--seed", "4", "--frames", "12", "--num-labels", "2", "-o", s(&f)]).0, EXIT_OK);
    let inst = latgraph_cli::instance::InstanceFile::read(&f).unwrap();
    let (code, out, _) = run(&["loss", "--lambda", "0.02", s(&f)]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    let labels = inst.labels().unwrap();
    let (l, _) = latgraph::ctc_loss(&inst.logprobs, labels).unwrap();
    let (aug, _) = latgraph::delay_penalized_ctc_loss(&inst.logprobs, labels, 0.02).unwrap();
    assert_eq!(v["L"].as_f64().unwrap(), l);
    assert_eq!(v["L_aug"].as_f64().unwrap(), aug);
}

#[test]
fn grad_rows_are_distributions() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("g.tsv");
    run(&["gen", "--seed", "2", "--frames", "15", "--num-labels", "3", "-o", s(&f)]);
    let g = dir.path().join("grad.tsv");
    assert_eq!(run(&["grad", "--lambda", "0.01", s(&f), "-o", s(&g)]).0, EXIT_OK);
    let grad = latgraph_cli::instance::InstanceFile::read(&g).unwrap();
    assert_eq!(grad.logprobs.dim(), (15, 9));
    for row in grad.logprobs.rows() {
        assert!((row.sum() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn decode_then_metrics_round_trip() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("g.tsv");
    let r = dir.path().join("g.ref");
    let args = ["gen", "--seed", "1", "--peak-offset", "0", "--noise", "0", "-o", s(&f), "--ref-output", s(&r)];
    assert_eq!(run(&args).0, EXIT_OK);
    let (code, line, _) = run(&["decode", "--format", "tsv", s(&f)]);
    assert_eq!(code, EXIT_OK);
    let h = write(&dir, "hyp.txt", &line);
    let (code, out, _) = run(&["metrics", "--hyp", s(&h), "--ref", s(&r)]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["wer"].as_f64().unwrap(), 0.0);
    assert_eq!(v["matched_words"].as_u64().unwrap(), 5);
    assert_eq!(v["utterances"].as_u64().unwrap(), 1);

    let (code, out, _) = run(&["metrics", "--hyp", s(&r), "--ref", s(&r), "--frame-shift-ms", "10"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["msd_ms"].as_f64(), Some(0.0));
    assert_eq!(v["med_ms"].as_f64(), Some(0.0));
}

#[test]
fn decode_json_uses_token_table() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "m.tsv", "-5\t-0.01\t-5\n-5\t-5\t-0.01\n-0.01\t-5\t-5\n");
    let t = write(&dir, "tokens.txt", "<blk> 0\n▁a 1\nb 2\n");
    let (code, out, _) = run(&["decode", "--tokens", s(&t), s(&f)]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["tokens"].as_array().unwrap().len(), 2);
    assert_eq!(v["tokens"][1]["start_ms"].as_f64(), Some(40.0));
    let words = v["words"].as_array().unwrap();
    assert_eq!(words.len(), 1);
    assert_eq!(words[0]["token"], "ab");
    assert_eq!(words[0]["end_frame"], 1);
}

#[test]
fn metrics_without_matches_reports_null_delays() {
    let dir = TempDir::new().unwrap();
    let h = write(&dir, "h", "u1\tx:0:1\n");
    let r = write(&dir, "r", "u1\ty:0:1\nu2\tz:3:4\n");
    let (code, out, _) = run(&["metrics", "--hyp", s(&h), "--ref", s(&r)]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["msd_ms"].is_null());
    assert_eq!(v["wer"].as_f64(), Some(1.0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).0, EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run(&["loss", "--lambda", "-1", "x.tsv"]).0, EXIT_USAGE);
    assert_eq!(run(&["sweep", "--lambdas", "0,abc"]).0, EXIT_USAGE);
    assert_eq!(run(&["metrics", "--hyp", "a"]).0, EXIT_USAGE);
    assert_eq!(run(&["oracle-check", "--max-T", "0"]).0, EXIT_USAGE);
    assert_eq!(run(&["--help"]).0, EXIT_OK);
}

#[test]
fn data_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["loss", s(&dir.path().join("missing.tsv"))]).0, EXIT_DATA);
    let ragged = write(&dir, "r.tsv", "#labels: 1\n0\t0\n0\n");
    assert_eq!(run(&["loss", s(&ragged)]).0, EXIT_DATA);
    let repeats = write(&dir, "rep.tsv", "#labels: 1 1\n-0.7\t-0.7\n-0.7\t-0.7\n");
    let (code, _, err) = run(&["loss", s(&repeats)]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("alignment"), "{err}");
    let unlabeled = write(&dir, "u.tsv", "-0.7\t-0.7\n");
    assert_eq!(run(&["grad", s(&unlabeled)]).0, EXIT_DATA);
    let h = write(&dir, "h", "other\ta:0:0\n");
    let r = write(&dir, "r", "u\ta:0:0\n");
    assert_eq!(run(&["metrics", "--hyp", s(&h), "--ref", s(&r)]).0, EXIT_DATA);
}

#[test]
fn oracle_check_passes_and_flags_mismatches() {
    let (code, out, _) = run(&["oracle-check", "--trials", "500", "--seed", "7", "--max-T", "6"]);
    assert_eq!(code, EXIT_OK);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["ok"], true);
    assert_eq!(v["mismatches"], 0);

    // rounding noise alone exceeds a zero-width tolerance
    let (code, out, _) = run(&["oracle-check", "--trials", "50", "--tolerance", "1e-300"]);
    assert_eq!(code, EXIT_MISMATCH);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["ok"], false);
}

#[test]
fn sweep_rows_ascend_and_are_deterministic() {
    let args = ["sweep", "--lambdas", "0.02,0,0.01", "--seed", "3", "--trials", "3", "--format", "json"];
    let (code, a, _) = run(&args);
    assert_eq!(code, EXIT_OK);
    let (_, b, _) = run(&args);
    assert_eq!(a, b);
    let rows: Vec<Value> = serde_json::from_str(&a).unwrap();
    let lambdas: Vec<f64> = rows.iter().map(|r| r["lambda"].as_f64().unwrap()).collect();
    assert_eq!(lambdas, [0.0, 0.01, 0.02]);
    for w in rows.windows(2) {
        assert!(w[1]["expected_delay_frames"].as_f64() <= w[0]["expected_delay_frames"].as_f64());
    }
    let (_, tsv, _) = run(&["sweep", "--lambdas", "0,0.01", "--trials", "2", "--iterations", "2"]);
    assert!(tsv.starts_with("lambda\tloss_aug\texpected_delay_frames\tmsd_ms\tmed_ms\twer\n"));
    assert_eq!(tsv.lines().count(), 3);
}

#[test]
fn sweep_over_files_without_reference() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("a.tsv");
    run(&["gen", "--frames", "10", "--num-labels", "2", "-o", s(&f)]);
    let (code, out, _) = run(&["sweep", "--lambdas", "0,0.1", "--format", "json", s(&f)]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<Value> = serde_json::from_str(&out).unwrap();
    assert!(rows[0]["msd_ms"].is_null() && rows[0]["wer"].is_null());
}

#[test]
fn gen_is_seeded() {
    let a = run(&["gen", "--seed", "5", "--frames", "8", "--num-labels", "2"]).1;
    let b = run(&["gen", "--seed", "5", "--frames", "8", "--num-labels", "2"]).1;
    let c = run(&["gen", "--seed", "6", "--frames", "8", "--num-labels", "2"]).1;
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with("#labels: "));
    assert_eq!(run(&["gen", "--labels", "9", "--vocab", "4"]).0, EXIT_DATA);
}

#[test]
fn strict_validation_from_environment() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "un.tsv", "#labels: 1\n0\t0\n");
    let bin = env!("CARGO_BIN_EXE_latgraph");
    let off = Command::new(bin).args(["loss", s(&f)]).env_remove("LATGRAPH_VALIDATE").output().unwrap();
    assert_eq!(off.status.code(), Some(EXIT_OK));
    let strict = Command::new(bin).args(["loss", s(&f)]).env("LATGRAPH_VALIDATE", "strict").output().unwrap();
    assert_eq!(strict.status.code(), Some(EXIT_DATA));
    let bad = Command::new(bin).args(["loss", s(&f)]).env("LATGRAPH_VALIDATE", "maybe").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}
