use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sgg_core::ClassifierModel;
use sgg_lab::checkpoint::Checkpoint;
use tempfile::TempDir;

fn sgg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgg")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sgg(dir, args);
    assert!(out.status.success(), "sgg {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    sgg(dir, args).status.code().unwrap()
}

fn gen(dir: &Path, out: &str, extra: &[&str]) -> Value {
    let mut args = vec!["gen", "--out", out, "--train", "60", "--test", "30", "--seed", "1"];
    args.extend(extra);
    serde_json::from_str(&ok(dir, &args)).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn gen_writes_the_dataset_and_prints_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let printed = gen(tmp.path(), "d", &["--profile", "vg"]);
    let on_disk: Value = serde_json::from_slice(&fs::read(tmp.path().join("d/manifest.json")).unwrap()).unwrap();
    assert_eq!(printed, on_disk);
    for f in ["train.jsonl", "test.jsonl", "train.features.jsonl", "test.features.jsonl"] {
        assert!(tmp.path().join("d").join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_to_string(tmp.path().join("d/train.jsonl")).unwrap().lines().count(), 60);
    assert!(printed["zero_shot"]["total"].as_u64().unwrap() > 0);
}

#[test]
fn no_holdout_means_no_held_out_zero_shot() {
    let tmp = TempDir::new().unwrap();
    let m = gen(tmp.path(), "d", &["--holdout", "0"]);
    assert_eq!(m["zero_shot"]["unique"], 0);
    assert_eq!(m["zero_shot"]["total"], 0);
    assert_eq!(m["holdout"].as_array().unwrap().len(), 0);
}

#[test]
fn gqa_profile_is_denser_than_vg() {
    let tmp = TempDir::new().unwrap();
    let d_mean = |m: &Value| m["train_stats"]["density"]["mean"].as_f64().unwrap();
    let vg = gen(tmp.path(), "vg", &["--profile", "vg"]);
    let gqa = gen(tmp.path(), "gqa", &["--profile", "gqa"]);
    assert!(d_mean(&gqa) > d_mean(&vg));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &[]);
    assert_eq!(code(dir, &["gen", "--out", "x", "--bogus"]), 2);
    assert_eq!(code(dir, &["gen", "--out", "x", "--holdout", "1.5"]), 2);
    assert_eq!(code(dir, &["gen", "--out", "x", "--train", "0"]), 2);
    assert_eq!(code(dir, &["train", "--data", "d", "--out", "r", "--loss", "tuned-ab", "--alpha", "1"]), 2);
    assert_eq!(code(dir, &["train", "--data", "d", "--out", "r", "--edge-sample", "32"]), 2);
    assert_eq!(code(dir, &["train", "--data", "missing", "--out", "r"]), 2);
    assert_eq!(code(dir, &["eval", "--data", "d"]), 2);
    assert_eq!(code(dir, &["eval", "--data", "d", "--predictor", "freq", "--k", "0"]), 2);
    assert_eq!(code(dir, &["eval", "--data", "d", "--predictor", "freq", "--task", "sgcls"]), 2);
    assert_eq!(code(dir, &["report", "only-one.csv"]), 2);

    fs::write(dir.join("broken.jsonl"), "{\"graph_id\": \"a\", \"nodes\": [0]}\nnot json\n").unwrap();
    assert_eq!(code(dir, &["stats", "--graphs", "broken.jsonl"]), 1);
    // predictions for graphs that are not in the test split
    ok(dir, &["eval", "--data", "d", "--predictor", "freq", "--save-predictions", "p.jsonl"]);
    let renamed = fs::read_to_string(dir.join("p.jsonl")).unwrap().replacen("test-000000", "elsewhere", 1);
    fs::write(dir.join("q.jsonl"), renamed).unwrap();
    assert_eq!(code(dir, &["eval", "--data", "d", "--predictions", "q.jsonl"]), 1);
    assert_eq!(code(dir, &["--help"]), 0);
}

/// Dataset whose first training graph has no annotated edges.
fn with_empty_graph(dir: &Path) -> PathBuf {
    gen(dir, "e", &[]);
    let path = dir.join("e/train.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut first: Value = serde_json::from_str(&lines[0]).unwrap();
    first["fg_edges"] = Value::Array(vec![]);
    lines[0] = first.to_string();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    dir.join("e")
}

#[test]
fn degenerate_batches_fail_only_when_strict() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    with_empty_graph(dir);
    let base = ["train", "--data", "e", "--out", "r", "--loss", "normalized", "--batch-size", "1", "--epochs", "1", "--no-validate"];
    let history = ok(dir, &base);
    let skipped: u64 = csv_rows(&history)[0][9].parse().unwrap();
    assert_eq!(skipped, 1);
    let mut strict = base.to_vec();
    strict.push("--strict-batches");
    assert_eq!(code(dir, &strict), 1);
}

#[test]
fn zero_epochs_keep_the_initialization() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &[]);
    ok(dir, &["train", "--data", "d", "--out", "r", "--epochs", "0", "--seed", "11"]);
    let ckpt: Checkpoint = serde_json::from_slice(&fs::read(dir.join("r/checkpoint.json")).unwrap()).unwrap();
    let model = ckpt.model().unwrap();
    assert_eq!(model, ClassifierModel::new(*model.dims(), 11));
    assert_eq!(fs::read_to_string(dir.join("r/history.csv")).unwrap().lines().count(), 1);
}

#[test]
fn loss_variants_share_everything_but_the_weighting() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &[]);
    let run = |loss: &str| csv_rows(&ok(dir, &["train", "--data", "d", "--out", loss, "--loss", loss, "--epochs", "1", "--seed", "4"]));
    let (b, n) = (run("baseline"), run("normalized"));
    // epoch, d, m_fg, m_bg, batches agree; losses differ
    for col in [0, 5, 6, 7, 8] {
        assert_eq!(b[0][col], n[0][col], "column {col}");
    }
    assert_ne!(b[0][1], n[0][1]);
}

#[test]
fn edge_sampling_caps_show_in_the_history() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &["--min-nodes", "16", "--max-nodes", "24"]);
    let rows = csv_rows(&ok(dir, &["train", "--data", "d", "--out", "r", "--edge-sample", "32:256", "--epochs", "2"]));
    for row in rows {
        let (m_fg, m_bg): (f64, f64) = (row[6].parse().unwrap(), row[7].parse().unwrap());
        assert!(m_fg <= 32.0 && m_bg <= 256.0 && m_fg > 0.0, "{row:?}");
        // eight graphs of at least 16 nodes hold far more than 256 BG pairs
        assert_eq!(m_bg, 256.0);
    }
}

#[test]
fn freq_eval_reports_the_requested_rows() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &[]);
    let csv = ok(dir, &["eval", "--data", "d", "--predictor", "freq", "--k", "50"]);
    let rows = csv_rows(&csv);
    let has = |m: &str| rows.iter().any(|r| r[0] == m && r[1] == "50");
    assert!(has("R") && has("R_ZS"));
    assert!(rows.iter().all(|r| r[1] == "50"));
    assert_eq!(csv, ok(dir, &["eval", "--data", "d", "--predictor", "freq", "--k", "50"]));
}

#[test]
fn constrained_flag_adds_a_second_variant() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &[]);
    let rows = csv_rows(&ok(dir, &["eval", "--data", "d", "--predictor", "freq", "--constrained", "--nshot", "1"]));
    for k in ["20", "50", "100"] {
        let variants = |metric: &str| -> Vec<&str> { rows.iter().filter(|r| r[0] == metric && r[1] == k).map(|r| r[2].as_str()).collect() };
        for metric in ["R", "R_ZS", "mR"] {
            assert_eq!(variants(metric), ["unconstrained", "constrained"], "{metric}@{k}");
        }
        assert_eq!(variants("R_nshot"), ["unconstrained:n=1", "constrained:n=1"]);
    }
}

#[test]
fn stored_predictions_evaluate_like_their_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &[]);
    ok(dir, &["train", "--data", "d", "--out", "r", "--epochs", "1", "--task", "sgcls"]);
    let direct = ok(dir, &["eval", "--data", "d", "--checkpoint", "r/checkpoint.json", "--task", "sgcls", "--save-predictions", "p.jsonl", "--out", "e"]);
    let stored = ok(dir, &["eval", "--data", "d", "--predictions", "p.jsonl", "--task", "sgcls"]);
    assert_eq!(direct, stored);
    assert_eq!(direct, fs::read_to_string(dir.join("e/metrics.csv")).unwrap());
    let json: Value = serde_json::from_slice(&fs::read(dir.join("e/metrics.json")).unwrap()).unwrap();
    assert_eq!(json["entries"].as_array().unwrap().len(), csv_rows(&direct).len());
}

#[test]
fn stats_counts_zero_shot_against_train() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &[]);
    let m: Value = serde_json::from_slice(&fs::read(dir.join("d/manifest.json")).unwrap()).unwrap();
    let rows = csv_rows(&ok(dir, &["stats", "--data", "d", "--format", "csv"]));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], "60");
    assert_eq!(rows[0][12], "");
    assert_eq!(rows[1][12], m["test_stats"]["zero_shot"]["unique"].to_string());
    let by_file = csv_rows(&ok(dir, &["stats", "--graphs", "d/test.jsonl", "--train", "d/train.jsonl", "--format", "csv"]));
    assert_eq!(by_file[0][0], "test.jsonl");
    assert_eq!(by_file[0][1..], rows[1][1..]);
    // a dataset against itself has no zero-shot triplets
    let itself = csv_rows(&ok(dir, &["stats", "--graphs", "d/test.jsonl", "--train", "d/test.jsonl", "--format", "csv"]));
    assert_eq!(itself[0][12], "0");
    assert!(ok(dir, &["stats", "--data", "d"]).starts_with("split"));
}

#[test]
fn report_joins_runs_against_the_first() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    gen(dir, "d", &[]);
    for (name, loss) in [("base", "baseline"), ("norm", "normalized")] {
        ok(dir, &["train", "--data", "d", "--out", name, "--loss", loss, "--epochs", "1"]);
        ok(dir, &["eval", "--data", "d", "--checkpoint", &format!("{name}/checkpoint.json"), "--out", &format!("{name}/eval")]);
    }
    let same = csv_rows(&ok(dir, &["report", "base/eval/metrics.csv", "base/eval/metrics.csv"]));
    assert!(same.iter().all(|r| r[5] == "0"));

    ok(dir, &["report", "base/eval/metrics.csv", "norm/eval/metrics.csv", "base/eval/metrics.csv", "--names", "b,n,b2", "--out", "cmp.csv"]);
    let rows = csv_rows(&fs::read_to_string(dir.join("cmp.csv")).unwrap());
    let metrics = csv_rows(&fs::read_to_string(dir.join("base/eval/metrics.csv")).unwrap()).len();
    assert_eq!(rows.len(), 3 * metrics);
    for chunk in rows.chunks(3) {
        let v: Vec<f64> = chunk.iter().map(|r| r[4].parse().unwrap()).collect();
        assert_eq!(chunk[1][5].parse::<f64>().unwrap(), v[1] - v[0]);
        assert_eq!(chunk[2][5], "0");
        assert_eq!([&chunk[0][3], &chunk[1][3], &chunk[2][3]], ["b", "n", "b2"]);
    }
    assert_eq!(code(dir, &["report", "base/eval/metrics.csv", "norm/eval/metrics.csv", "--names", "x"]), 2);
}
