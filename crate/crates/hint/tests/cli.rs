use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hint(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hint")).current_dir(cwd).args(args).output().unwrap()
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let out = hint(cwd, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(cwd: &Path, args: &[&str]) -> (i32, String) {
    let out = hint(cwd, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn synth(cwd: &Path) {
    ok(cwd, &["synth-gen", "--n", "150", "--aux-n", "40", "--missing-fraction", "0.3", "--seed", "2", "-o", "data"]);
}

fn train_no_pretrain(cwd: &Path, epochs: &str) {
    ok(cwd, &["train", "--trials", "data/trials.jsonl", "--ontology", "data/ontology.tsv", "--no-pretrain", "--epochs", epochs, "-o", "model"]);
}

#[test]
fn missing_input_file_is_a_user_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let (code, err) = fails(
        dir.path(),
        &["pretrain", "--ontology", "data/ontology.tsv", "--pk-dir", "data/pk", "--risk", "nowhere/risk.tsv", "-o", "pre"],
    );
    assert_eq!(code, 2);
    assert!(err.contains("nowhere/risk.tsv"), "{err}");
}

#[test]
fn zero_epochs_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let (code, err) = fails(dir.path(), &["train", "--trials", "data/trials.jsonl", "--no-pretrain", "--epochs", "0"]);
    assert_eq!(code, 2);
    assert!(err.contains("epochs"), "{err}");
}

#[test]
fn train_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    train_no_pretrain(d, "3");

    let log = fs::read_to_string(d.join("model/train_log.csv")).unwrap();
    let rows: Vec<Vec<f64>> = log.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    let manifest = fs::read_to_string(d.join("model/manifest.txt")).unwrap();
    assert!(manifest.contains("pretrain: none"), "{manifest}");

    ok(d, &["predict", "--model-dir", "model", "--trials", "data/trials.jsonl", "-o", "pred"]);
    let scores = fs::read_to_string(d.join("pred/scores.jsonl")).unwrap();
    let trials = fs::read_to_string(d.join("data/trials.jsonl")).unwrap();
    assert_eq!(scores.lines().count(), trials.lines().count());
    assert!(trials.contains("\"molecule_missing\":true"));
    for line in scores.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let y = v["y_hat"].as_f64().unwrap();
        assert!(y > 0.0 && y < 1.0, "{line}");
    }

    // Scoring with the labels themselves is perfect.
    let perfect: String = trials
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            let y = if v["label"].as_u64().unwrap() == 1 { 0.9 } else { 0.1 };
            format!("{{\"nct_id\":{},\"y_hat\":{y}}}\n", v["nct_id"])
        })
        .collect();
    fs::write(d.join("perfect.jsonl"), perfect).unwrap();
    ok(d, &["evaluate", "--trials", "data/trials.jsonl", "--scores", "perfect.jsonl", "--bootstrap", "20", "-o", "eval"]);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("eval/metrics.json")).unwrap()).unwrap();
    for m in ["roc_auc", "pr_auc", "f1"] {
        assert_eq!(metrics[m]["point"].as_f64(), Some(1.0), "{m}");
    }

    fs::write(d.join("stray.jsonl"), "{\"nct_id\":\"NCT99999999\",\"y_hat\":0.5}\n").unwrap();
    let (code, err) = fails(d, &["evaluate", "--trials", "data/trials.jsonl", "--scores", "stray.jsonl"]);
    assert_eq!(code, 2);
    assert!(err.contains("NCT99999999"), "{err}");

    let (code, err) = fails(d, &["predict", "--model-dir", "model", "--trials", "data/trials.jsonl", "--encoder", "hashing:7"]);
    assert_eq!(code, 2);
    assert!(err.contains("hashing"), "{err}");
}

#[test]
fn best_checkpoint_follows_validation_loss() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    train_no_pretrain(d, "4");
    let log = fs::read_to_string(d.join("model/train_log.csv")).unwrap();
    let valid: Vec<f64> = log.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    let best = valid.iter().copied().fold(f64::INFINITY, f64::min);

    // Re-evaluating the saved checkpoint on the validation file reproduces the best loss.
    ok(d, &["predict", "--model-dir", "model", "--trials", "model/valid.jsonl", "-o", "vpred"]);
    let scores = fs::read_to_string(d.join("vpred/scores.jsonl")).unwrap();
    let labels = fs::read_to_string(d.join("model/valid.jsonl")).unwrap();
    let mut total = 0.0;
    let mut n = 0.0;
    for (s, l) in scores.lines().zip(labels.lines()) {
        let p = serde_json::from_str::<serde_json::Value>(s).unwrap()["y_hat"].as_f64().unwrap();
        let y = serde_json::from_str::<serde_json::Value>(l).unwrap()["label"].as_f64().unwrap();
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        n += 1.0;
    }
    assert!((total / n - best).abs() < 1e-6, "{} vs {best}", total / n);
}

#[test]
fn ingest_accounts_for_every_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let mut text: Vec<String> = fs::read_to_string(d.join("data/trials.jsonl")).unwrap().lines().take(5).map(String::from).collect();
    text.push("{not json".into());
    text.push(text[0].replace("\"label\":0", "\"label\":3").replace("\"label\":1", "\"label\":3"));
    fs::write(d.join("raw.jsonl"), text.join("\n") + "\n").unwrap();
    ok(d, &["ingest", "--trials", "raw.jsonl", "-o", "clean"]);
    assert_eq!(fs::read_to_string(d.join("clean/trials.jsonl")).unwrap().lines().count(), 5);
    let rejected = fs::read_to_string(d.join("clean/rejected.tsv")).unwrap();
    let lines: Vec<&str> = rejected.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("6\t") && lines[1].starts_with("7\t"), "{rejected}");
}

#[test]
fn resolved_config_reruns_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    train_no_pretrain(d, "1");
    let first = fs::read(d.join("model/model.ckpt")).unwrap();
    fs::copy(d.join("model/config.json"), d.join("saved.json")).unwrap();
    fs::remove_dir_all(d.join("model")).unwrap();
    ok(d, &["train", "--config", "saved.json"]);
    assert_eq!(fs::read(d.join("model/model.ckpt")).unwrap(), first);

    // Flags override the file.
    ok(d, &["train", "--config", "saved.json", "--seed", "9", "-o", "model9"]);
    assert_ne!(fs::read(d.join("model9/model.ckpt")).unwrap(), first);
}
