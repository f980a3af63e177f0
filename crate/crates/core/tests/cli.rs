use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intent-ids"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_train_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        r#"
[ae]
hidden_layers = [8]
embedding_dim = 4
train = { epochs = 40, batch_size = 32 }
optimizer = { kind = "rmsprop" }

[mlp]
hidden_layers = [8, 8]
train = { epochs = 40, batch_size = 32 }
optimizer = { kind = "rmsprop" }
"#,
    )
    .unwrap();
    path
}

/// synth + extract into `root`, returning the corpus dir.
fn corpus(root: &Path) -> std::path::PathBuf {
    let c = root.join("corpus");
    ok(&[
        "synth",
        "--seed",
        "3",
        "--n-mal",
        "60",
        "--n-ben",
        "60",
        "--vocab",
        "16",
        "--signal",
        "6",
        "--out",
        p(&c),
    ]);
    ok(&[
        "extract",
        "--seed",
        "3",
        "--manifests",
        p(&c.join("manifests")),
        "--labels",
        p(&c.join("labels.csv")),
        "--out",
        p(&root.join("features")),
    ]);
    c
}

#[test]
fn extract_is_deterministic_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let csv = fs::read_to_string(dir.path().join("features/features.csv")).unwrap();
    let header_cols = csv.lines().next().unwrap().split(',').count();
    let vocab: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("features/vocab.json")).unwrap()).unwrap();
    let vocab_size = vocab["keys"].as_array().unwrap().len();
    assert_eq!(header_cols, vocab_size + 3);
    assert_eq!(csv.lines().count(), 121);
    assert!(dir.path().join("features/run_manifest.json").is_file());
    assert!(c.join("run_manifest.json").is_file());

    let again = dir.path().join("again");
    ok(&[
        "extract",
        "--seed",
        "3",
        "--manifests",
        p(&c.join("manifests")),
        "--labels",
        p(&c.join("labels.csv")),
        "--out",
        p(&again),
    ]);
    for f in ["features.csv", "vocab.json"] {
        assert_eq!(
            fs::read(dir.path().join("features").join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn run_manifest_records_inputs() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("features/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "extract");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["inputs"].as_object().unwrap().len(), 2);
    assert!(m["inputs"]
        .as_object()
        .unwrap()
        .values()
        .all(|v| v.as_str().unwrap().len() == 64));
    assert!(m["timings"]["total_seconds"].is_number());
    assert!(m["tool_version"].is_string());
}

#[test]
fn empty_labels_fail_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let labels = dir.path().join("empty.csv");
    fs::write(&labels, "app_id,label\n").unwrap();
    let out = run(&[
        "extract",
        "--json-errors",
        "--manifests",
        p(&c.join("manifests")),
        "--labels",
        p(&labels),
        "--out",
        p(&dir.path().join("x")),
    ]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "manifest");
    let out = run(&[
        "extract",
        "--manifests",
        p(&c),
        "--labels",
        p(&dir.path().join("nope.csv")),
        "--out",
        p(&dir.path().join("y")),
    ]);
    assert!(!out.status.success());
}

#[test]
fn analyze_writes_three_tables_and_rejects_zero_k() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let out = dir.path().join("analysis");
    ok(&[
        "analyze",
        "--features",
        p(&dir.path().join("features/features.csv")),
        "--k",
        "5",
        "--out",
        p(&out),
    ]);
    for f in ["top_malicious.csv", "top_benign.csv", "top_difference.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(
            text.starts_with("kind,name,count_mal,count_ben,norm_diff,rank\n"),
            "{f}"
        );
        assert!(text.lines().count() <= 6);
    }
    let from_corpus = dir.path().join("analysis2");
    ok(&[
        "analyze",
        "--manifests",
        p(&c.join("manifests")),
        "--labels",
        p(&c.join("labels.csv")),
        "--k",
        "5",
        "--out",
        p(&from_corpus),
    ]);
    assert_eq!(
        fs::read(out.join("top_difference.csv")).unwrap(),
        fs::read(from_corpus.join("top_difference.csv")).unwrap()
    );
    let bad = run(&[
        "analyze",
        "--features",
        p(&dir.path().join("features/features.csv")),
        "--k",
        "0",
        "--out",
        p(&dir.path().join("z")),
    ]);
    assert!(!bad.status.success());
}

#[test]
fn train_then_predict_replays_scores() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path());
    let config = small_train_config(dir.path());
    let model = dir.path().join("model");
    ok(&[
        "train",
        "--seed",
        "3",
        "--features",
        p(&dir.path().join("features/features.csv")),
        "--config",
        p(&config),
        "--out",
        p(&model),
    ]);
    for f in [
        "ae.json",
        "mlp.json",
        "vocab.json",
        "scores.csv",
        "roc.csv",
        "report.json",
        "run_manifest.json",
    ] {
        assert!(model.join(f).is_file(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(model.join("report.json")).unwrap()).unwrap();
    assert!(report["evaluation"]["auc"].as_f64().unwrap() > 0.8);
    assert!(fs::read_to_string(model.join("roc.csv"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("inf,"));

    let pred = dir.path().join("pred");
    ok(&[
        "predict",
        "--model-dir",
        p(&model),
        "--manifests",
        p(&c.join("manifests")),
        "--out",
        p(&pred),
    ]);
    let scores = |path: &Path| -> Vec<(String, String)> {
        let mut rows: Vec<(String, String)> = fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                (it.next().unwrap().to_string(), it.next().unwrap().to_string())
            })
            .collect();
        rows.sort();
        rows
    };
    assert_eq!(scores(&model.join("scores.csv")), scores(&pred.join("scores.csv")));

    let model2 = dir.path().join("model2");
    ok(&[
        "train",
        "--seed",
        "3",
        "--features",
        p(&dir.path().join("features/features.csv")),
        "--config",
        p(&config),
        "--out",
        p(&model2),
    ]);
    for f in ["ae.json", "mlp.json", "report.json", "scores.csv", "roc.csv"] {
        assert_eq!(
            fs::read(model.join(f)).unwrap(),
            fs::read(model2.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn predict_handles_unknown_intents_and_empty_dirs() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let config = small_train_config(dir.path());
    let model = dir.path().join("model");
    ok(&[
        "train",
        "--features",
        p(&dir.path().join("features/features.csv")),
        "--config",
        p(&config),
        "--out",
        p(&model),
    ]);

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let pred = dir.path().join("pred-empty");
    ok(&[
        "predict",
        "--model-dir",
        p(&model),
        "--manifests",
        p(&empty),
        "--out",
        p(&pred),
    ]);
    assert_eq!(
        fs::read_to_string(pred.join("scores.csv")).unwrap(),
        "app_id,score,label\n"
    );

    let novel = dir.path().join("novel");
    fs::create_dir(&novel).unwrap();
    fs::write(
        novel.join("new.xml"),
        r#"<manifest xmlns:android="http://schemas.android.com/apk/res/android" package="x">
  <application><receiver android:name=".R"><intent-filter>
    <action android:name="android.intent.action.NEVER_SEEN_BEFORE"/>
    <action android:name="android.intent.action.SYNTH_000"/>
  </intent-filter></receiver></application>
</manifest>"#,
    )
    .unwrap();
    let pred = dir.path().join("pred-novel");
    ok(&[
        "predict",
        "--model-dir",
        p(&model),
        "--manifests",
        p(&novel),
        "--out",
        p(&pred),
    ]);
    let text = fs::read_to_string(pred.join("scores.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("new,"));
}

#[test]
fn train_without_features_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--json-errors",
        "--features",
        p(&dir.path().join("missing.csv")),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn single_config_sweep_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let plan = dir.path().join("plan.toml");
    fs::write(
        &plan,
        r#"
[[stage]]
name = "one"
pairing = "explicit"
conf_id_start = 1
ae = [{ hidden_layers = [8], embedding_dim = 4, train = { epochs = 5, batch_size = 32 }, optimizer = { kind = "adam" } }]
mlp = [{ hidden_layers = [4], train = { epochs = 5, batch_size = 32 }, optimizer = { kind = "adam" } }]
"#,
    )
    .unwrap();
    let out = dir.path().join("sweep");
    ok(&[
        "sweep",
        "--workers",
        "2",
        "--features",
        p(&dir.path().join("features/features.csv")),
        "--plan",
        p(&plan),
        "--out",
        p(&out),
    ]);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("Conf. ID,"));
    assert!(out.join("runs/1/mlp.json").is_file());
    assert!(out.join("run_manifest.json").is_file());
}

#[test]
fn every_subcommand_exists() {
    for cmd in ["extract", "analyze", "train", "sweep", "predict", "synth"] {
        assert!(run(&[cmd, "--help"]).status.success(), "{cmd}");
    }
}
