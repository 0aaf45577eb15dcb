use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Stdio};

use hhd::cli::{run, EXIT_BACKEND, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use hhd::dataset::{read_examples, read_predictions, read_scores, DatasetFormat, ReadOptions};
use hhd::{Label, Mode, Origin};

fn data(name: &str) -> String {
    format!("{}/examples/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn hhd(args: &[&str]) -> i32 {
    run(std::iter::once("hhd").chain(args.iter().copied()))
}

fn load(path: &Path) -> Vec<hhd::LabeledExample> {
    read_examples(path, DatasetFormat::HhdJsonl, &ReadOptions::default()).unwrap().examples
}

#[test]
fn score_is_deterministic_and_writes_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        assert_eq!(hhd(&["score", "--in", &data("pairs.jsonl"), "--out", &s(out), "--backend", "mock"]), EXIT_OK);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let preds = read_predictions(&a).unwrap();
    assert_eq!(preds.len(), 12);
    assert_eq!(preds[0].0, "n1");
    assert!(preds.iter().all(|(_, p)| p.mode == Mode::Full && p.hinted_prob.is_some()));

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.jsonl.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["pipeline"]["mode"], "full");
    assert_eq!(meta["provenance"]["combiner"], "mean");
    assert_eq!(meta["scored"], 12);
}

#[test]
fn fixture_backend_averages_stages() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    std::fs::write(&input, std::fs::read_to_string(data("pairs.jsonl")).unwrap().lines().nth(1).unwrap()).unwrap();
    let out = dir.path().join("p.jsonl");
    let backend = format!("mock:{}", data("mock_fixture.json"));
    assert_eq!(hhd(&["score", "--in", &s(&input), "--out", &s(&out), "--backend", &backend]), EXIT_OK);
    let (_, p) = read_predictions(&out).unwrap().remove(0);
    let r = p.reasoning_prob.unwrap();
    let h = p.hinted_prob.unwrap();
    assert!((p.hallucination_prob - (r + h) / 2.0).abs() < 1e-12);
    assert_eq!(p.label, Label::Contradict);
    assert_eq!(p.explanation.as_str(), "conflicting dates - 2021 vs 2019.");

    assert_eq!(
        hhd(&["score", "--in", &s(&input), "--out", &s(&out), "--backend", &backend, "--mode", "no_hinted"]),
        EXIT_OK
    );
    let (_, p) = read_predictions(&out).unwrap().remove(0);
    assert_eq!(p.hallucination_prob, r);
    assert_eq!(p.hinted_prob, None);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "[pipeline]\nmode = \"no_explanation\"\nthreshold = 0.7\n").unwrap();
    let out = dir.path().join("p.jsonl");
    let base = ["score", "--in", &data("pairs.jsonl"), "--out", &s(&out), "--config", &s(&config)];
    assert_eq!(hhd(&base), EXIT_OK);
    assert!(read_predictions(&out).unwrap().iter().all(|(_, p)| p.mode == Mode::NoExplanation));

    let mut with_flag = base.to_vec();
    with_flag.extend(["--mode", "full"]);
    assert_eq!(hhd(&with_flag), EXIT_OK);
    assert!(read_predictions(&out).unwrap().iter().all(|(_, p)| p.mode == Mode::Full));
    let meta = std::fs::read_to_string(dir.path().join("p.jsonl.meta.json")).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(meta["config"]["pipeline"]["threshold"], 0.7);
    assert_eq!(meta["config"]["pipeline"]["mode"], "full");

    std::fs::write(&config, "[pipeline]\nthreshold = 2.0\n").unwrap();
    assert_eq!(hhd(&base), EXIT_USAGE);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.jsonl");
    assert_eq!(hhd(&["no-such-command"]), EXIT_USAGE);
    assert_eq!(hhd(&["score", "--in", "/does/not/exist.jsonl", "--out", &s(&out)]), EXIT_DATA);
    assert_eq!(hhd(&["score", "--in", &data("pairs.jsonl"), "--out", &s(&out), "--mode", "sideways"]), EXIT_USAGE);

    // One pair whose reasoning call the fixture scripts as unavailable.
    let input = dir.path().join("down.jsonl");
    std::fs::write(
        &input,
        r#"{"id":"down","article_title":"Status","article_body":"The service is down.","headline":"Server outage"}"#,
    )
    .unwrap();
    let backend = format!("mock:{}", data("mock_fixture.json"));
    assert_eq!(hhd(&["score", "--in", &s(&input), "--out", &s(&out), "--backend", &backend]), EXIT_BACKEND);
    assert_eq!(
        hhd(&["score", "--in", &s(&input), "--out", &s(&out), "--backend", "http://127.0.0.1:9", "--mode", "no_explanation"]),
        EXIT_BACKEND
    );
}

#[test]
fn eval_and_tuning() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let bin = env!("CARGO_BIN_EXE_hhd");
    let output = Command::new(bin)
        .args(["eval", "--pred", &data("eval_pred.jsonl"), "--gold", &data("eval_gold.jsonl")])
        .output()
        .unwrap();
    assert!(output.status.success());
    let table = String::from_utf8(output.stdout).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap().split_whitespace().collect::<Vec<_>>(), ["Accuracy", "Precision", "Recall", "F1"]);
    assert_eq!(lines.next().unwrap().split_whitespace().collect::<Vec<_>>(), ["50.00", "50.00", "50.00", "50.00"]);

    let output = Command::new(bin)
        .args(["eval", "--json", "--pred", &data("eval_pred.jsonl"), "--gold", &data("eval_gold.jsonl")])
        .output()
        .unwrap();
    std::fs::write(&json, &output.stdout).unwrap();
    let report: hhd::EvalReport = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!((report.tp, report.fp, report.tn, report.fn_), (1, 1, 1, 1));

    let output = Command::new(bin)
        .args(["tune-threshold", "--pred", &data("eval_pred.jsonl"), "--gold", &data("eval_gold.jsonl")])
        .stderr(Stdio::null())
        .output()
        .unwrap();
    assert!(output.status.success());
    // Scores 0.1 (C), 0.2 (E), 0.8 (E), 0.9 (C): only the cut between 0.8 and
    // 0.9 reaches accuracy 0.75.
    let t: f64 = String::from_utf8(output.stdout).unwrap().trim().parse().unwrap();
    assert!((t - 0.85).abs() < 1e-12);

    let missing = dir.path().join("gold.jsonl");
    std::fs::write(&missing, r#"{"id":"zz","article_body":"A","headline":"H","label":"entail"}"#).unwrap();
    assert_eq!(hhd(&["eval", "--pred", &data("eval_pred.jsonl"), "--gold", &s(&missing)]), EXIT_DATA);
}

#[test]
fn corpus_commands() {
    let dir = tempfile::tempdir().unwrap();
    let adapted = dir.path().join("esnli.jsonl");
    assert_eq!(hhd(&["adapt", "--format", "esnli", "--in", &data("esnli_sample.csv"), "--out", &s(&adapted)]), EXIT_OK);
    let examples = load(&adapted);
    assert_eq!(examples.len(), 4);
    assert!(examples.iter().all(|e| e.origin() == Origin::NliAdapted && e.article().title().is_empty()));

    assert_eq!(
        hhd(&["adapt", "--format", "anli", "--neutral", "as-contradict", "--in", &data("anli_sample.jsonl"), "--out", &s(&adapted)]),
        EXIT_OK
    );
    assert_eq!(load(&adapted).len(), 4);

    let truth = dir.path().join("true.jsonl");
    assert_eq!(hhd(&["adapt", "--format", "true", "--in", &data("summeval_sample.csv"), "--out", &s(&truth)]), EXIT_OK);
    let t = load(&truth);
    assert_eq!(t.iter().filter(|e| e.label() == Some(Label::Contradict)).count(), 3);
    assert_eq!(hhd(&["adapt", "--format", "xml", "--in", &data("esnli_sample.csv"), "--out", &s(&truth)]), EXIT_USAGE);

    let augmented = dir.path().join("aug.jsonl");
    assert_eq!(hhd(&["augment", "--in", &data("pairs.jsonl"), "--out", &s(&augmented), "--k", "2"]), EXIT_OK);
    let aug = load(&augmented);
    assert_eq!(aug.len(), 36);
    assert_eq!(aug.iter().filter(|e| e.origin() == Origin::ExplainerGenerated).count(), 24);

    let train_dir = dir.path().join("train");
    assert_eq!(hhd(&["emit-train", "--in", &s(&augmented), "--out-dir", &s(&train_dir)]), EXIT_OK);
    let count = |name: &str| std::fs::read_to_string(train_dir.join(name)).unwrap().lines().count();
    let explained = aug.iter().filter(|e| e.has_explanation()).count();
    assert_eq!(count("reasoning_classifier.tsv"), 36);
    assert_eq!(count("hinted_classifier.tsv"), explained);
    assert_eq!(count("explainer.tsv"), explained);
    assert_eq!(count("records.jsonl"), 36 + 2 * explained);

    let only = dir.path().join("only");
    assert_eq!(
        hhd(&["emit-train", "--in", &data("pairs.jsonl"), "--out-dir", &s(&only), "--components", "explainer"]),
        EXIT_OK
    );
    assert!(!only.join("reasoning_classifier.tsv").exists());
}

#[test]
fn feature_baseline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    assert_eq!(hhd(&["features", "--in", &data("pairs.jsonl"), "--out", &s(&csv)]), EXIT_OK);
    let rows = hhd::features::read_features_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[1].2, Some(Label::Contradict));

    let model = dir.path().join("m.json");
    let preds = dir.path().join("p.jsonl");
    assert_eq!(hhd(&["baseline", "train", "--in", &data("pairs.jsonl"), "--model", &s(&model)]), EXIT_OK);
    assert_eq!(
        hhd(&["baseline", "predict", "--in", &data("pairs.jsonl"), "--model", &s(&model), "--out", &s(&preds)]),
        EXIT_OK
    );
    assert_eq!(read_scores(&preds).unwrap().len(), 12);
    assert_eq!(hhd(&["eval", "--pred", &s(&preds), "--gold", &data("pairs.jsonl")]), EXIT_OK);

    let unlabeled = dir.path().join("u.jsonl");
    std::fs::write(&unlabeled, r#"{"id":"u","article_body":"A","headline":"H"}"#).unwrap();
    assert_eq!(hhd(&["baseline", "train", "--in", &s(&unlabeled), "--model", &s(&model)]), EXIT_DATA);
}

/// Kills the child on drop so a failed assertion does not leak the server.
struct Child(std::process::Child);

impl Drop for Child {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn mock_serve_speaks_the_protocol() {
    let mut child = Child(
        Command::new(env!("CARGO_BIN_EXE_hhd"))
            .args(["mock-serve", "--port", "0", "--fixture", &data("mock_fixture.json")])
            .stdout(Stdio::piped())
            .spawn()
            .unwrap(),
    );
    let mut line = String::new();
    BufReader::new(child.0.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").unwrap().to_string();

    let spec = hhd::MockBackendSpec::load(data("mock_fixture.json")).unwrap();
    let report = hhd::backend::conformance::check_http(&url, &spec);
    assert!(report.passed(), "{report}");

    let dir = tempfile::tempdir().unwrap();
    let via_http = dir.path().join("http.jsonl");
    let in_process = dir.path().join("local.jsonl");
    let fixture_backend = format!("mock:{}", data("mock_fixture.json"));
    assert_eq!(hhd(&["score", "--in", &data("pairs.jsonl"), "--out", &s(&via_http), "--backend", &url]), EXIT_OK);
    assert_eq!(
        hhd(&["score", "--in", &data("pairs.jsonl"), "--out", &s(&in_process), "--backend", &fixture_backend]),
        EXIT_OK
    );
    assert_eq!(std::fs::read(&via_http).unwrap(), std::fs::read(&in_process).unwrap());
}

