//! Scores a TRUE-format file, tunes the threshold on it and reports the
//! tuned metrics.

use std::path::Path;

use hhd::dataset::{read_true_records, true_dataset};
use hhd::{compute_metrics, score_batch, tune_threshold, MockBackend, Objective, PipelineConfig};

fn main() -> hhd::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/summeval_sample.csv");
    let info = true_dataset("summeval").expect("registered");
    println!("{}: {} items in the full set, label {} means grounded", info.name, info.expected_count, info.grounded_value);

    let examples = read_true_records(&path, info.name)?
        .iter()
        .enumerate()
        .map(|(i, r)| r.to_example(format!("summeval-{i}")))
        .collect::<hhd::Result<Vec<_>>>()?;
    let preds = score_batch(&examples, &MockBackend::heuristic(), &PipelineConfig::default(), 4)
        .into_iter()
        .collect::<hhd::Result<Vec<_>>>()?;
    let scores: Vec<f64> = preds.iter().map(|p| p.hallucination_prob).collect();
    let labels: Vec<_> = examples.iter().filter_map(|e| e.label()).collect();

    let threshold = tune_threshold(&scores, &labels, Objective::Accuracy)?;
    println!("tuned threshold: {threshold:.4}");
    println!("{}", compute_metrics(&scores, &labels, threshold)?.table());
    Ok(())
}
