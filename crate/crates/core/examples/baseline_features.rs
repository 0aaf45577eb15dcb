//! Extracts the lexical baseline features and fits the linear model.

use std::path::Path;

use hhd::features::write_features_csv;
use hhd::{compute_metrics, extract_features, jaro_winkler, read_examples, train_linear, DatasetFormat, ReadOptions};

fn main() -> hhd::Result<()> {
    let a: Vec<char> = "MARTHA".chars().collect();
    let b: Vec<char> = "MARHTA".chars().collect();
    println!("jaro-winkler(MARTHA, MARHTA) = {:.4}", jaro_winkler(&a, &b));

    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let pairs = read_examples(data.join("pairs.jsonl"), DatasetFormat::HhdJsonl, &ReadOptions::default())?.examples;
    let rows: Vec<_> = pairs
        .iter()
        .map(|e| (e.id().to_string(), extract_features(e), e.label()))
        .collect();
    write_features_csv(&rows, std::io::stdout().lock())?;

    let train: Vec<_> = rows.iter().filter_map(|(_, f, l)| l.map(|l| (*f, l))).collect();
    let model = train_linear(&train, 500, 0.1, 0)?;
    let scores: Vec<f64> = train.iter().map(|(f, _)| model.predict_proba(f)).collect();
    let labels: Vec<_> = train.iter().map(|(_, l)| *l).collect();
    println!("\ntraining-set fit:\n{}", compute_metrics(&scores, &labels, 0.5)?.table());
    Ok(())
}
