//! Scores the sample pairs with the scripted mock backend in all three modes.
//!
//! ```text
//! cargo run --example score_with_mock
//! ```

use std::path::Path;

use hhd::{read_examples, score_batch, DatasetFormat, MockBackend, Mode, PipelineConfig, ReadOptions};

fn main() -> hhd::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let backend = MockBackend::load(data.join("mock_fixture.json"))?;
    let pairs = read_examples(data.join("pairs.jsonl"), DatasetFormat::HhdJsonl, &ReadOptions::default())?.examples;

    for mode in [Mode::Full, Mode::NoHinted, Mode::NoExplanation] {
        let cfg = PipelineConfig::default().with_mode(mode);
        println!("== {mode:?}");
        for (example, result) in pairs.iter().zip(score_batch(&pairs, &backend, &cfg, 4)) {
            match result {
                Ok(p) => println!(
                    "{:>4}  p={:.3}  {:<10} gold={:<10} {}",
                    example.id(),
                    p.hallucination_prob,
                    p.label.as_str(),
                    example.label().map(|l| l.as_str()).unwrap_or("-"),
                    p.explanation.as_str(),
                ),
                Err(e) => println!("{:>4}  error: {e}", example.id()),
            }
        }
    }
    Ok(())
}
