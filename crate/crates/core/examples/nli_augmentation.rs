//! Builds a training corpus: adapts NLI items, augments with explainer
//! generations and emits teacher-forcing records per component.

use std::path::Path;

use hhd::augment::{adapt_nli_example, NeutralPolicy, NliLabel};
use hhd::{
    augment_with_explainer, emit_training_records, read_examples, AugmentationConfig, ComponentKind, DatasetFormat,
    MockBackend, ReadOptions, TemplateConfig,
};

fn main() -> hhd::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let template = TemplateConfig::default();

    let strict = read_examples(data.join("esnli_sample.csv"), DatasetFormat::EsnliCsv, &ReadOptions::default())?;
    let lenient = ReadOptions {
        neutral: NeutralPolicy::AsContradict,
        ..ReadOptions::default()
    };
    let remapped = read_examples(data.join("esnli_sample.csv"), DatasetFormat::EsnliCsv, &lenient)?;
    println!(
        "esnli: {} kept, {} neutral skipped; with neutral as contradict: {}",
        strict.examples.len(),
        strict.skipped,
        remapped.examples.len()
    );
    let anli = read_examples(data.join("anli_sample.jsonl"), DatasetFormat::AnliJsonl, &ReadOptions::default())?;
    println!("anli: {} examples", anli.examples.len());

    let single = adapt_nli_example(
        "manual",
        "Two dogs run through a snowy field.",
        "Animals are outside.",
        NliLabel::Entailment,
        &["a snowy field is outside".to_string()],
        NeutralPolicy::Reject,
    )?;
    println!("adapted: {} -> {:?}", single.headline().as_str(), single.label());

    let backend = MockBackend::heuristic();
    let cfg = AugmentationConfig::pretraining();
    let augmented = augment_with_explainer(&strict.examples, &backend, &cfg, &template, 4)?;
    println!(
        "augmented with k={}: {} -> {} examples ({} duplicates dropped)",
        cfg.k,
        strict.examples.len(),
        augmented.examples.len(),
        augmented.dropped_duplicates
    );
    for e in augmented.examples.iter().take(4) {
        println!("  {:<24} {:<20} {}", e.id(), format!("{:?}", e.origin()), e.explanation_or_empty().as_str());
    }

    let records = emit_training_records(&augmented.examples, &ComponentKind::ALL, &template)?;
    for kind in ComponentKind::ALL {
        println!("{:<22} {} records", kind.as_str(), records.iter().filter(|r| r.component == kind).count());
    }
    if let Some(r) = records.first() {
        println!("first record:\n  input:  {}\n  target: {}", r.input, r.target);
    }
    Ok(())
}
