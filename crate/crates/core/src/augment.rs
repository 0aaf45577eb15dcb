//! Training-corpus construction: NLI adaptation, explainer augmentation and
//! teacher-forcing record emission.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, GenerationMode, GenerationRequest};
use crate::domain::{Article, Explanation, Headline, Label, LabeledExample, Origin};
use crate::error::{Error, Result};
use crate::par::ordered_map;
use crate::template::{
    render_explainer_input, render_hinted_input, render_reasoning_input, render_reasoning_target, ComponentKind,
    TemplateConfig,
};

/// What to do with NLI "neutral" items, which have no two-class counterpart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeutralPolicy {
    #[default]
    Reject,
    /// Treat unsupported-but-not-contradicted hypotheses as hallucinated.
    AsContradict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    /// Explainer-generated explanations requested per example.
    pub k: usize,
    pub dedupe: bool,
    pub seed: u64,
    pub neutral: NeutralPolicy,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig::fine_tuning()
    }
}

impl AugmentationConfig {
    /// K = 1, used while pretraining on NLI corpora.
    pub fn pretraining() -> Self {
        AugmentationConfig {
            k: 1,
            dedupe: true,
            seed: 0,
            neutral: NeutralPolicy::Reject,
        }
    }

    /// K = 3, used for in-domain fine-tuning.
    pub fn fine_tuning() -> Self {
        AugmentationConfig {
            k: 3,
            ..AugmentationConfig::pretraining()
        }
    }
}

/// Three-way NLI label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl std::str::FromStr for NliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<NliLabel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "entail" | "e" | "0" => Ok(NliLabel::Entailment),
            "neutral" | "n" | "1" => Ok(NliLabel::Neutral),
            "contradiction" | "contradict" | "c" | "2" => Ok(NliLabel::Contradiction),
            other => Err(Error::UnsupportedLabel(other.to_string())),
        }
    }
}

impl NliLabel {
    pub fn to_label(self, neutral: NeutralPolicy) -> Result<Label> {
        match (self, neutral) {
            (NliLabel::Entailment, _) => Ok(Label::Entail),
            (NliLabel::Contradiction, _) | (NliLabel::Neutral, NeutralPolicy::AsContradict) => Ok(Label::Contradict),
            (NliLabel::Neutral, NeutralPolicy::Reject) => Err(Error::UnsupportedLabel("neutral".into())),
        }
    }
}

/// Hypothesis becomes the headline, premise the (title-less) article body.
/// The first non-empty explanation, if any, is attached.
pub fn adapt_nli_example(
    id: impl Into<String>,
    premise: &str,
    hypothesis: &str,
    label: NliLabel,
    explanations: &[String],
    neutral: NeutralPolicy,
) -> Result<LabeledExample> {
    let label = label.to_label(neutral)?;
    let article = Article::from_body(premise)?;
    let headline = Headline::new(hypothesis)?;
    let explanation = explanations.iter().map(Explanation::new).find(|e| !e.is_empty());
    Ok(LabeledExample::labeled(id, article, headline, label, explanation).with_origin(Origin::NliAdapted))
}

#[derive(Debug, Default)]
pub struct AugmentationOutput {
    /// Originals, each followed by its generated variants.
    pub examples: Vec<LabeledExample>,
    /// Generated explanations dropped as duplicates.
    pub dropped_duplicates: usize,
    /// Examples left un-augmented because the explainer call failed.
    pub failures: Vec<(String, Error)>,
}

/// Adds up to `cfg.k` copies of each example carrying explainer-generated
/// explanations conditioned on the gold label.
///
/// With `dedupe`, generations equal to one another or to the human
/// explanation are dropped. Empty generations are always dropped.
pub fn augment_with_explainer<B: Backend + ?Sized>(
    examples: &[LabeledExample],
    backend: &B,
    cfg: &AugmentationConfig,
    template: &TemplateConfig,
    concurrency: usize,
) -> Result<AugmentationOutput> {
    let mut out = AugmentationOutput::default();
    if let Some(unlabeled) = examples.iter().find(|e| e.label().is_none()) {
        return Err(Error::Invalid(format!("example {} has no label", unlabeled.id())));
    }
    if cfg.k == 0 {
        out.examples = examples.to_vec();
        return Ok(out);
    }

    let generations = ordered_map(examples, concurrency, |example| {
        let label = example.label().expect("checked above");
        let request = GenerationRequest::new(render_explainer_input(example, label, template), GenerationMode::Explain)
            .num_outputs(cfg.k)
            .seed(Some(cfg.seed));
        backend.generate(&request)
    });

    for (example, generated) in examples.iter().zip(generations) {
        out.examples.push(example.clone());
        let generated = match generated {
            Ok(g) => g,
            Err(e) => {
                log::warn!("explainer failed for {}: {e}", example.id());
                out.failures.push((example.id().to_string(), e.into()));
                continue;
            }
        };
        let mut seen: HashSet<Explanation> = HashSet::new();
        if example.has_explanation() {
            seen.insert(example.explanation_or_empty());
        }
        let mut added = 0;
        for output in generated.outputs.iter().take(cfg.k) {
            let explanation = Explanation::new(&output.text);
            if explanation.is_empty() {
                continue;
            }
            if cfg.dedupe && !seen.insert(explanation.clone()) {
                out.dropped_duplicates += 1;
                continue;
            }
            let variant = example
                .with_explanation(explanation)?
                .with_origin(Origin::ExplainerGenerated)
                .with_id(format!("{}~x{}", example.id(), added));
            out.examples.push(variant);
            added += 1;
        }
    }
    Ok(out)
}

/// One teacher-forcing (input, target) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub input: String,
    pub target: String,
    pub component: ComponentKind,
    pub origin: Origin,
}

/// Renders training pairs for the requested components.
///
/// The reasoning classifier gets every example; the hinted classifier and the
/// explainer only examples with a non-empty explanation.
pub fn emit_training_records(
    examples: &[LabeledExample],
    components: &[ComponentKind],
    cfg: &TemplateConfig,
) -> Result<Vec<TrainingRecord>> {
    let mut records = Vec::new();
    for example in examples {
        let label = example
            .label()
            .ok_or_else(|| Error::Invalid(format!("example {} has no label", example.id())))?;
        let explanation = example.explanation_or_empty();
        for component in ComponentKind::ALL {
            if !components.contains(&component) {
                continue;
            }
            let (input, target) = match component {
                ComponentKind::ReasoningClassifier => (
                    render_reasoning_input(example, cfg),
                    render_reasoning_target(label, &explanation, cfg),
                ),
                _ if explanation.is_empty() => continue,
                ComponentKind::HintedClassifier => (
                    render_hinted_input(example, &explanation, cfg),
                    cfg.class_token(label).to_string(),
                ),
                ComponentKind::Explainer => (
                    render_explainer_input(example, label, cfg),
                    explanation.as_str().to_string(),
                ),
            };
            records.push(TrainingRecord {
                input,
                target,
                component,
                origin: example.origin(),
            });
        }
    }
    Ok(records)
}

/// One JSON object per line: `{"input","target","component","origin"}`.
pub fn write_records_jsonl(records: &[TrainingRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `input<TAB>target` lines with `\\`, `\t`, `\n` and `\r` backslash-escaped.
pub fn write_records_tsv<'a>(records: impl IntoIterator<Item = &'a TrainingRecord>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for r in records {
        writeln!(w, "{}\t{}", escape_tsv(&r.input), escape_tsv(&r.target)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn escape_tsv(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_tsv(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}
