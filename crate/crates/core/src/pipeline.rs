//! Two-stage inference.
//!
//! 1. The reasoning classifier decodes `<CLASS> because <EXPLANATION>`; its
//!    first-step class distribution gives `reasoning_prob = P(Contradict)`.
//! 2. The explanation is appended as a `comment:` hint and the hinted
//!    classifier gives `hinted_prob`.
//! 3. The combiner averages the two.
//!
//! `NoHinted` stops after step 1 and `NoExplanation` replaces step 1 with a
//! classify-only call.

use serde::{Deserialize, Serialize};

use crate::backend::{class_probability, Backend, GenerationMode, GenerationRequest, Normalization, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::domain::{check_probability, Explanation, Label, LabeledExample, Mode, Prediction};
use crate::error::{Error, Result};
use crate::par::ordered_map;
use crate::template::{parse_component_output, render_hinted_input, render_reasoning_input, TemplateConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub threshold: f64,
    pub normalization: Normalization,
    pub seed: Option<u64>,
    pub max_output_tokens: usize,
    #[serde(skip)]
    pub template: TemplateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Full,
            threshold: 0.5,
            normalization: Normalization::RenormalizedPair,
            seed: Some(0),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            template: TemplateConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("threshold", self.threshold).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.max_output_tokens == 0 {
            return Err(Error::InvalidConfig("max_output_tokens must be at least 1".into()));
        }
        self.template.validate()
    }

    /// How the scores were produced, for output metadata.
    pub fn provenance(&self) -> serde_json::Value {
        serde_json::json!({
            "reasoning_prob_source": match self.mode {
                Mode::NoExplanation => "first-step class log-probabilities of a classify call",
                _ => "first-step class log-probabilities of the classify_and_explain call",
            },
            "combiner": "mean",
            "normalization": self.normalization,
            "decision_rule": "contradict iff hallucination_prob >= threshold",
        })
    }

    fn request(&self, input: String, mode: GenerationMode) -> GenerationRequest {
        GenerationRequest::new(input, mode)
            .seed(self.seed)
            .max_output_tokens(self.max_output_tokens)
    }
}

/// Aggregates the two stage probabilities into the final score.
///
/// Only [`Mean`] ships; a calibrated combiner trained on labeled data can be
/// plugged in through [`score_with`].
pub trait Combiner: Send + Sync {
    fn combine(&self, reasoning_prob: f64, hinted_prob: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Mean;

impl Combiner for Mean {
    fn combine(&self, reasoning_prob: f64, hinted_prob: f64) -> f64 {
        combine(reasoning_prob, hinted_prob)
    }
}

/// Arithmetic mean of the two stage probabilities.
pub fn combine(reasoning_prob: f64, hinted_prob: f64) -> f64 {
    (reasoning_prob + hinted_prob) / 2.0
}

pub fn score<B: Backend + ?Sized>(example: &LabeledExample, backend: &B, cfg: &PipelineConfig) -> Result<Prediction> {
    score_with(example, backend, cfg, &Mean)
}

pub fn score_with<B: Backend + ?Sized>(
    example: &LabeledExample,
    backend: &B,
    cfg: &PipelineConfig,
    combiner: &dyn Combiner,
) -> Result<Prediction> {
    let template = &cfg.template;
    let reasoning_input = render_reasoning_input(example, template);

    if cfg.mode == Mode::NoExplanation {
        let result = backend.generate(&cfg.request(reasoning_input, GenerationMode::Classify))?;
        let p = class_probability(&result, Label::Contradict, cfg.normalization)?;
        return Prediction::new(p, cfg.threshold, Explanation::empty(), Some(p), None, Mode::NoExplanation);
    }

    let result = backend.generate(&cfg.request(reasoning_input, GenerationMode::ClassifyAndExplain))?;
    let reasoning_prob = class_probability(&result, Label::Contradict, cfg.normalization)?;
    let parsed = result
        .first_text()
        .ok_or_else(|| Error::UnparseableOutput(String::new()))
        .and_then(|text| parse_component_output(text, template));
    let explanation = match parsed {
        Ok((_, explanation)) => explanation,
        Err(e) => {
            let warning = format!("reasoning output unparseable ({e}); scored with the reasoning classifier alone");
            log::warn!("example {}: {warning}", example.id());
            return Ok(Prediction::new(
                reasoning_prob,
                cfg.threshold,
                Explanation::empty(),
                Some(reasoning_prob),
                None,
                Mode::NoHinted,
            )?
            .with_warning(warning));
        }
    };

    if cfg.mode == Mode::NoHinted {
        return Prediction::new(reasoning_prob, cfg.threshold, explanation, Some(reasoning_prob), None, Mode::NoHinted);
    }

    let hinted_input = render_hinted_input(example, &explanation, template);
    let hinted = backend.generate(&cfg.request(hinted_input, GenerationMode::Classify))?;
    let hinted_prob = class_probability(&hinted, Label::Contradict, cfg.normalization)?;
    let p = combiner.combine(reasoning_prob, hinted_prob);
    Prediction::new(p, cfg.threshold, explanation, Some(reasoning_prob), Some(hinted_prob), Mode::Full)
}

/// Scores every example with up to `concurrency` requests in flight.
/// Results come back in input order; failures are per-entry.
pub fn score_batch<B: Backend + ?Sized>(
    examples: &[LabeledExample],
    backend: &B,
    cfg: &PipelineConfig,
    concurrency: usize,
) -> Vec<Result<Prediction>> {
    ordered_map(examples, concurrency, |e| score(e, backend, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ClassLogprobs, GeneratedText, GenerationResult, MockBackend};
    use crate::domain::{Article, Headline};
    use crate::error::BackendError;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn example(id: &str, headline: &str) -> LabeledExample {
        LabeledExample::unlabeled(id, Article::new("Title", "Body").unwrap(), Headline::new(headline).unwrap())
    }

    fn scripted(p_contradict: f64, text: &str) -> GenerationResult {
        GenerationResult {
            outputs: vec![GeneratedText {
                text: text.into(),
                logprob: -1.0,
            }],
            class_logprobs: Some(ClassLogprobs::from_probabilities(1.0 - p_contradict, p_contradict)),
        }
    }

    /// Scripts both stages of `ex` on `mock`.
    fn script_stages(mock: &mut MockBackend, ex: &LabeledExample, reasoning: (f64, &str), hinted: f64) {
        let cfg = TemplateConfig::default();
        mock.script(render_reasoning_input(ex, &cfg), scripted(reasoning.0, reasoning.1));
        let (_, explanation) = parse_component_output(reasoning.1, &cfg).unwrap_or((Label::Entail, Explanation::empty()));
        mock.script(render_hinted_input(ex, &explanation, &cfg), scripted(hinted, "Contradict"));
    }

    #[test]
    fn full_mode_averages_stages() {
        let ex = example("1", "H");
        let mut mock = MockBackend::heuristic();
        script_stages(&mut mock, &ex, (0.9, "Contradict because E1"), 0.7);
        let p = score(&ex, &mock, &PipelineConfig::default()).unwrap();
        assert_abs_diff_eq!(p.hallucination_prob, 0.8, epsilon = 1e-12);
        assert_eq!(p.label, Label::Contradict);
        assert_eq!(p.explanation.as_str(), "E1");
        assert_eq!(p.mode, Mode::Full);
        assert_abs_diff_eq!(p.reasoning_prob.unwrap(), 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(p.hinted_prob.unwrap(), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn zero_scores_are_entail() {
        let ex = example("1", "H");
        let mut mock = MockBackend::heuristic();
        let cfg = TemplateConfig::default();
        let zero = GenerationResult {
            outputs: vec![GeneratedText { text: "Entail".into(), logprob: -0.1 }],
            class_logprobs: Some(ClassLogprobs { entail: 0.0, contradict: -800.0 }),
        };
        mock.script(render_reasoning_input(&ex, &cfg), zero.clone());
        mock.script(render_hinted_input(&ex, &Explanation::empty(), &cfg), zero);
        let p = score(&ex, &mock, &PipelineConfig::default()).unwrap();
        assert_eq!(p.hallucination_prob, 0.0);
        assert_eq!(p.label, Label::Entail);
    }

    #[test]
    fn no_hinted_uses_reasoning_alone() {
        let ex = example("1", "H");
        let mut mock = MockBackend::heuristic();
        script_stages(&mut mock, &ex, (0.6, "Contradict because E"), 0.1);
        let p = score(&ex, &mock, &PipelineConfig::default().with_mode(Mode::NoHinted)).unwrap();
        assert_abs_diff_eq!(p.hallucination_prob, 0.6, epsilon = 1e-12);
        assert_eq!(p.label, Label::Contradict);
        assert!(p.hinted_prob.is_none());
        assert_eq!(p.explanation.as_str(), "E");
    }

    #[test]
    fn no_explanation_mode_classifies_only() {
        let ex = example("1", "H");
        let mut mock = MockBackend::heuristic();
        script_stages(&mut mock, &ex, (0.3, "Entail because E"), 0.9);
        let p = score(&ex, &mock, &PipelineConfig::default().with_mode(Mode::NoExplanation)).unwrap();
        assert_abs_diff_eq!(p.hallucination_prob, 0.3, epsilon = 1e-12);
        assert!(p.explanation.is_empty());
        assert_eq!(p.mode, Mode::NoExplanation);
    }

    #[test]
    fn unparseable_reasoning_output_degrades() {
        let ex = example("1", "H");
        let mut mock = MockBackend::heuristic();
        let cfg = TemplateConfig::default();
        mock.script(render_reasoning_input(&ex, &cfg), scripted(0.7, "gibberish output"));
        let p = score(&ex, &mock, &PipelineConfig::default()).unwrap();
        assert_eq!(p.mode, Mode::NoHinted);
        assert_abs_diff_eq!(p.hallucination_prob, 0.7, epsilon = 1e-12);
        assert!(p.warning.is_some());
    }

    #[test]
    fn hinted_stage_runs_with_empty_explanation() {
        let ex = example("1", "H");
        let mut mock = MockBackend::heuristic();
        script_stages(&mut mock, &ex, (0.2, "Entail"), 0.4);
        let p = score(&ex, &mock, &PipelineConfig::default()).unwrap();
        assert_eq!(p.mode, Mode::Full);
        assert_abs_diff_eq!(p.hinted_prob.unwrap(), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn batch_preserves_order_and_isolates_failures() {
        assert!(score_batch(&[], &MockBackend::heuristic(), &PipelineConfig::default(), 4).is_empty());

        let exs = [example("a", "H1"), example("b", "H2"), example("c", "H3")];
        let mut mock = MockBackend::heuristic();
        let cfg = TemplateConfig::default();
        mock.script_error(render_reasoning_input(&exs[1], &cfg), BackendError::Unavailable("down".into()));
        for concurrency in [1, 2, 8] {
            let out = score_batch(&exs, &mock, &PipelineConfig::default(), concurrency);
            assert_eq!(out.len(), 3);
            assert!(out[0].is_ok());
            assert!(matches!(out[1], Err(Error::Backend(BackendError::Unavailable(_)))));
            assert!(out[2].is_ok());
        }
    }

    #[test]
    fn threshold_changes_only_label() {
        let ex = example("1", "H");
        let mut mock = MockBackend::heuristic();
        script_stages(&mut mock, &ex, (0.55, "Contradict because E"), 0.45);
        let lo = score(&ex, &mock, &PipelineConfig::default().with_threshold(0.2)).unwrap();
        let hi = score(&ex, &mock, &PipelineConfig::default().with_threshold(0.9)).unwrap();
        assert_eq!(lo.hallucination_prob, hi.hallucination_prob);
        assert_eq!(lo.reasoning_prob, hi.reasoning_prob);
        assert_eq!(lo.hinted_prob, hi.hinted_prob);
        assert_eq!(lo.explanation, hi.explanation);
        assert_eq!((lo.label, hi.label), (Label::Contradict, Label::Entail));
    }

    #[test]
    fn custom_combiner_is_used() {
        struct Max;
        impl Combiner for Max {
            fn combine(&self, r: f64, h: f64) -> f64 {
                r.max(h)
            }
        }
        let ex = example("1", "H");
        let mut mock = MockBackend::heuristic();
        script_stages(&mut mock, &ex, (0.9, "Contradict because E1"), 0.7);
        let p = score_with(&ex, &mock, &PipelineConfig::default(), &Max).unwrap();
        assert_abs_diff_eq!(p.hallucination_prob, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn combine_examples() {
        assert_abs_diff_eq!(combine(0.9, 0.7), 0.8, epsilon = 1e-12);
        assert_eq!(combine(0.0, 1.0), 0.5);
    }

    proptest! {
        #[test]
        fn combine_properties(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0) {
            prop_assert_eq!(combine(a, b), combine(b, a));
            prop_assert_eq!(combine(a, a), a);
            let m = combine(a, b);
            prop_assert!(m >= a.min(b) && m <= a.max(b));
            if c >= b {
                prop_assert!(combine(a, c) >= combine(a, b));
            }
        }
    }
}
