//! Headline hallucination detection with explanation-augmented
//! text-to-text classifiers.
//!
//! A headline is scored against its article in two stages. A reasoning
//! classifier produces `<CLASS> because <EXPLANATION>`. A hinted classifier
//! then re-classifies with that explanation appended as a hint. The two class
//! probabilities are averaged. Models sit behind the [`Backend`] trait: an
//! HTTP client for real model servers and a deterministic [`MockBackend`] for
//! tests and examples.
//!
//! ```
//! use hhd::{score, Article, Headline, LabeledExample, MockBackend, PipelineConfig};
//!
//! let example = LabeledExample::unlabeled(
//!     "1",
//!     Article::new("Storm closes schools", "Schools across the county closed on Monday.").unwrap(),
//!     Headline::new("Storm closes county schools").unwrap(),
//! );
//! let prediction = score(&example, &MockBackend::heuristic(), &PipelineConfig::default()).unwrap();
//! assert!((0.0..=1.0).contains(&prediction.hallucination_prob));
//! ```

pub mod augment;
pub mod backend;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod eval;
pub mod features;
mod par;
pub mod pipeline;
pub mod template;
pub mod text;

pub use augment::{
    adapt_nli_example, augment_with_explainer, emit_training_records, AugmentationConfig, NeutralPolicy, NliLabel,
    TrainingRecord,
};
pub use backend::{
    Backend, ClassLogprobs, GeneratedText, GenerationMode, GenerationRequest, GenerationResult, HttpBackend,
    MockBackend, MockBackendSpec, MockServer, Normalization,
};
pub use config::CliConfig;
pub use dataset::{read_examples, read_predictions, write_predictions, DatasetFormat, DatasetManifest, ReadOptions};
pub use domain::{Article, Explanation, Headline, Label, LabeledExample, Mode, Origin, Prediction};
pub use error::{BackendError, Error, Result};
pub use eval::{compute_metrics, paired_t_test, tune_threshold, EvalReport, Objective, SignificanceResult};
pub use features::{extract_features, jaro_winkler, train_linear, FeatureVector, LinearModel};
pub use pipeline::{score, score_batch, PipelineConfig};
pub use template::{parse_component_output, render_reasoning_input, render_reasoning_target, ComponentKind, TemplateConfig};
