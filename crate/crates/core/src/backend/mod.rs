//! Text-to-text model backends.
//!
//! A [`Backend`] turns a rendered component input into decoded sequences and,
//! for the classify modes, first-step log-probabilities of the two class
//! tokens. Request and result types double as the JSON bodies of the wire
//! protocol (`POST /v1/generate`), so their field names are a stable contract.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Label;
use crate::error::{BackendError, Error, Result};

pub mod conformance;
pub mod http;
pub mod mock;
pub mod server;

pub use http::{ClientOptions, HttpBackend};
pub use mock::{Fallback, MockBackend, MockBackendSpec, ScriptedEntry};
pub use server::MockServer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    /// One-step decoding of a class token.
    Classify,
    /// Class token followed by `because <explanation>`.
    ClassifyAndExplain,
    /// Free-text explanation only.
    Explain,
}

impl GenerationMode {
    pub fn wants_class_logprobs(self) -> bool {
        matches!(self, GenerationMode::Classify | GenerationMode::ClassifyAndExplain)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub input: String,
    pub mode: GenerationMode,
    pub num_outputs: usize,
    pub seed: Option<u64>,
    pub max_output_tokens: usize,
}

pub const DEFAULT_MAX_OUTPUT_TOKENS: usize = 128;

impl GenerationRequest {
    pub fn new(input: impl Into<String>, mode: GenerationMode) -> GenerationRequest {
        GenerationRequest {
            input: input.into(),
            mode,
            num_outputs: 1,
            seed: None,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn num_outputs(mut self, n: usize) -> Self {
        self.num_outputs = n;
        self
    }

    pub fn seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn max_output_tokens(mut self, n: usize) -> Self {
        self.max_output_tokens = n;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.num_outputs == 0 {
            return Err(BackendError::BadRequest("num_outputs must be at least 1".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(BackendError::BadRequest("max_output_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedText {
    pub text: String,
    /// Sequence log-probability, `<= 0`.
    pub logprob: f64,
}

/// First-step log-probabilities of the two class tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassLogprobs {
    pub entail: f64,
    pub contradict: f64,
}

impl ClassLogprobs {
    pub fn from_probabilities(entail: f64, contradict: f64) -> ClassLogprobs {
        ClassLogprobs {
            entail: entail.ln(),
            contradict: contradict.ln(),
        }
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Entail => self.entail,
            Label::Contradict => self.contradict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub outputs: Vec<GeneratedText>,
    pub class_logprobs: Option<ClassLogprobs>,
}

impl GenerationResult {
    /// Checks the result against the request that produced it.
    pub fn validate_for(&self, request: &GenerationRequest) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::MalformedResponse(m));
        if self.outputs.len() > request.num_outputs {
            return bad(format!(
                "{} outputs returned for num_outputs={}",
                self.outputs.len(),
                request.num_outputs
            ));
        }
        for out in &self.outputs {
            if !(out.logprob <= 0.0 && out.logprob.is_finite()) {
                return bad(format!("sequence logprob {} is not a finite value <= 0", out.logprob));
            }
        }
        match (&self.class_logprobs, request.mode.wants_class_logprobs()) {
            (None, true) => return bad("class_logprobs missing in a classify mode".into()),
            (Some(lp), _) => {
                for v in [lp.entail, lp.contradict] {
                    if !(v <= 0.0 && v.is_finite()) {
                        return bad(format!("class logprob {v} is not a finite value <= 0"));
                    }
                }
            }
            (None, false) => {}
        }
        Ok(())
    }

    pub fn first_text(&self) -> Option<&str> {
        self.outputs.first().map(|o| o.text.as_str())
    }
}

/// Any text-to-text model. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
}

/// How a class probability is read off the first-step distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `exp(logprob[target])`; mass on non-class tokens is left out.
    RawFirstToken,
    /// Softmax restricted to the two class tokens.
    #[default]
    RenormalizedPair,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Normalization> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "raw" | "raw_first_token" => Ok(Normalization::RawFirstToken),
            "renormalized" | "renormalized_pair" | "pair" => Ok(Normalization::RenormalizedPair),
            other => Err(Error::Invalid(format!("unknown normalization {other:?}"))),
        }
    }
}

/// Probability of `target` from the result's class log-probabilities.
pub fn class_probability(result: &GenerationResult, target: Label, normalization: Normalization) -> Result<f64> {
    let lp = result.class_logprobs.as_ref().ok_or(Error::MissingClassLogprobs)?;
    let p = match normalization {
        Normalization::RawFirstToken => lp.get(target).exp(),
        Normalization::RenormalizedPair => {
            let max = lp.entail.max(lp.contradict);
            let num = (lp.get(target) - max).exp();
            let den = (lp.entail - max).exp() + (lp.contradict - max).exp();
            num / den
        }
    };
    if p.is_nan() {
        return Err(Error::Backend(BackendError::MalformedResponse("class logprobs are NaN".into())));
    }
    Ok(p.clamp(0.0, 1.0))
}
