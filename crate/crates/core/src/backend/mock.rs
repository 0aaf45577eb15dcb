//! Deterministic in-process backend.
//!
//! Scripted inputs replay a fixed [`GenerationResult`] (or error). Everything
//! else goes to the fallback: an error, or a word-overlap heuristic that
//! scores entailment as
//!
//! ```text
//! o = |headline ∩ article| / |headline|        (multiset, normalized tokens)
//! z = (2·o − 1) / temperature
//! P(Entail) = exp(z/2) / (exp(z/2) + exp(−z/2)) = sigmoid(z)
//! ```
//!
//! and fabricates templated explanations naming the supported or unsupported
//! headline words. Sampling is seeded by a hash of the input and the request
//! seed, so identical requests always get identical results.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, ClassLogprobs, GeneratedText, GenerationMode, GenerationRequest, GenerationResult};
use crate::domain::{Explanation, Label};
use crate::error::{BackendError, Error, Result};
use crate::template::{render_reasoning_target, split_rendered_input, TemplateConfig};
use crate::text::{multiset_overlap, normalized_tokens};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    Heuristic,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedError {
    Unavailable,
    InputTooLong,
    BadRequest,
    MalformedResponse,
}

impl ScriptedError {
    fn to_error(self, input: &str) -> BackendError {
        let msg = format!("scripted failure for input of {} bytes", input.len());
        match self {
            ScriptedError::Unavailable => BackendError::Unavailable(msg),
            ScriptedError::InputTooLong => BackendError::InputTooLong(msg),
            ScriptedError::BadRequest => BackendError::BadRequest(msg),
            ScriptedError::MalformedResponse => BackendError::MalformedResponse(msg),
        }
    }
}

/// One fixture entry: an exact input and what to answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedEntry {
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<GenerationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ScriptedError>,
    /// Mode the conformance suite uses when replaying the entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<GenerationMode>,
}

impl ScriptedEntry {
    pub fn response(input: impl Into<String>, response: GenerationResult) -> ScriptedEntry {
        ScriptedEntry {
            input: input.into(),
            response: Some(response),
            error: None,
            mode: None,
        }
    }

    pub fn error(input: impl Into<String>, error: ScriptedError) -> ScriptedEntry {
        ScriptedEntry {
            input: input.into(),
            response: None,
            error: Some(error),
            mode: None,
        }
    }

    pub fn with_mode(mut self, mode: GenerationMode) -> ScriptedEntry {
        self.mode = Some(mode);
        self
    }
}

/// Fixture file contents; shared with out-of-process protocol servers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockBackendSpec {
    pub responses: Vec<ScriptedEntry>,
    pub fallback: Fallback,
    pub heuristic_temperature: f64,
    /// Inputs longer than this many characters are refused with `InputTooLong`.
    pub max_input_chars: Option<usize>,
    pub template: TemplateConfig,
}

impl Default for MockBackendSpec {
    fn default() -> Self {
        MockBackendSpec {
            responses: Vec::new(),
            fallback: Fallback::Heuristic,
            heuristic_temperature: 0.25,
            max_input_chars: None,
            template: TemplateConfig::default(),
        }
    }
}

impl MockBackendSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<MockBackendSpec> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: MockBackendSpec =
            serde_json::from_str(&raw).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.heuristic_temperature > 0.0 && self.heuristic_temperature.is_finite()) {
            return Err(Error::InvalidConfig("heuristic_temperature must be a positive real".into()));
        }
        self.template.validate()?;
        let mut seen = HashSet::new();
        for entry in &self.responses {
            if entry.response.is_some() == entry.error.is_some() {
                return Err(Error::InvalidConfig(format!(
                    "scripted entry {:?} needs exactly one of response/error",
                    truncate_for_message(&entry.input)
                )));
            }
            if !seen.insert(entry.input.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate scripted input {:?}",
                    truncate_for_message(&entry.input)
                )));
            }
            if let Some(response) = &entry.response {
                let request = GenerationRequest::new(entry.input.clone(), entry.mode.unwrap_or(GenerationMode::Explain))
                    .num_outputs(response.outputs.len().max(1));
                response
                    .validate_for(&request)
                    .map_err(|e| Error::InvalidConfig(format!("scripted response: {e}")))?;
            }
        }
        Ok(())
    }
}

fn truncate_for_message(s: &str) -> String {
    s.chars().take(60).collect()
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    scripted: HashMap<String, std::result::Result<GenerationResult, BackendError>>,
    fallback: Fallback,
    temperature: f64,
    max_input_chars: Option<usize>,
    template: TemplateConfig,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend::heuristic()
    }
}

impl MockBackend {
    /// Heuristic-only backend with the default template and temperature.
    pub fn heuristic() -> MockBackend {
        MockBackend::from_spec(MockBackendSpec::default()).expect("default spec is valid")
    }

    pub fn from_spec(spec: MockBackendSpec) -> Result<MockBackend> {
        spec.validate()?;
        let scripted = spec
            .responses
            .into_iter()
            .map(|e| {
                let reply = match (e.response, e.error) {
                    (Some(r), _) => Ok(r),
                    (None, Some(err)) => Err(err.to_error(&e.input)),
                    (None, None) => unreachable!("validated"),
                };
                (e.input, reply)
            })
            .collect();
        Ok(MockBackend {
            scripted,
            fallback: spec.fallback,
            temperature: spec.heuristic_temperature,
            max_input_chars: spec.max_input_chars,
            template: spec.template,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MockBackend> {
        MockBackend::from_spec(MockBackendSpec::load(path)?)
    }

    pub fn with_template(mut self, template: TemplateConfig) -> MockBackend {
        self.template = template;
        self
    }

    pub fn script(&mut self, input: impl Into<String>, result: GenerationResult) -> &mut Self {
        self.scripted.insert(input.into(), Ok(result));
        self
    }

    pub fn script_error(&mut self, input: impl Into<String>, error: BackendError) -> &mut Self {
        self.scripted.insert(input.into(), Err(error));
        self
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Heuristic class log-probabilities for a headline/article pair.
    pub fn heuristic_logprobs(&self, headline: &str, article: &str) -> ClassLogprobs {
        let h = normalized_tokens(headline);
        let a = normalized_tokens(article);
        let overlap = if h.is_empty() {
            0.0
        } else {
            multiset_overlap(&h, &a) as f64 / h.len() as f64
        };
        let z = (2.0 * overlap - 1.0) / self.temperature;
        ClassLogprobs {
            entail: -softplus(-z),
            contradict: -softplus(z),
        }
    }

    fn run_heuristic(&self, request: &GenerationRequest) -> std::result::Result<GenerationResult, BackendError> {
        let parts = split_rendered_input(&request.input, &self.template).ok_or_else(|| {
            BackendError::BadRequest("input does not follow the headline entailment template".into())
        })?;
        let lp = self.heuristic_logprobs(parts.headline, parts.article);
        let predicted = if lp.entail > lp.contradict {
            Label::Entail
        } else {
            Label::Contradict
        };
        let evidence = Evidence::new(parts.headline, parts.article);
        let mut rng = ChaCha8Rng::from_seed(seed_bytes(&request.input, request.seed));

        let result = match request.mode {
            GenerationMode::Classify => GenerationResult {
                outputs: vec![GeneratedText {
                    text: self.template.class_token(predicted).to_string(),
                    logprob: lp.get(predicted),
                }],
                class_logprobs: Some(lp),
            },
            GenerationMode::ClassifyAndExplain => {
                let explanation = evidence.explanations(predicted, 1, &mut rng).remove(0);
                let text = render_reasoning_target(predicted, &Explanation::new(&explanation), &self.template);
                let logprob = lp.get(predicted) - length_penalty(&explanation);
                GenerationResult {
                    outputs: vec![GeneratedText { text, logprob }],
                    class_logprobs: Some(lp),
                }
            }
            GenerationMode::Explain => {
                let label = parts.class_hint.unwrap_or(predicted);
                let outputs = evidence
                    .explanations(label, request.num_outputs, &mut rng)
                    .into_iter()
                    .enumerate()
                    .map(|(rank, text)| GeneratedText {
                        logprob: -0.1 * (rank as f64 + 1.0) - length_penalty(&text),
                        text,
                    })
                    .collect();
                GenerationResult {
                    outputs,
                    class_logprobs: None,
                }
            }
        };
        Ok(result)
    }
}

impl Backend for MockBackend {
    fn generate(&self, request: &GenerationRequest) -> std::result::Result<GenerationResult, BackendError> {
        request.validate()?;
        if let Some(limit) = self.max_input_chars {
            let n = request.input.chars().count();
            if n > limit {
                return Err(BackendError::InputTooLong(format!("{n} characters > limit {limit}")));
            }
        }
        let mut result = match self.scripted.get(&request.input) {
            Some(reply) => reply.clone()?,
            None => match self.fallback {
                Fallback::Heuristic => self.run_heuristic(request)?,
                Fallback::Error => {
                    return Err(BackendError::BadRequest("no scripted response for input".into()));
                }
            },
        };
        result.outputs.truncate(request.num_outputs);
        for out in &mut result.outputs {
            out.text = truncate_words(&out.text, request.max_output_tokens);
        }
        Ok(result)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn length_penalty(text: &str) -> f64 {
    0.05 * text.split_whitespace().count() as f64
}

fn truncate_words(text: &str, max_words: usize) -> String {
    if text.split_whitespace().count() <= max_words {
        return text.to_string();
    }
    text.split_whitespace().take(max_words).collect::<Vec<_>>().join(" ")
}

fn seed_bytes(input: &str, seed: Option<u64>) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(input.as_bytes());
    match seed {
        Some(s) => {
            hasher.update([1u8]);
            hasher.update(s.to_le_bytes());
        }
        None => hasher.update([0u8]),
    }
    hasher.finalize().into()
}

/// Headline words split by whether the article contains them.
struct Evidence {
    supported: Vec<String>,
    unsupported: Vec<String>,
}

const CONTRADICT_PATTERNS: &[&str] = &[
    "{} is not supported by the article.",
    "the article does not mention {}.",
    "{} is missing from the article.",
    "the headline adds {}, which the article does not say.",
];
const CONTRADICT_GENERIC: &[&str] = &[
    "the headline overstates what the article says.",
    "the headline misrepresents the article.",
    "the article does not support the claim in the headline.",
];
const ENTAIL_PATTERNS: &[&str] = &[
    "the article states {}.",
    "{} appears in the article.",
    "the article supports {}.",
];
const ENTAIL_GENERIC: &[&str] = &[
    "the headline restates the article.",
    "the article supports the headline.",
];

impl Evidence {
    fn new(headline: &str, article: &str) -> Evidence {
        let article: HashSet<String> = normalized_tokens(article).into_iter().collect();
        let mut seen = HashSet::new();
        let (mut supported, mut unsupported) = (Vec::new(), Vec::new());
        for token in normalized_tokens(headline) {
            if !seen.insert(token.clone()) {
                continue;
            }
            if article.contains(&token) {
                supported.push(token);
            } else {
                unsupported.push(token);
            }
        }
        Evidence { supported, unsupported }
    }

    /// `n` distinct explanations for `label`, in seeded order.
    fn explanations(&self, label: Label, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
        let (words, patterns, generic) = match label {
            Label::Contradict => (&self.unsupported, CONTRADICT_PATTERNS, CONTRADICT_GENERIC),
            Label::Entail => (&self.supported, ENTAIL_PATTERNS, ENTAIL_GENERIC),
        };
        let mut subjects: Vec<String> = words.iter().map(|w| format!("\"{w}\"")).collect();
        if words.len() > 1 {
            let joined = words.iter().take(3).map(|w| format!("\"{w}\"")).collect::<Vec<_>>();
            subjects.insert(0, joined.join(", "));
        }
        let mut pool: Vec<String> = subjects
            .iter()
            .flat_map(|s| patterns.iter().map(move |p| p.replacen("{}", s, 1)))
            .collect();
        pool.extend(generic.iter().map(|s| s.to_string()));
        pool.shuffle(rng);

        let mut seen = HashSet::new();
        pool.retain(|p| seen.insert(p.clone()));
        let len = pool.len();
        (0..n)
            .map(|i| {
                if i < len {
                    pool[i].clone()
                } else {
                    format!("{} ({})", pool[i % len].trim_end_matches('.'), i / len + 1)
                }
            })
            .collect()
    }
}
