//! Input rendering and output parsing for the three text-to-text components.
//!
//! ```text
//! reasoning classifier  in:  headline entailment: headline: <H> article: <A>
//!                       out: <CLASS> because <EXPLANATION>      (or <CLASS>)
//! hinted classifier     in:  <reasoning input> comment: <EXPLANATION>
//!                       out: <CLASS>
//! explainer             in:  <reasoning input> <CLASS> because
//!                       out: <EXPLANATION>
//! ```

use serde::{Deserialize, Serialize};

use crate::domain::{
    article_text, label_from_token, ArticleLayout, ClassTokens, Explanation, Label, LabeledExample,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    ReasoningClassifier,
    HintedClassifier,
    Explainer,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 3] = [
        ComponentKind::ReasoningClassifier,
        ComponentKind::HintedClassifier,
        ComponentKind::Explainer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::ReasoningClassifier => "reasoning_classifier",
            ComponentKind::HintedClassifier => "hinted_classifier",
            ComponentKind::Explainer => "explainer",
        }
    }
}

impl std::str::FromStr for ComponentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ComponentKind> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "reasoning" | "reasoning_classifier" => Ok(ComponentKind::ReasoningClassifier),
            "hinted" | "hinted_classifier" => Ok(ComponentKind::HintedClassifier),
            "explainer" => Ok(ComponentKind::Explainer),
            other => Err(Error::Invalid(format!("unknown component {other:?}"))),
        }
    }
}

/// Template strings shared by every component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    pub class_tokens: ClassTokens,
    pub because_delimiter: String,
    pub headline_prefix: String,
    pub article_prefix: String,
    pub comment_prefix: String,
    /// Fixed article layout; `None` picks per article (title-less articles are
    /// rendered as bare text).
    pub layout: Option<ArticleLayout>,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig {
            class_tokens: ClassTokens::default(),
            because_delimiter: " because ".to_string(),
            headline_prefix: "headline entailment: headline: ".to_string(),
            article_prefix: " article: ".to_string(),
            comment_prefix: " comment: ".to_string(),
            layout: None,
        }
    }
}

impl TemplateConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("because_delimiter", &self.because_delimiter),
            ("headline_prefix", &self.headline_prefix),
            ("article_prefix", &self.article_prefix),
            ("comment_prefix", &self.comment_prefix),
        ] {
            if value.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} is empty")));
            }
        }
        if self.because_delimiter.trim().is_empty() {
            return Err(Error::InvalidConfig("because_delimiter is whitespace only".into()));
        }
        let entail = self.class_tokens.entail.trim();
        let contradict = self.class_tokens.contradict.trim();
        if entail.is_empty() || contradict.is_empty() {
            return Err(Error::InvalidConfig("class tokens must be non-empty".into()));
        }
        if entail.to_lowercase() == contradict.to_lowercase() {
            return Err(Error::InvalidConfig("class tokens must be distinct".into()));
        }
        for token in [entail, contradict] {
            if token.contains(&self.because_delimiter) || token.contains(self.because_delimiter.trim()) {
                return Err(Error::InvalidConfig(format!(
                    "class token {token:?} contains the delimiter"
                )));
            }
        }
        Ok(())
    }

    pub fn class_token(&self, label: Label) -> &str {
        self.class_tokens.token(label).trim()
    }

    fn layout_for(&self, example: &LabeledExample) -> ArticleLayout {
        self.layout.unwrap_or_else(|| example.article().natural_layout())
    }
}

/// `headline entailment: headline: <H> article: <A>`; label and explanation are ignored.
pub fn render_reasoning_input(example: &LabeledExample, cfg: &TemplateConfig) -> String {
    let article = article_text(example.article(), cfg.layout_for(example));
    let mut out = String::with_capacity(
        cfg.headline_prefix.len() + example.headline().as_str().len() + cfg.article_prefix.len() + article.len(),
    );
    out.push_str(&cfg.headline_prefix);
    out.push_str(example.headline().as_str());
    out.push_str(&cfg.article_prefix);
    out.push_str(&article);
    out
}

/// `<CLASS> because <EXPLANATION>`, or the bare class token for an empty explanation.
pub fn render_reasoning_target(label: Label, explanation: &Explanation, cfg: &TemplateConfig) -> String {
    let token = cfg.class_token(label);
    if explanation.is_empty() {
        token.to_string()
    } else {
        format!("{token}{}{}", cfg.because_delimiter, explanation.as_str())
    }
}

/// Splits a decoded sequence on the first delimiter into class and explanation.
///
/// Output without a delimiter is a bare class token. A trailing delimiter with
/// nothing after it (`"Contradict because"`) yields an empty explanation.
pub fn parse_component_output(output: &str, cfg: &TemplateConfig) -> Result<(Label, Explanation)> {
    let unparseable = || Error::UnparseableOutput(output.to_string());
    let (head, explanation) = match output.find(&cfg.because_delimiter) {
        Some(at) => (&output[..at], Explanation::new(&output[at + cfg.because_delimiter.len()..])),
        None => {
            let trimmed = output.trim_end();
            let bare = cfg.because_delimiter.trim_end();
            match trimmed.strip_suffix(bare) {
                Some(head) if label_from_token(head, &cfg.class_tokens).is_ok() => (head, Explanation::empty()),
                _ => (output, Explanation::empty()),
            }
        }
    };
    let label = label_from_token(head, &cfg.class_tokens).map_err(|_| unparseable())?;
    Ok((label, explanation))
}

/// The reasoning input followed by `comment: <hint>`. The comment prefix is
/// appended even for an empty hint.
pub fn render_hinted_input(example: &LabeledExample, hint: &Explanation, cfg: &TemplateConfig) -> String {
    let mut out = render_reasoning_input(example, cfg);
    out.push_str(&cfg.comment_prefix);
    out.push_str(hint.as_str());
    out
}

/// The reasoning input followed by `<CLASS> because`.
pub fn render_explainer_input(example: &LabeledExample, label: Label, cfg: &TemplateConfig) -> String {
    let mut out = render_reasoning_input(example, cfg);
    out.push(' ');
    out.push_str(cfg.class_token(label));
    out.push_str(cfg.because_delimiter.trim_end());
    out
}

/// Input text pieces recovered from a rendered component input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedParts<'a> {
    pub headline: &'a str,
    pub article: &'a str,
    pub comment: Option<&'a str>,
    pub class_hint: Option<Label>,
}

/// Best-effort inverse of the input renderers, used by backends that need
/// the headline and article back (the mock backend's heuristic).
///
/// Returns `None` when the text does not start with the headline prefix or
/// lacks the article prefix.
pub fn split_rendered_input<'a>(input: &'a str, cfg: &TemplateConfig) -> Option<RenderedParts<'a>> {
    let rest = input.strip_prefix(&cfg.headline_prefix)?;
    let at = rest.find(&cfg.article_prefix)?;
    let headline = &rest[..at];
    let mut article = &rest[at + cfg.article_prefix.len()..];

    let mut class_hint = None;
    let because = cfg.because_delimiter.trim_end();
    if let Some(stripped) = article.strip_suffix(because) {
        for label in Label::ALL {
            let suffix = format!(" {}", cfg.class_token(label));
            if let Some(a) = stripped.strip_suffix(&suffix) {
                article = a;
                class_hint = Some(label);
                break;
            }
        }
    }

    let mut comment = None;
    if class_hint.is_none() {
        if let Some(c) = article.find(&cfg.comment_prefix) {
            comment = Some(&article[c + cfg.comment_prefix.len()..]);
            article = &article[..c];
        }
    }
    Some(RenderedParts {
        headline,
        article,
        comment,
        class_hint,
    })
}
