//! Shared vocabulary: articles, headlines, labels, explanations, examples and
//! predictions.
//!
//! `Label::Contradict` is the positive ("hallucinated") class everywhere in
//! the crate; `Label::Entail` means the article supports the headline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary hallucination label. `Contradict` maps to the flag value 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entail,
    Contradict,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Entail, Label::Contradict];

    pub fn is_hallucinated(self) -> bool {
        self == Label::Contradict
    }

    /// 1 for `Contradict`, 0 for `Entail`.
    pub fn as_flag(self) -> u8 {
        match self {
            Label::Entail => 0,
            Label::Contradict => 1,
        }
    }

    pub fn from_flag(flag: u8) -> Result<Label> {
        match flag {
            0 => Ok(Label::Entail),
            1 => Ok(Label::Contradict),
            other => Err(Error::UnsupportedLabel(other.to_string())),
        }
    }

    pub fn from_hallucinated(hallucinated: bool) -> Label {
        if hallucinated {
            Label::Contradict
        } else {
            Label::Entail
        }
    }

    /// Lowercase name used in files and on the wire.
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entail => "entail",
            Label::Contradict => "contradict",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The decoded strings that stand for each class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassTokens {
    pub entail: String,
    pub contradict: String,
}

impl Default for ClassTokens {
    fn default() -> Self {
        ClassTokens {
            entail: "Entail".to_string(),
            contradict: "Contradict".to_string(),
        }
    }
}

impl ClassTokens {
    pub fn token(&self, label: Label) -> &str {
        match label {
            Label::Entail => &self.entail,
            Label::Contradict => &self.contradict,
        }
    }
}

/// Maps a decoded class token back to its label (trimmed, case-insensitive).
pub fn label_from_token(token: &str, tokens: &ClassTokens) -> Result<Label> {
    let token = token.trim();
    let folded = token.to_lowercase();
    Label::ALL
        .into_iter()
        .find(|&label| tokens.token(label).trim().to_lowercase() == folded)
        .ok_or_else(|| Error::UnknownClassToken(token.to_string()))
}

/// How an article's title and body are joined into one text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArticleLayout {
    /// `title: <title> passage: <body>`
    TitlePassage,
    /// `<title>\n<body>`
    Concatenate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    title: String,
    body: String,
    source_id: Option<String>,
}

impl Article {
    pub fn new(title: impl Into<String>, body: impl Into<String>) -> Result<Article> {
        let title = title.into().trim().to_string();
        let body = body.into().trim().to_string();
        if title.is_empty() && body.is_empty() {
            return Err(Error::Invalid("article has neither title nor body".into()));
        }
        Ok(Article {
            title,
            body,
            source_id: None,
        })
    }

    /// An article that is a single grounding text (NLI premise, TRUE grounding).
    pub fn from_body(body: impl Into<String>) -> Result<Article> {
        Article::new("", body)
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Article {
        self.source_id = Some(source_id.into());
        self
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }

    /// Layout picked when none is configured: title-less articles are plain
    /// grounding texts and are rendered without prefixes.
    pub fn natural_layout(&self) -> ArticleLayout {
        if self.title.is_empty() {
            ArticleLayout::Concatenate
        } else {
            ArticleLayout::TitlePassage
        }
    }
}

/// Renders the article as one text. Empty parts are dropped together with
/// their prefix or separator.
pub fn article_text(article: &Article, layout: ArticleLayout) -> String {
    let (title, body) = (article.title(), article.body());
    match layout {
        ArticleLayout::TitlePassage => {
            let mut parts = Vec::with_capacity(2);
            if !title.is_empty() {
                parts.push(format!("title: {title}"));
            }
            if !body.is_empty() {
                parts.push(format!("passage: {body}"));
            }
            parts.join(" ")
        }
        ArticleLayout::Concatenate => match (title.is_empty(), body.is_empty()) {
            (false, false) => format!("{title}\n{body}"),
            (false, true) => title.to_string(),
            _ => body.to_string(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Headline(String);

impl Headline {
    pub fn new(text: impl Into<String>) -> Result<Headline> {
        let text = text.into().trim().to_string();
        if text.is_empty() {
            return Err(Error::Invalid("headline is empty".into()));
        }
        Ok(Headline(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Headline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Free-text rationale. Leading and trailing whitespace is trimmed; the empty
/// explanation is legal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Explanation(String);

impl Explanation {
    pub fn new(text: impl AsRef<str>) -> Explanation {
        Explanation(text.as_ref().trim().to_string())
    }

    pub fn empty() -> Explanation {
        Explanation(String::new())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Explanation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Explanation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Explanation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer).map(Explanation::new)
    }
}

/// Where a training example came from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Human,
    ExplainerGenerated,
    NliAdapted,
}

/// An (article, headline) pair with optional label and explanation.
///
/// An explanation can only be attached to a labeled example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    id: String,
    article: Article,
    headline: Headline,
    label: Option<Label>,
    explanation: Option<Explanation>,
    origin: Origin,
}

impl LabeledExample {
    pub fn unlabeled(id: impl Into<String>, article: Article, headline: Headline) -> LabeledExample {
        LabeledExample {
            id: id.into(),
            article,
            headline,
            label: None,
            explanation: None,
            origin: Origin::Human,
        }
    }

    pub fn labeled(
        id: impl Into<String>,
        article: Article,
        headline: Headline,
        label: Label,
        explanation: Option<Explanation>,
    ) -> LabeledExample {
        LabeledExample {
            id: id.into(),
            article,
            headline,
            label: Some(label),
            explanation,
            origin: Origin::Human,
        }
    }

    /// Generic constructor that enforces the label/explanation invariant.
    pub fn new(
        id: impl Into<String>,
        article: Article,
        headline: Headline,
        label: Option<Label>,
        explanation: Option<Explanation>,
    ) -> Result<LabeledExample> {
        if label.is_none() && explanation.is_some() {
            return Err(Error::Invalid("explanation given for an unlabeled example".into()));
        }
        Ok(LabeledExample {
            id: id.into(),
            article,
            headline,
            label,
            explanation,
            origin: Origin::Human,
        })
    }

    pub fn with_origin(mut self, origin: Origin) -> LabeledExample {
        self.origin = origin;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> LabeledExample {
        self.id = id.into();
        self
    }

    /// Copy of this example with the explanation replaced. Fails on
    /// unlabeled examples.
    pub fn with_explanation(&self, explanation: Explanation) -> Result<LabeledExample> {
        if self.label.is_none() {
            return Err(Error::Invalid(format!(
                "cannot attach an explanation to unlabeled example {}",
                self.id
            )));
        }
        let mut out = self.clone();
        out.explanation = Some(explanation);
        Ok(out)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn article(&self) -> &Article {
        &self.article
    }

    pub fn headline(&self) -> &Headline {
        &self.headline
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn explanation(&self) -> Option<&Explanation> {
        self.explanation.as_ref()
    }

    /// The explanation, or the empty one when absent.
    pub fn explanation_or_empty(&self) -> Explanation {
        self.explanation.clone().unwrap_or_default()
    }

    pub fn has_explanation(&self) -> bool {
        self.explanation.as_ref().is_some_and(|e| !e.is_empty())
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }
}

/// Which inference path produced a prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Reasoning classifier, then hinted classifier, averaged.
    #[default]
    Full,
    /// Reasoning classifier alone.
    NoHinted,
    /// Classify-only reasoning classifier; no explanation is produced.
    NoExplanation,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NoHinted => "no_hinted",
            Mode::NoExplanation => "no_explanation",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(Mode::Full),
            "no_hinted" | "nohc" => Ok(Mode::NoHinted),
            "no_explanation" | "noex" => Ok(Mode::NoExplanation),
            other => Err(Error::Invalid(format!("unknown mode {other:?}"))),
        }
    }
}

/// Final verdict for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub hallucination_prob: f64,
    pub label: Label,
    pub explanation: Explanation,
    pub reasoning_prob: Option<f64>,
    pub hinted_prob: Option<f64>,
    pub mode: Mode,
    /// Set when the example fell back to a degraded path.
    pub warning: Option<String>,
}

impl Prediction {
    /// Builds a prediction, deriving the label from `threshold` (ties go to
    /// `Contradict`).
    pub fn new(
        hallucination_prob: f64,
        threshold: f64,
        explanation: Explanation,
        reasoning_prob: Option<f64>,
        hinted_prob: Option<f64>,
        mode: Mode,
    ) -> Result<Prediction> {
        check_probability("hallucination_prob", hallucination_prob)?;
        check_probability("threshold", threshold)?;
        for (name, p) in [("reasoning_prob", reasoning_prob), ("hinted_prob", hinted_prob)] {
            if let Some(p) = p {
                check_probability(name, p)?;
            }
        }
        if mode == Mode::Full && (reasoning_prob.is_none() || hinted_prob.is_none()) {
            return Err(Error::Invalid("full-mode prediction needs both stage scores".into()));
        }
        Ok(Prediction {
            hallucination_prob,
            label: decide(hallucination_prob, threshold),
            explanation,
            reasoning_prob,
            hinted_prob,
            mode,
            warning: None,
        })
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Prediction {
        self.warning = Some(warning.into());
        self
    }
}

/// `Contradict` iff `score >= threshold`.
pub fn decide(score: f64, threshold: f64) -> Label {
    Label::from_hallucinated(score >= threshold)
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} = {p} is outside [0, 1]")))
    }
}
