//! Handcrafted lexical features, a native logistic-regression baseline over
//! them, and CSV export for external trainers.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{article_text, ArticleLayout, Label, LabeledExample};
use crate::error::{Error, Result};
use crate::text::{multiset_overlap, normalized_tokens};

/// Bumped whenever a feature is added, removed or redefined.
pub const FEATURE_VERSION: u32 = 1;

/// Column order of [`FeatureVector::values`], the CSV export and
/// [`LinearModel::weights`].
pub const FEATURE_NAMES: [&str; 8] = [
    "headline_len_tokens",
    "article_len_tokens",
    "headline_len_chars",
    "article_len_chars",
    "overlap_word_count",
    "overlap_word_ratio",
    "jaro_winkler_tokens",
    "jaro_winkler_chars_title",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub headline_len_tokens: usize,
    pub article_len_tokens: usize,
    pub headline_len_chars: usize,
    pub article_len_chars: usize,
    pub overlap_word_count: usize,
    pub overlap_word_ratio: f64,
    /// Word-level Jaro-Winkler between headline and article tokens.
    pub jaro_winkler_tokens: f64,
    /// Character-level Jaro-Winkler between the lowercased headline and title.
    pub jaro_winkler_chars_title: f64,
}

impl FeatureVector {
    pub fn values(&self) -> [f64; 8] {
        [
            self.headline_len_tokens as f64,
            self.article_len_tokens as f64,
            self.headline_len_chars as f64,
            self.article_len_chars as f64,
            self.overlap_word_count as f64,
            self.overlap_word_ratio,
            self.jaro_winkler_tokens,
            self.jaro_winkler_chars_title,
        ]
    }

    fn from_values(v: &[f64]) -> Result<FeatureVector> {
        if v.len() != FEATURE_NAMES.len() {
            return Err(Error::LengthMismatch {
                left: v.len(),
                right: FEATURE_NAMES.len(),
            });
        }
        let count = |x: f64, name: &str| -> Result<usize> {
            if x >= 0.0 && x.fract() == 0.0 && x.is_finite() {
                Ok(x as usize)
            } else {
                Err(Error::Invalid(format!("{name} must be a non-negative integer, got {x}")))
            }
        };
        let unit = |x: f64, name: &str| -> Result<f64> {
            if (0.0..=1.0).contains(&x) {
                Ok(x)
            } else {
                Err(Error::Invalid(format!("{name} must be in [0, 1], got {x}")))
            }
        };
        Ok(FeatureVector {
            headline_len_tokens: count(v[0], FEATURE_NAMES[0])?,
            article_len_tokens: count(v[1], FEATURE_NAMES[1])?,
            headline_len_chars: count(v[2], FEATURE_NAMES[2])?,
            article_len_chars: count(v[3], FEATURE_NAMES[3])?,
            overlap_word_count: count(v[4], FEATURE_NAMES[4])?,
            overlap_word_ratio: unit(v[5], FEATURE_NAMES[5])?,
            jaro_winkler_tokens: unit(v[6], FEATURE_NAMES[6])?,
            jaro_winkler_chars_title: unit(v[7], FEATURE_NAMES[7])?,
        })
    }
}

pub fn extract_features(example: &LabeledExample) -> FeatureVector {
    let headline = example.headline().as_str();
    let article = article_text(example.article(), ArticleLayout::Concatenate);
    let h_tokens = normalized_tokens(headline);
    let a_tokens = normalized_tokens(&article);
    let overlap = multiset_overlap(&h_tokens, &a_tokens);
    let ratio = if h_tokens.is_empty() {
        0.0
    } else {
        overlap as f64 / h_tokens.len() as f64
    };
    let h_chars: Vec<char> = headline.chars().flat_map(char::to_lowercase).collect();
    let t_chars: Vec<char> = example.article().title().chars().flat_map(char::to_lowercase).collect();
    FeatureVector {
        headline_len_tokens: h_tokens.len(),
        article_len_tokens: a_tokens.len(),
        headline_len_chars: headline.chars().count(),
        article_len_chars: article.chars().count(),
        overlap_word_count: overlap,
        overlap_word_ratio: ratio,
        jaro_winkler_tokens: jaro_winkler(&h_tokens, &a_tokens),
        jaro_winkler_chars_title: jaro_winkler(&h_chars, &t_chars),
    }
}

/// Jaro similarity over arbitrary symbol sequences.
pub fn jaro<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let window = (a.len().max(b.len()) / 2).saturating_sub(1);
    let mut b_used = vec![false; b.len()];
    let mut a_matched = Vec::with_capacity(a.len().min(b.len()));
    for (i, x) in a.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(b.len());
        for j in lo..hi {
            if !b_used[j] && b[j] == *x {
                b_used[j] = true;
                a_matched.push(x);
                break;
            }
        }
    }
    let m = a_matched.len();
    if m == 0 {
        return 0.0;
    }
    let out_of_order = b
        .iter()
        .zip(&b_used)
        .filter(|(_, used)| **used)
        .zip(&a_matched)
        .filter(|((y, _), x)| *y != **x)
        .count();
    let m = m as f64;
    let t = out_of_order as f64 / 2.0;
    (m / a.len() as f64 + m / b.len() as f64 + (m - t) / m) / 3.0
}

/// Jaro-Winkler with prefix scale 0.1 and prefix length capped at 4.
pub fn jaro_winkler<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let j = jaro(a, b);
    let prefix = a.iter().zip(b).take(4).take_while(|(x, y)| x == y).count();
    j + prefix as f64 * 0.1 * (1.0 - j)
}

/// Header: `id`, the [`FEATURE_NAMES`], `label` (0 entail, 1 contradict,
/// empty when unknown).
pub fn write_features_csv<W: Write>(rows: &[(String, FeatureVector, Option<Label>)], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec!["id"];
    header.extend(FEATURE_NAMES);
    header.push("label");
    w.write_record(&header).map_err(csv_error)?;
    for (id, f, label) in rows {
        let mut record = vec![id.clone()];
        record.extend(f.values().iter().map(|v| v.to_string()));
        record.push(label.map(|l| l.as_flag().to_string()).unwrap_or_default());
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Invalid(e.to_string()))
}

pub fn read_features_csv<R: Read>(reader: R) -> Result<Vec<(String, FeatureVector, Option<Label>)>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_error)?.clone();
    let expected: Vec<&str> = std::iter::once("id").chain(FEATURE_NAMES).chain(["label"]).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Invalid(format!("unexpected feature CSV header {:?}", header)));
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse("<features>", line, e.to_string()))?;
        let values = (1..=FEATURE_NAMES.len())
            .map(|k| record[k].parse::<f64>().map_err(|e| Error::parse("<features>", line, format!("{}: {e}", expected[k]))))
            .collect::<Result<Vec<_>>>()?;
        let features = FeatureVector::from_values(&values).map_err(|e| Error::parse("<features>", line, e.to_string()))?;
        let label = match record[FEATURE_NAMES.len() + 1].trim() {
            "" => None,
            flag => Some(
                flag.parse::<u8>()
                    .map_err(|e| Error::parse("<features>", line, e.to_string()))
                    .and_then(|f| Label::from_flag(f).map_err(|e| Error::parse("<features>", line, e.to_string())))?,
            ),
        };
        rows.push((record[0].to_string(), features, label));
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

/// Logistic regression over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_version: u32,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Per-feature mean and scale used to standardize inputs.
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl LinearModel {
    fn standardize(&self, f: &FeatureVector) -> Vec<f64> {
        f.values()
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    /// Probability of Contradict.
    pub fn predict_proba(&self, f: &FeatureVector) -> f64 {
        let z: f64 = self.bias + self.standardize(f).iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>();
        sigmoid(z)
    }

    pub fn predict(&self, f: &FeatureVector) -> Label {
        crate::domain::decide(self.predict_proba(f), 0.5)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        file.write_all(json.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LinearModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: LinearModel = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        let n = FEATURE_NAMES.len();
        if model.weights.len() != n || model.means.len() != n || model.scales.len() != n {
            return Err(Error::Invalid(format!("model dimensionality differs from the {n} features")));
        }
        if model.feature_version != FEATURE_VERSION {
            return Err(Error::Invalid(format!(
                "model was trained on feature version {}, this build extracts version {FEATURE_VERSION}",
                model.feature_version
            )));
        }
        Ok(model)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Full-batch gradient descent on the mean logistic loss.
pub fn train_linear(data: &[(FeatureVector, Label)], epochs: usize, learning_rate: f64, seed: u64) -> Result<LinearModel> {
    for label in Label::ALL {
        if !data.iter().any(|(_, l)| *l == label) {
            return Err(Error::DegenerateData(format!("no {} examples", label.as_str())));
        }
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(format!("learning rate must be positive, got {learning_rate}")));
    }
    let n = data.len() as f64;
    let dim = FEATURE_NAMES.len();
    let rows: Vec<[f64; 8]> = data.iter().map(|(f, _)| f.values()).collect();
    let means: Vec<f64> = (0..dim).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
    let scales: Vec<f64> = (0..dim)
        .map(|k| {
            let var = rows.iter().map(|r| (r[k] - means[k]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..dim).map(|k| (r[k] - means[k]) / scales[k]).collect())
        .collect();
    let ys: Vec<f64> = data.iter().map(|(_, l)| l.as_flag() as f64).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.01..0.01)).collect();
    let mut bias = 0.0;
    for _ in 0..epochs {
        let mut grad_w = vec![0.0; dim];
        let mut grad_b = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let z = bias + x.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
            let err = sigmoid(z) - y;
            grad_b += err;
            for (g, a) in grad_w.iter_mut().zip(x) {
                *g += err * a;
            }
        }
        bias -= learning_rate * grad_b / n;
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= learning_rate * g / n;
        }
    }
    Ok(LinearModel {
        feature_version: FEATURE_VERSION,
        weights,
        bias,
        means,
        scales,
    })
}
