//! Corpus readers and writers.
//!
//! | format      | fields                                                              |
//! |-------------|---------------------------------------------------------------------|
//! | `hhd`       | JSONL `id, article_title, article_body, headline, label, explanation, origin` |
//! | `esnli`     | CSV `pairID, gold_label, Sentence1, Sentence2, Explanation_1..3`    |
//! | `anli`      | JSONL `uid, premise, hypothesis, label (e/n/c), reason or reasons`  |
//! | `true`      | CSV `grounding, generated_text, label` (1 = grounded)               |
//!
//! Every reader returns examples satisfying the domain invariants or fails on
//! the first malformed record with its line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::augment::{adapt_nli_example, NeutralPolicy, NliLabel};
use crate::domain::{Article, Explanation, Headline, Label, LabeledExample, Mode, Origin, Prediction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    HhdJsonl,
    EsnliCsv,
    AnliJsonl,
    TrueCsv,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<DatasetFormat> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "hhd" | "hhd_jsonl" => Ok(DatasetFormat::HhdJsonl),
            "esnli" | "esnli_csv" => Ok(DatasetFormat::EsnliCsv),
            "anli" | "anli_jsonl" => Ok(DatasetFormat::AnliJsonl),
            "true" | "true_csv" => Ok(DatasetFormat::TrueCsv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
    Unsplit,
}

impl Split {
    /// Guesses the split from a file name such as `train.jsonl` or
    /// `qags_dev.csv`.
    pub fn from_path(path: &Path) -> Split {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_default();
        let words: Vec<&str> = stem.split(|c: char| !c.is_ascii_alphanumeric()).collect();
        let has = |names: &[&str]| words.iter().any(|w| names.contains(w));
        if has(&["train", "training"]) {
            Split::Train
        } else if has(&["dev", "val", "valid", "validation"]) {
            Split::Validation
        } else if has(&["test"]) {
            Split::Test
        } else {
            Split::Unsplit
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub split: Split,
    pub count: usize,
    /// Examples labeled Contradict.
    pub positive_count: usize,
    pub with_explanation_count: usize,
}

impl DatasetManifest {
    pub fn from_examples(name: impl Into<String>, split: Split, examples: &[LabeledExample]) -> DatasetManifest {
        DatasetManifest {
            name: name.into(),
            split,
            count: examples.len(),
            positive_count: examples.iter().filter(|e| e.label() == Some(Label::Contradict)).count(),
            with_explanation_count: examples.iter().filter(|e| e.has_explanation()).count(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    pub neutral: NeutralPolicy,
    /// TRUE dataset name for the polarity lookup; inferred from the file name
    /// when absent.
    pub true_dataset: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub examples: Vec<LabeledExample>,
    pub manifest: DatasetManifest,
    /// Records without a two-class mapping (neutral or unlabeled NLI items)
    /// that were left out.
    pub skipped: usize,
}

pub fn read_examples(path: impl AsRef<Path>, format: DatasetFormat, options: &ReadOptions) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let (examples, skipped) = match format {
        DatasetFormat::HhdJsonl => (read_hhd(path)?, 0),
        DatasetFormat::EsnliCsv => read_esnli(path, options.neutral)?,
        DatasetFormat::AnliJsonl => read_anli(path, options.neutral)?,
        DatasetFormat::TrueCsv => {
            let name = match &options.true_dataset {
                Some(n) => n.clone(),
                None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            };
            let records = read_true_records(path, &name)?;
            let examples = records
                .iter()
                .enumerate()
                .map(|(i, r)| r.to_example(format!("{}-{}", r.dataset_name, i)))
                .collect::<Result<Vec<_>>>()?;
            (examples, 0)
        }
    };
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = DatasetManifest::from_examples(name, Split::from_path(path), &examples);
    Ok(LoadedDataset {
        examples,
        manifest,
        skipped,
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with their 1-based line numbers.
fn jsonl_values(path: &Path) -> Result<Vec<(usize, Value)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if !value.is_object() {
            return Err(Error::parse(path, i + 1, "expected a JSON object"));
        }
        out.push((i + 1, value));
    }
    Ok(out)
}

fn str_field<'a>(v: &'a Value, key: &str) -> std::result::Result<Option<&'a str>, String> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(format!("field {key:?} must be a string, got {other}")),
    }
}

fn required<'a>(v: &'a Value, key: &str) -> std::result::Result<&'a str, String> {
    str_field(v, key)?.ok_or_else(|| format!("missing field {key:?}"))
}

fn id_field(v: &Value, key: &str) -> std::result::Result<Option<String>, String> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(other) => Err(format!("field {key:?} must be a string or number, got {other}")),
    }
}

fn parse_label(v: &Value) -> std::result::Result<Option<Label>, String> {
    match v {
        Value::Null => Ok(None),
        Value::Number(n) => match n.as_u64() {
            Some(f @ (0 | 1)) => Ok(Some(Label::from_flag(f as u8).expect("0 or 1"))),
            _ => Err(format!("label {n} is not 0 or 1")),
        },
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "" => Ok(None),
            "entail" | "entailed" | "0" => Ok(Some(Label::Entail)),
            "contradict" | "hallucinated" | "1" => Ok(Some(Label::Contradict)),
            other => Err(format!("unknown label {other:?}")),
        },
        other => Err(format!("label must be a string or 0/1, got {other}")),
    }
}

fn hhd_example(v: &Value) -> std::result::Result<LabeledExample, String> {
    let id = id_field(v, "id")?.ok_or("missing field \"id\"")?;
    let title = str_field(v, "article_title")?.unwrap_or("");
    let body = str_field(v, "article_body")?.unwrap_or("");
    let article = Article::new(title, body).map_err(|e| e.to_string())?;
    let headline = Headline::new(required(v, "headline")?).map_err(|e| e.to_string())?;
    let label = parse_label(v.get("label").unwrap_or(&Value::Null))?;
    let explanation = str_field(v, "explanation")?.map(Explanation::new).filter(|e| !e.is_empty());
    let origin = match v.get("origin") {
        None | Some(Value::Null) => Origin::Human,
        Some(o) => serde_json::from_value(o.clone()).map_err(|e| format!("origin: {e}"))?,
    };
    Ok(LabeledExample::new(id, article, headline, label, explanation)
        .map_err(|e| e.to_string())?
        .with_origin(origin))
}

fn read_hhd(path: &Path) -> Result<Vec<LabeledExample>> {
    jsonl_values(path)?
        .into_iter()
        .map(|(line, v)| hhd_example(&v).map_err(|m| Error::parse(path, line, m)))
        .collect()
}

/// Outcome of mapping one NLI record.
fn nli_examples(
    id: &str,
    premise: &str,
    hypothesis: &str,
    label: &str,
    explanations: &[String],
    neutral: NeutralPolicy,
    split_explanations: bool,
) -> std::result::Result<Vec<LabeledExample>, String> {
    let label: NliLabel = label.parse().map_err(|e: Error| e.to_string())?;
    if label == NliLabel::Neutral && neutral == NeutralPolicy::Reject {
        return Ok(Vec::new());
    }
    let non_empty: Vec<String> = explanations.iter().filter(|e| !e.trim().is_empty()).cloned().collect();
    let adapt = |id: String, expl: &[String]| {
        adapt_nli_example(id, premise, hypothesis, label, expl, neutral).map_err(|e| e.to_string())
    };
    if split_explanations && non_empty.len() > 1 {
        non_empty
            .iter()
            .enumerate()
            .map(|(i, e)| adapt(format!("{id}#{i}"), std::slice::from_ref(e)))
            .collect()
    } else {
        Ok(vec![adapt(id.to_string(), &non_empty)?])
    }
}

fn read_esnli(path: &Path, neutral: NeutralPolicy) -> Result<(Vec<LabeledExample>, usize)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(open(path)?);
    let headers = reader.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (premise, hypothesis, gold) = match (col("Sentence1"), col("Sentence2"), col("gold_label")) {
        (Some(p), Some(h), Some(g)) => (p, h, g),
        _ => return Err(Error::parse(path, 1, "header needs Sentence1, Sentence2 and gold_label")),
    };
    let pair_id = col("pairID");
    let explanation_cols: Vec<usize> = ["Explanation_1", "Explanation_2", "Explanation_3"]
        .iter()
        .filter_map(|n| col(n))
        .collect();

    let mut examples = Vec::new();
    let mut skipped = 0;
    for (i, record) in reader.records().enumerate() {
        let fallback_line = i + 2;
        let record = record.map_err(|e| Error::parse(path, fallback_line, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
        let get = |k: usize| record.get(k).unwrap_or("");
        let label = get(gold).trim();
        // SNLI marks pairs without annotator consensus with "-".
        if label == "-" || label.is_empty() {
            skipped += 1;
            continue;
        }
        let id = pair_id
            .map(|k| get(k).to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| format!("esnli-{line}"));
        let explanations: Vec<String> = explanation_cols.iter().map(|&k| get(k).to_string()).collect();
        let mapped = nli_examples(&id, get(premise), get(hypothesis), label, &explanations, neutral, false)
            .map_err(|m| Error::parse(path, line, m))?;
        if mapped.is_empty() {
            skipped += 1;
        }
        examples.extend(mapped);
    }
    Ok((examples, skipped))
}

fn read_anli(path: &Path, neutral: NeutralPolicy) -> Result<(Vec<LabeledExample>, usize)> {
    let mut examples = Vec::new();
    let mut skipped = 0;
    for (line, v) in jsonl_values(path)? {
        let mapped = (|| {
            let uid = id_field(&v, "uid")?.unwrap_or_else(|| format!("anli-{line}"));
            let mut explanations = Vec::new();
            if let Some(r) = str_field(&v, "reason")? {
                explanations.push(r.to_string());
            }
            match v.get("reasons") {
                None | Some(Value::Null) => {}
                Some(Value::Array(items)) => {
                    for item in items {
                        match item {
                            Value::String(s) => explanations.push(s.clone()),
                            other => return Err(format!("reasons entries must be strings, got {other}")),
                        }
                    }
                }
                Some(other) => return Err(format!("reasons must be an array, got {other}")),
            }
            nli_examples(
                &uid,
                required(&v, "premise")?,
                required(&v, "hypothesis")?,
                required(&v, "label")?,
                &explanations,
                neutral,
                true,
            )
        })()
        .map_err(|m| Error::parse(path, line, m))?;
        if mapped.is_empty() {
            skipped += 1;
        }
        examples.extend(mapped);
    }
    Ok((examples, skipped))
}

/// One TRUE benchmark dataset with its expected size and label polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrueDatasetInfo {
    pub name: &'static str,
    /// File-name prefixes that identify the dataset.
    pub aliases: &'static [&'static str],
    pub expected_count: usize,
    /// Label value that marks a grounded (consistent) target.
    pub grounded_value: u8,
}

pub const TRUE_DATASETS: [TrueDatasetInfo; 6] = [
    TrueDatasetInfo {
        name: "mnbm",
        aliases: &["mnbm"],
        expected_count: 2500,
        grounded_value: 1,
    },
    TrueDatasetInfo {
        name: "frank",
        aliases: &["frank"],
        expected_count: 671,
        grounded_value: 1,
    },
    TrueDatasetInfo {
        name: "qags",
        aliases: &["qags"],
        expected_count: 239,
        grounded_value: 1,
    },
    TrueDatasetInfo {
        name: "summeval",
        aliases: &["summeval"],
        expected_count: 1600,
        grounded_value: 1,
    },
    TrueDatasetInfo {
        name: "fever",
        aliases: &["fever"],
        expected_count: 18209,
        grounded_value: 1,
    },
    TrueDatasetInfo {
        name: "vitaminc",
        aliases: &["vitaminc", "vitamin_c", "vitc"],
        expected_count: 63054,
        grounded_value: 1,
    },
];

/// Looks a dataset up by name or by a file stem starting with one of its
/// aliases.
pub fn true_dataset(name: &str) -> Option<&'static TrueDatasetInfo> {
    let name = name.trim().to_ascii_lowercase().replace('-', "_");
    TRUE_DATASETS
        .iter()
        .find(|d| d.name == name || d.aliases.iter().any(|a| name.starts_with(a)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrueRecord {
    pub grounding: String,
    pub target: String,
    pub grounded_flag: bool,
    pub dataset_name: String,
}

impl TrueRecord {
    /// Target as headline, grounding as article; ungrounded means Contradict.
    pub fn to_example(&self, id: impl Into<String>) -> Result<LabeledExample> {
        Ok(LabeledExample::labeled(
            id,
            Article::from_body(&self.grounding)?,
            Headline::new(&self.target)?,
            Label::from_hallucinated(!self.grounded_flag),
            None,
        ))
    }
}

pub fn read_true_records(path: impl AsRef<Path>, dataset_name: &str) -> Result<Vec<TrueRecord>> {
    let path = path.as_ref();
    let info = true_dataset(dataset_name);
    let (name, grounded_value) = match info {
        Some(d) => (d.name.to_string(), d.grounded_value),
        None => {
            log::warn!("{dataset_name:?} is not a known TRUE dataset; assuming label 1 means grounded");
            (dataset_name.to_string(), 1)
        }
    };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(open(path)?);
    let headers = reader.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?.clone();
    let col = |n: &str| headers.iter().position(|h| h.trim() == n);
    let (grounding, target, label) = match (col("grounding"), col("generated_text"), col("label")) {
        (Some(g), Some(t), Some(l)) => (g, t, l),
        _ => return Err(Error::parse(path, 1, "header needs grounding, generated_text and label")),
    };
    let mut records = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let fallback_line = i + 2;
        let record = record.map_err(|e| Error::parse(path, fallback_line, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(fallback_line);
        let get = |k: usize| record.get(k).unwrap_or("").trim();
        let flag = match get(label).parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => v as u8,
            _ => return Err(Error::parse(path, line, format!("label {:?} is not 0 or 1", get(label)))),
        };
        if get(grounding).is_empty() || get(target).is_empty() {
            return Err(Error::parse(path, line, "empty grounding or generated_text"));
        }
        records.push(TrueRecord {
            grounding: get(grounding).to_string(),
            target: get(target).to_string(),
            grounded_flag: flag == grounded_value,
            dataset_name: name.clone(),
        });
    }
    Ok(records)
}

#[derive(Serialize)]
struct HhdOut<'a> {
    id: &'a str,
    article_title: &'a str,
    article_body: &'a str,
    headline: &'a str,
    label: Option<Label>,
    explanation: Option<&'a str>,
    origin: Origin,
}

/// Writes examples in the HHD JSONL schema read by [`read_examples`].
pub fn write_examples(examples: &[LabeledExample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for e in examples {
        let record = HhdOut {
            id: e.id(),
            article_title: e.article().title(),
            article_body: e.article().body(),
            headline: e.headline().as_str(),
            label: e.label(),
            explanation: e.explanation().map(|x| x.as_str()),
            origin: e.origin(),
        };
        writeln!(w, "{}", serde_json::to_string(&record).expect("example serializes")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionRecord {
    id: String,
    hallucination_prob: f64,
    label: Label,
    explanation: Explanation,
    reasoning_prob: Option<f64>,
    hinted_prob: Option<f64>,
    mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

/// One JSON object per prediction. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_predictions(predictions: &[Prediction], ids: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if predictions.len() != ids.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: ids.len(),
        });
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for (p, id) in predictions.iter().zip(ids) {
        let record = PredictionRecord {
            id: id.clone(),
            hallucination_prob: p.hallucination_prob,
            label: p.label,
            explanation: p.explanation.clone(),
            reasoning_prob: p.reasoning_prob,
            hinted_prob: p.hinted_prob,
            mode: p.mode,
            warning: p.warning.clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&record).expect("prediction serializes")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<(String, Prediction)>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: PredictionRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        for (name, p) in [
            ("hallucination_prob", Some(r.hallucination_prob)),
            ("reasoning_prob", r.reasoning_prob),
            ("hinted_prob", r.hinted_prob),
        ] {
            if let Some(p) = p {
                crate::domain::check_probability(name, p).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            }
        }
        out.push((
            r.id,
            Prediction {
                hallucination_prob: r.hallucination_prob,
                label: r.label,
                explanation: r.explanation,
                reasoning_prob: r.reasoning_prob,
                hinted_prob: r.hinted_prob,
                mode: r.mode,
                warning: r.warning,
            },
        ));
    }
    Ok(out)
}

/// Reads `(id, hallucination_prob)` from any JSONL file whose objects carry
/// those two fields, such as pipeline or baseline predictions.
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    jsonl_values(path)?
        .into_iter()
        .map(|(line, v)| {
            let id = id_field(&v, "id")
                .and_then(|id| id.ok_or_else(|| "missing field \"id\"".to_string()))
                .map_err(|m| Error::parse(path, line, m))?;
            let p = v
                .get("hallucination_prob")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::parse(path, line, "missing numeric field \"hallucination_prob\""))?;
            crate::domain::check_probability("hallucination_prob", p).map_err(|e| Error::parse(path, line, e.to_string()))?;
            Ok((id, p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn hhd_field_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "test.jsonl",
            "{\"id\":\"1\",\"article_title\":\"T\",\"article_body\":\"B\",\"headline\":\"H\",\"label\":\"contradict\",\"explanation\":\"E\"}\n\n\
             {\"id\":2,\"article_body\":\"B2\",\"headline\":\"H2\",\"label\":0}\n\
             {\"id\":\"3\",\"article_title\":\"T3\",\"headline\":\"H3\"}\n",
        );
        let loaded = read_examples(&path, DatasetFormat::HhdJsonl, &ReadOptions::default()).unwrap();
        let e = &loaded.examples[0];
        assert_eq!(e.id(), "1");
        assert_eq!(e.article().title(), "T");
        assert_eq!(e.label(), Some(Label::Contradict));
        assert_eq!(e.explanation().unwrap().as_str(), "E");
        assert_eq!(loaded.examples[1].id(), "2");
        assert_eq!(loaded.examples[1].label(), Some(Label::Entail));
        assert_eq!(loaded.examples[2].label(), None);
        assert_eq!(
            loaded.manifest,
            DatasetManifest {
                name: "test".into(),
                split: Split::Test,
                count: 3,
                positive_count: 1,
                with_explanation_count: 1,
            }
        );
    }

    #[test]
    fn malformed_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let ok = r#"{"id":"1","article_body":"B","headline":"H","label":"entail"}"#;
        for (bad, needle) in [
            ("{oops", ""),
            (r#"{"id":"2","article_body":"B","headline":"  "}"#, "headline"),
            (r#"{"id":"2","headline":"H"}"#, "article"),
            (r#"{"id":"2","article_body":"B","headline":"H","label":"maybe"}"#, "maybe"),
            (r#"{"id":"2","article_body":"B","headline":"H","explanation":"E"}"#, "unlabeled"),
        ] {
            let path = write(&dir, "x.jsonl", &format!("{ok}\n{bad}\n{ok}\n"));
            match read_examples(&path, DatasetFormat::HhdJsonl, &ReadOptions::default()) {
                Err(Error::Parse { line, message, .. }) => {
                    assert_eq!(line, 2);
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn format_names() {
        assert_eq!("esnli".parse::<DatasetFormat>().unwrap(), DatasetFormat::EsnliCsv);
        assert!(matches!("xml".parse::<DatasetFormat>(), Err(Error::UnknownFormat(_))));
        assert_eq!(Split::from_path(Path::new("data/hhd_train.jsonl")), Split::Train);
        assert_eq!(Split::from_path(Path::new("validation.jsonl")), Split::Validation);
        assert_eq!(Split::from_path(Path::new("contest.jsonl")), Split::Unsplit);
    }

    #[test]
    fn esnli_adapter() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "esnli_dev.csv",
            "pairID,gold_label,Sentence1,Sentence2,Explanation_1\n\
             p1,entailment,\"A man, smiling, pushes a food cart.\",A man pushes a cart,pushing a food cart is pushing a cart\n\
             p2,neutral,P,H,\n\
             p3,contradiction,P3,H3,\"multi\nline\"\n\
             p4,-,P4,H4,\n",
        );
        let loaded = read_examples(&path, DatasetFormat::EsnliCsv, &ReadOptions::default()).unwrap();
        assert_eq!(loaded.examples.len(), 2);
        assert_eq!(loaded.skipped, 2);
        assert_eq!(loaded.examples[0].article().body(), "A man, smiling, pushes a food cart.");
        assert_eq!(loaded.examples[0].headline().as_str(), "A man pushes a cart");
        assert_eq!(loaded.examples[1].label(), Some(Label::Contradict));
        assert_eq!(loaded.examples[1].explanation().unwrap().as_str(), "multi\nline");
        assert_eq!(loaded.manifest.split, Split::Validation);

        let remap = ReadOptions {
            neutral: NeutralPolicy::AsContradict,
            ..ReadOptions::default()
        };
        let loaded = read_examples(&path, DatasetFormat::EsnliCsv, &remap).unwrap();
        assert_eq!(loaded.examples.len(), 3);
        assert_eq!(loaded.skipped, 1);

        let bad = write(&dir, "bad.csv", "pairID,gold_label,Sentence1,Sentence2\np1,entailment,P,H\np2,sideways,P,H\n");
        assert!(matches!(
            read_examples(&bad, DatasetFormat::EsnliCsv, &ReadOptions::default()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn anli_adapter_splits_explanations() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "anli_train.jsonl",
            "{\"uid\":\"u1\",\"premise\":\"P\",\"hypothesis\":\"H\",\"label\":\"c\",\"reasons\":[\"r1\",\"r2\",\"\"]}\n\
             {\"uid\":\"u2\",\"premise\":\"P\",\"hypothesis\":\"H\",\"label\":\"e\",\"reason\":\"only\"}\n\
             {\"uid\":\"u3\",\"premise\":\"P\",\"hypothesis\":\"H\",\"label\":\"n\"}\n\
             {\"uid\":\"u4\",\"premise\":\"P\",\"hypothesis\":\"H\",\"label\":\"e\"}\n",
        );
        let loaded = read_examples(&path, DatasetFormat::AnliJsonl, &ReadOptions::default()).unwrap();
        let ids: Vec<&str> = loaded.examples.iter().map(|e| e.id()).collect();
        assert_eq!(ids, ["u1#0", "u1#1", "u2", "u4"]);
        assert_eq!(loaded.examples[1].explanation().unwrap().as_str(), "r2");
        assert!(!loaded.examples[3].has_explanation());
        assert!(loaded.examples.iter().all(|e| e.origin() == Origin::NliAdapted));
        assert_eq!(loaded.skipped, 1);
        assert_eq!(loaded.manifest.with_explanation_count, 3);
    }

    #[test]
    fn true_polarity() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "summeval_download.csv",
            "grounding,generated_text,label,extra\n\"Doc, with comma\",Grounded summary,1,x\nDoc,Made-up summary,0.0,y\n",
        );
        let loaded = read_examples(&path, DatasetFormat::TrueCsv, &ReadOptions::default()).unwrap();
        assert_eq!(loaded.examples[0].label(), Some(Label::Entail));
        assert_eq!(loaded.examples[1].label(), Some(Label::Contradict));
        assert_eq!(loaded.examples[0].headline().as_str(), "Grounded summary");
        assert_eq!(loaded.examples[0].article().body(), "Doc, with comma");
        assert_eq!(loaded.examples[0].id(), "summeval-0");
        assert_eq!(loaded.manifest.positive_count, 1);

        assert_eq!(true_dataset("vitc_test_download").unwrap().name, "vitaminc");
        assert_eq!(true_dataset("QAGS").unwrap().expected_count, 239);
        assert!(true_dataset("unknown").is_none());
        let total: usize = TRUE_DATASETS.iter().map(|d| d.expected_count).sum();
        assert_eq!(total, 2500 + 671 + 239 + 1600 + 18209 + 63054);
    }

    #[test]
    fn examples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let examples = vec![
            LabeledExample::labeled(
                "a",
                Article::new("T", "B").unwrap(),
                Headline::new("H").unwrap(),
                Label::Contradict,
                Some(Explanation::new("why")),
            )
            .with_origin(Origin::ExplainerGenerated),
            LabeledExample::unlabeled("b", Article::from_body("B").unwrap(), Headline::new("H").unwrap()),
        ];
        write_examples(&examples, &path).unwrap();
        let loaded = read_examples(&path, DatasetFormat::HhdJsonl, &ReadOptions::default()).unwrap();
        assert_eq!(loaded.examples, examples);
    }

    #[test]
    fn empty_predictions_make_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        write_predictions(&[], &[], &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
        assert!(read_predictions(&path).unwrap().is_empty());
        assert!(read_scores(&path).unwrap().is_empty());
        let p = Prediction::new(0.5, 0.5, Explanation::empty(), None, None, Mode::NoExplanation).unwrap();
        assert!(write_predictions(&[p], &[], &path).is_err());
    }

    #[test]
    fn prediction_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let p = Prediction::new(0.8, 0.5, Explanation::new("E1"), Some(0.9), Some(0.7), Mode::Full).unwrap();
        write_predictions(&[p], &["x".into()], &path).unwrap();
        let v: Value = serde_json::from_str(std::fs::read_to_string(&path).unwrap().trim()).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["explanation", "hallucination_prob", "hinted_prob", "id", "label", "mode", "reasoning_prob"]
        );
        assert_eq!(v["label"], "contradict");
        assert_eq!(v["mode"], "full");
        assert_eq!(read_scores(&path).unwrap(), vec![("x".to_string(), 0.8)]);
    }

    proptest! {
        #[test]
        fn predictions_round_trip(
            rows in proptest::collection::vec((0.0f64..=1.0, proptest::option::of(0.0f64..=1.0), "\\PC{0,20}", proptest::option::of("[a-z ]{1,10}")), 0..8)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.jsonl");
            let preds: Vec<Prediction> = rows
                .iter()
                .map(|(p, r, e, w)| {
                    let pred = Prediction::new(*p, 0.5, Explanation::new(e), *r, None, Mode::NoHinted).unwrap();
                    match w {
                        Some(w) => pred.with_warning(w.clone()),
                        None => pred,
                    }
                })
                .collect();
            let ids: Vec<String> = (0..preds.len()).map(|i| format!("id{i}")).collect();
            write_predictions(&preds, &ids, &path).unwrap();
            let back = read_predictions(&path).unwrap();
            let (back_ids, back_preds): (Vec<String>, Vec<Prediction>) = back.into_iter().unzip();
            prop_assert_eq!(back_ids, ids);
            prop_assert_eq!(back_preds, preds);
        }

        #[test]
        fn fuzzed_hhd_files_yield_valid_examples(
            rows in proptest::collection::vec(("\\PC{0,8}", "[ a-z]{0,8}", "[ a-zA-Z]{0,8}", proptest::option::of(prop_oneof![Just("entail"), Just("contradict"), Just("")]), proptest::option::of("[ a-z]{0,6}")), 1..10)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("fuzz.jsonl");
            let mut text = String::new();
            for (i, (title, body, headline, label, expl)) in rows.iter().enumerate() {
                let v = serde_json::json!({
                    "id": i.to_string(), "article_title": title, "article_body": body,
                    "headline": headline, "label": label, "explanation": expl,
                });
                text.push_str(&v.to_string());
                text.push('\n');
            }
            std::fs::write(&path, text).unwrap();
            if let Ok(loaded) = read_examples(&path, DatasetFormat::HhdJsonl, &ReadOptions::default()) {
                prop_assert_eq!(loaded.examples.len(), rows.len());
                for e in &loaded.examples {
                    prop_assert!(!e.headline().as_str().is_empty());
                    prop_assert_eq!(e.headline().as_str(), e.headline().as_str().trim());
                    prop_assert!(!(e.article().title().is_empty() && e.article().body().is_empty()));
                    prop_assert!(e.label().is_some() || e.explanation().is_none());
                    prop_assert!(e.explanation().is_none_or(|x| !x.is_empty()));
                }
            }
        }

        #[test]
        fn manifest_matches_recount(rows in proptest::collection::vec((proptest::option::of(any::<bool>()), any::<bool>()), 0..30)) {
            let examples: Vec<LabeledExample> = rows
                .iter()
                .enumerate()
                .map(|(i, (label, has_expl))| {
                    let label = label.map(Label::from_hallucinated);
                    let expl = if *has_expl && label.is_some() { Some(Explanation::new("e")) } else { None };
                    LabeledExample::new(i.to_string(), Article::from_body("b").unwrap(), Headline::new("h").unwrap(), label, expl).unwrap()
                })
                .collect();
            let m = DatasetManifest::from_examples("x", Split::Unsplit, &examples);
            let mut positives = 0;
            let mut explained = 0;
            for e in &examples {
                if e.label() == Some(Label::Contradict) { positives += 1; }
                if e.explanation().is_some() { explained += 1; }
            }
            prop_assert_eq!(m.count, examples.len());
            prop_assert_eq!(m.positive_count, positives);
            prop_assert_eq!(m.with_explanation_count, explained);
        }
    }
}
