//! Protocol conformance checks for backends.
//!
//! Any backend that passes [`check_backend`] against a fixture is
//! interchangeable with [`MockBackend`](super::MockBackend) built from the
//! same fixture. [`check_http`] adds the transport-level checks (health
//! endpoint, 400 on malformed bodies) for servers.

use std::collections::HashSet;
use std::fmt;
use std::time::{Duration, Instant};

use super::mock::{Fallback, MockBackendSpec, ScriptedError};
use super::{Backend, ClientOptions, GenerationMode, GenerationRequest, HttpBackend};
use crate::domain::{Article, Headline, Label, LabeledExample};
use crate::error::BackendError;
use crate::template::{parse_component_output, render_explainer_input, render_reasoning_input};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ConformanceReport {
    pub checks: Vec<CheckOutcome>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn record(&mut self, name: impl Into<String>, outcome: Result<(), String>) {
        let (passed, detail) = match outcome {
            Ok(()) => (true, String::new()),
            Err(d) => (false, d),
        };
        self.checks.push(CheckOutcome {
            name: name.into(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            if c.detail.is_empty() {
                writeln!(f, "{status}  {}", c.name)?;
            } else {
                writeln!(f, "{status}  {}  ({})", c.name, c.detail)?;
            }
        }
        Ok(())
    }
}

fn same_kind(expected: ScriptedError, got: &BackendError) -> bool {
    matches!(
        (expected, got),
        (ScriptedError::Unavailable, BackendError::Unavailable(_))
            | (ScriptedError::InputTooLong, BackendError::InputTooLong(_))
            | (ScriptedError::BadRequest, BackendError::BadRequest(_))
            | (ScriptedError::MalformedResponse, BackendError::MalformedResponse(_))
    )
}

fn probe_example() -> LabeledExample {
    LabeledExample::unlabeled(
        "probe",
        Article::new(
            "City council approves new library budget",
            "The city council voted on Tuesday to approve a budget for a new public library downtown.",
        )
        .expect("static article"),
        Headline::new("Council approves library budget").expect("static headline"),
    )
}

/// Runs the backend-level checks for `fixture`.
pub fn check_backend(backend: &dyn Backend, fixture: &MockBackendSpec) -> ConformanceReport {
    let mut report = ConformanceReport::default();

    for (i, entry) in fixture.responses.iter().enumerate() {
        if let Some(expected) = &entry.response {
            let mode = entry.mode.unwrap_or(if expected.class_logprobs.is_some() {
                GenerationMode::ClassifyAndExplain
            } else {
                GenerationMode::Explain
            });
            let request = GenerationRequest::new(entry.input.clone(), mode)
                .num_outputs(expected.outputs.len().max(1))
                .seed(Some(0));
            let outcome = match backend.generate(&request) {
                Ok(got) if &got == expected => Ok(()),
                Ok(got) => Err(format!("expected {expected:?}, got {got:?}")),
                Err(e) => Err(e.to_string()),
            };
            report.record(format!("scripted response #{i}"), outcome);
        }
        if let Some(kind) = entry.error {
            let request = GenerationRequest::new(entry.input.clone(), entry.mode.unwrap_or(GenerationMode::Classify));
            let outcome = match backend.generate(&request) {
                Err(e) if same_kind(kind, &e) => Ok(()),
                Err(e) => Err(format!("expected {kind:?}, got {e}")),
                Ok(_) => Err(format!("expected {kind:?}, got a result")),
            };
            report.record(format!("scripted error #{i}"), outcome);
        }
    }

    if fixture.fallback == Fallback::Heuristic {
        let example = probe_example();
        let reasoning = render_reasoning_input(&example, &fixture.template);
        for mode in [GenerationMode::Classify, GenerationMode::ClassifyAndExplain] {
            let request = GenerationRequest::new(reasoning.clone(), mode).seed(Some(0));
            let outcome = backend.generate(&request).map_err(|e| e.to_string()).and_then(|r| {
                r.validate_for(&request).map_err(|e| e.to_string())?;
                if r.outputs.len() != 1 {
                    return Err(format!("{} outputs for num_outputs=1", r.outputs.len()));
                }
                if mode == GenerationMode::ClassifyAndExplain {
                    parse_component_output(&r.outputs[0].text, &fixture.template).map_err(|e| e.to_string())?;
                }
                Ok(())
            });
            report.record(format!("{mode:?} round trip"), outcome);
        }

        let explain = GenerationRequest::new(render_explainer_input(&example, Label::Entail, &fixture.template), GenerationMode::Explain)
            .num_outputs(3)
            .seed(Some(42));
        let first = backend.generate(&explain);
        let outcome = match &first {
            Ok(r) => {
                let distinct: HashSet<_> = r.outputs.iter().map(|o| o.text.as_str()).collect();
                r.validate_for(&explain).map_err(|e| e.to_string()).and_then(|_| {
                    if r.outputs.len() == 3 && distinct.len() == 3 {
                        Ok(())
                    } else {
                        Err(format!("{} outputs, {} distinct", r.outputs.len(), distinct.len()))
                    }
                })
            }
            Err(e) => Err(e.to_string()),
        };
        report.record("Explain round trip with 3 distinct outputs", outcome);

        let second = backend.generate(&explain);
        let outcome = match (&first, &second) {
            (Ok(a), Ok(b)) if a == b => Ok(()),
            (Ok(_), Ok(_)) => Err("same seed produced different results".to_string()),
            _ => Err("request failed".to_string()),
        };
        report.record("determinism under seed", outcome);
    }

    if let Some(limit) = fixture.max_input_chars {
        let request = GenerationRequest::new("x".repeat(limit + 1), GenerationMode::Classify);
        let outcome = match backend.generate(&request) {
            Err(BackendError::InputTooLong(_)) => Ok(()),
            Err(e) => Err(format!("expected InputTooLong, got {e}")),
            Ok(_) => Err("over-long input was accepted".to_string()),
        };
        report.record("over-long input refused", outcome);
    }

    report
}

/// Transport checks plus [`check_backend`] through an [`HttpBackend`].
pub fn check_http(base_url: &str, fixture: &MockBackendSpec) -> ConformanceReport {
    let base_url = base_url.trim_end_matches('/');
    let mut report = ConformanceReport::default();
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(5)).build();

    let started = Instant::now();
    let health = agent
        .get(&format!("{base_url}/v1/health"))
        .call()
        .map_err(|e| e.to_string())
        .and_then(|r| r.into_string().map_err(|e| e.to_string()))
        .and_then(|body| {
            let v: serde_json::Value = serde_json::from_str(&body).map_err(|e| e.to_string())?;
            if v == serde_json::json!({"status": "ok"}) {
                Ok(())
            } else {
                Err(format!("unexpected body {body}"))
            }
        })
        .and_then(|_| {
            let elapsed = started.elapsed();
            if elapsed <= Duration::from_secs(1) {
                Ok(())
            } else {
                Err(format!("took {elapsed:?}"))
            }
        });
    report.record("health endpoint within 1 s", health);

    let status_of = |body: &str| -> Result<u16, String> {
        match agent
            .post(&format!("{base_url}/v1/generate"))
            .set("Content-Type", "application/json")
            .send_string(body)
        {
            Ok(r) => Ok(r.status()),
            Err(ureq::Error::Status(code, _)) => Ok(code),
            Err(e) => Err(e.to_string()),
        }
    };
    for (name, body) in [
        ("malformed JSON gets 400", "{not json"),
        ("missing fields get 400", r#"{"input":"x"}"#),
        (
            "num_outputs=0 gets 400",
            r#"{"input":"x","mode":"explain","num_outputs":0,"seed":null,"max_output_tokens":8}"#,
        ),
    ] {
        let outcome = status_of(body).and_then(|s| if s == 400 { Ok(()) } else { Err(format!("status {s}")) });
        report.record(name, outcome);
    }

    let client = HttpBackend::with_options(
        base_url,
        ClientOptions {
            max_attempts: 1,
            ..ClientOptions::default()
        },
    );
    report.checks.extend(check_backend(&client, fixture).checks);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ClassLogprobs, GeneratedText, GenerationResult, MockBackend, ScriptedEntry};

    fn fixture() -> MockBackendSpec {
        let mut spec = MockBackendSpec {
            max_input_chars: Some(4000),
            ..MockBackendSpec::default()
        };
        spec.responses.push(ScriptedEntry::response(
            "headline entailment: headline: H article: A",
            GenerationResult {
                outputs: vec![GeneratedText {
                    text: "Contradict because X".into(),
                    logprob: -0.5,
                }],
                class_logprobs: Some(ClassLogprobs::from_probabilities(0.1, 0.9)),
            },
        ));
        spec.responses.push(ScriptedEntry::error("boom", ScriptedError::Unavailable));
        spec
    }

    #[test]
    fn native_mock_conforms() {
        let spec = fixture();
        let mock = MockBackend::from_spec(spec.clone()).unwrap();
        let report = check_backend(&mock, &spec);
        assert!(report.passed(), "{report}");
        assert!(report.checks.len() >= 6);
    }

    #[test]
    fn mismatching_backend_fails() {
        let spec = fixture();
        let other = MockBackend::heuristic();
        let report = check_backend(&other, &spec);
        assert!(!report.passed());
        assert!(report.failures().any(|c| c.name.starts_with("scripted")));
    }
}
