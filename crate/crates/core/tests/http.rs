use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use hhd::backend::conformance::{check_backend, check_http};
use hhd::backend::{ClientOptions, GenerationMode};
use hhd::{
    Backend, BackendError, GenerationRequest, GenerationResult, HttpBackend, MockBackend, MockBackendSpec, MockServer,
};

fn fixture() -> MockBackendSpec {
    MockBackendSpec::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/mock_fixture.json")).unwrap()
}

fn serve(backend: Arc<dyn Backend>) -> MockServer {
    MockServer::start("127.0.0.1:0", backend, 4).unwrap()
}

fn quick_client(url: &str, attempts: u32) -> HttpBackend {
    HttpBackend::with_options(
        url,
        ClientOptions {
            max_attempts: attempts,
            initial_backoff: Duration::from_millis(1),
            ..ClientOptions::default()
        },
    )
}

#[test]
fn fixture_conforms_in_process_and_over_http() {
    let spec = fixture();
    let mock = MockBackend::from_spec(spec.clone()).unwrap();
    let report = check_backend(&mock, &spec);
    assert!(report.passed(), "{report}");

    let server = serve(Arc::new(mock));
    let report = check_http(&server.url(), &spec);
    assert!(report.passed(), "{report}");
    assert!(report.checks.iter().any(|c| c.name.contains("health")));
}

#[test]
fn http_responses_equal_in_process_responses() {
    let spec = fixture();
    let mock = MockBackend::from_spec(spec.clone()).unwrap();
    let server = serve(Arc::new(mock.clone()));
    let client = quick_client(&server.url(), 1);
    client.health().unwrap();

    let mut requests: Vec<GenerationRequest> = spec
        .responses
        .iter()
        .filter(|e| e.response.is_some())
        .map(|e| GenerationRequest::new(e.input.clone(), e.mode.unwrap()).num_outputs(e.response.as_ref().unwrap().outputs.len()))
        .collect();
    let probe = "headline entailment: headline: Council approves budget article: The council approved the budget.";
    for mode in [GenerationMode::Classify, GenerationMode::ClassifyAndExplain] {
        requests.push(GenerationRequest::new(probe, mode).seed(Some(3)));
    }
    requests.push(GenerationRequest::new(format!("{probe} Entail because"), GenerationMode::Explain).num_outputs(4).seed(Some(9)));

    for request in &requests {
        let local = mock.generate(request).unwrap();
        let remote = client.generate(request).unwrap();
        assert_eq!(serde_json::to_string(&local).unwrap(), serde_json::to_string(&remote).unwrap());
    }
}

#[test]
fn errors_map_to_statuses_and_back() {
    let spec = fixture();
    let server = serve(Arc::new(MockBackend::from_spec(spec.clone()).unwrap()));
    let client = quick_client(&server.url(), 1);

    let scripted = spec.responses.iter().find(|e| e.error.is_some()).unwrap();
    let err = client
        .generate(&GenerationRequest::new(scripted.input.clone(), GenerationMode::Classify))
        .unwrap_err();
    assert!(matches!(err, BackendError::Unavailable(_)), "{err:?}");

    let err = client
        .generate(&GenerationRequest::new("x".repeat(20_001), GenerationMode::Classify))
        .unwrap_err();
    assert!(matches!(err, BackendError::InputTooLong(_)), "{err:?}");

    let err = client
        .generate(&GenerationRequest::new("not a template", GenerationMode::Classify))
        .unwrap_err();
    assert!(matches!(err, BackendError::BadRequest(_)), "{err:?}");

    let agent = ureq::agent();
    let status = |r: Result<ureq::Response, ureq::Error>| match r {
        Ok(r) => r.status(),
        Err(ureq::Error::Status(code, _)) => code,
        Err(e) => panic!("{e}"),
    };
    assert_eq!(status(agent.get(&format!("{}/v1/generate", server.url())).call()), 405);
    assert_eq!(status(agent.get(&format!("{}/nope", server.url())).call()), 404);
}

/// Fails with `Unavailable` for the first `failures` calls.
struct Flaky {
    inner: MockBackend,
    failures: usize,
    calls: AtomicUsize,
}

impl Backend for Flaky {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) < self.failures {
            return Err(BackendError::Unavailable("warming up".into()));
        }
        self.inner.generate(request)
    }
}

#[test]
fn client_retries_unavailable_only() {
    let request = GenerationRequest::new(
        "headline entailment: headline: H article: some article text",
        GenerationMode::Classify,
    );

    let flaky = Arc::new(Flaky { inner: MockBackend::heuristic(), failures: 2, calls: AtomicUsize::new(0) });
    let server = serve(flaky.clone());
    assert!(quick_client(&server.url(), 3).generate(&request).is_ok());
    assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);

    let flaky = Arc::new(Flaky { inner: MockBackend::heuristic(), failures: 5, calls: AtomicUsize::new(0) });
    let server = serve(flaky.clone());
    assert!(matches!(quick_client(&server.url(), 3).generate(&request), Err(BackendError::Unavailable(_))));
    assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);

    let refused = Arc::new(Flaky { inner: MockBackend::heuristic(), failures: 0, calls: AtomicUsize::new(0) });
    let server = serve(refused.clone());
    let bad = GenerationRequest::new("no template here", GenerationMode::Classify);
    assert!(matches!(quick_client(&server.url(), 3).generate(&bad), Err(BackendError::BadRequest(_))));
    assert_eq!(refused.calls.load(Ordering::SeqCst), 1);
}

/// Records the peak number of concurrent calls.
struct Gauge {
    current: AtomicUsize,
    peak: AtomicUsize,
}

impl Backend for Gauge {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(Duration::from_millis(20));
        self.current.fetch_sub(1, Ordering::SeqCst);
        MockBackend::heuristic().generate(request)
    }
}

#[test]
fn client_bounds_requests_in_flight() {
    let gauge = Arc::new(Gauge { current: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
    let server = MockServer::start("127.0.0.1:0", gauge.clone(), 8).unwrap();
    let client = HttpBackend::with_options(server.url(), ClientOptions { max_in_flight: 2, ..ClientOptions::default() });
    let request = GenerationRequest::new("headline entailment: headline: H article: A", GenerationMode::Classify);
    std::thread::scope(|s| {
        for _ in 0..8 {
            s.spawn(|| client.generate(&request).unwrap());
        }
    });
    assert!(gauge.peak.load(Ordering::SeqCst) <= 2);
    assert!(gauge.peak.load(Ordering::SeqCst) >= 1);
}
