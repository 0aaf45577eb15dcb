//! Serves the mock fixture over HTTP, scores through the HTTP client and
//! checks the bytes match in-process scoring.

use std::path::Path;
use std::sync::Arc;

use hhd::backend::conformance::check_http;
use hhd::{
    read_examples, score_batch, write_predictions, DatasetFormat, HttpBackend, MockBackend, MockBackendSpec,
    MockServer, PipelineConfig, ReadOptions,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let spec = MockBackendSpec::load(data.join("mock_fixture.json"))?;
    let server = MockServer::start("127.0.0.1:0", Arc::new(MockBackend::from_spec(spec.clone())?), 4)?;
    println!("mock server on {}", server.url());

    let report = check_http(&server.url(), &spec);
    for c in &report.checks {
        let status = if c.passed { "ok  " } else { "FAIL" };
        if c.detail.is_empty() {
            println!("  {status} {}", c.name);
        } else {
            println!("  {status} {}: {}", c.name, c.detail);
        }
    }

    let client = HttpBackend::new(server.url());
    client.health()?;
    let pairs = read_examples(data.join("pairs.jsonl"), DatasetFormat::HhdJsonl, &ReadOptions::default())?.examples;
    let ids: Vec<String> = pairs.iter().map(|e| e.id().to_string()).collect();
    let cfg = PipelineConfig::default();

    let dir = std::env::temp_dir().join(format!("hhd-http-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    for (name, backend) in [("http", &client as &dyn hhd::Backend), ("local", &MockBackend::from_spec(spec.clone())?)] {
        let preds: Vec<_> = score_batch(&pairs, backend, &cfg, 4).into_iter().collect::<hhd::Result<_>>()?;
        let path = dir.join(format!("{name}.jsonl"));
        write_predictions(&preds, &ids, &path)?;
        outputs.push(std::fs::read(&path)?);
    }
    println!("identical output through HTTP and in-process: {}", outputs[0] == outputs[1]);
    std::fs::remove_dir_all(&dir).ok();
    server.shutdown();
    Ok(())
}
