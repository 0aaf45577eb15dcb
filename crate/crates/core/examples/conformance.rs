//! Runs the backend conformance suite against a protocol server.
//!
//! ```text
//! cargo run --example conformance -- http://127.0.0.1:8080
//! ```
//!
//! Without a URL the suite runs against the in-process mock.

use std::path::Path;

use hhd::backend::conformance::{check_backend, check_http};
use hhd::{MockBackend, MockBackendSpec};

fn main() -> hhd::Result<()> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/mock_fixture.json");
    let spec = MockBackendSpec::load(&fixture)?;
    let report = match std::env::args().nth(1) {
        Some(url) => check_http(&url, &spec),
        None => check_backend(&MockBackend::from_spec(spec.clone())?, &spec),
    };
    for c in &report.checks {
        let status = if c.passed { "ok  " } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} {}", c.name);
        } else {
            println!("{status} {}: {}", c.name, c.detail);
        }
    }
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
