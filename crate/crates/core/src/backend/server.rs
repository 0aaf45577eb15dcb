//! Serves any [`Backend`] over the wire protocol.
//!
//! | route              | success                  | errors                                   |
//! |--------------------|--------------------------|------------------------------------------|
//! | `POST /v1/generate`| 200 + `GenerationResult` | 400 malformed, 413 too long, 503 down    |
//! | `GET /v1/health`   | 200 `{"status":"ok"}`    |                                          |
//!
//! Error bodies are `{"error": "<message>"}`.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Request, Response, Server};

use super::{Backend, GenerationRequest};
use crate::error::{BackendError, Error, Result};

pub struct MockServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts `threads`
    /// worker threads answering requests with `backend`.
    pub fn start(addr: &str, backend: Arc<dyn Backend>, threads: usize) -> Result<MockServer> {
        let server = Server::http(addr).map_err(|e| Error::Invalid(format!("cannot bind {addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Invalid(format!("{addr} is not an IP address")))?;
        let server = Arc::new(server);
        let workers = (0..threads.max(1))
            .map(|_| {
                let server = server.clone();
                let backend = backend.clone();
                std::thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        handle(request, backend.as_ref());
                    }
                })
            })
            .collect();
        Ok(MockServer { server, addr, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server is shut down from another thread or the
    /// process exits.
    pub fn join(mut self) {
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn json_header() -> Header {
    Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header")
}

fn reply(request: Request, status: u16, body: String) {
    let response = Response::from_string(body)
        .with_status_code(status)
        .with_header(json_header());
    if let Err(e) = request.respond(response) {
        log::debug!("client went away before the response was sent: {e}");
    }
}

fn error_body(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

fn status_for(error: &BackendError) -> u16 {
    match error {
        BackendError::BadRequest(_) => 400,
        BackendError::InputTooLong(_) => 413,
        BackendError::Unavailable(_) => 503,
        BackendError::MalformedResponse(_) => 500,
    }
}

fn handle(mut request: Request, backend: &dyn Backend) {
    let path = request.url().split('?').next().unwrap_or("").to_string();
    match (request.method(), path.as_str()) {
        (Method::Get, "/v1/health") => reply(request, 200, r#"{"status":"ok"}"#.to_string()),
        (Method::Post, "/v1/generate") => {
            let mut body = String::new();
            if let Err(e) = request.as_reader().read_to_string(&mut body) {
                return reply(request, 400, error_body(&format!("unreadable body: {e}")));
            }
            let parsed: GenerationRequest = match serde_json::from_str(&body) {
                Ok(r) => r,
                Err(e) => return reply(request, 400, error_body(&format!("malformed request: {e}"))),
            };
            match backend.generate(&parsed) {
                Ok(result) => match serde_json::to_string(&result) {
                    Ok(json) => reply(request, 200, json),
                    Err(e) => reply(request, 500, error_body(&e.to_string())),
                },
                Err(e) => reply(request, status_for(&e), error_body(&e.to_string())),
            }
        }
        (_, "/v1/health" | "/v1/generate") => reply(request, 405, error_body("method not allowed")),
        _ => reply(request, 404, error_body("not found")),
    }
}
