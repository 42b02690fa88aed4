#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use deskbandit_service::desk::{Clock, SystemClock};
use deskbandit_service::{http, Desk, ServiceConfig, ServiceError};
use serde_json::Value;

pub const TOKEN: &str = "test-token";

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo")
}

/// Config over the demo corpus with log and snapshot under `dir`.
pub fn demo_config(dir: &Path, extra: &str) -> ServiceConfig {
    let demo = demo_dir();
    let text = format!(
        r#"
listen = "127.0.0.1:0"
token = "{TOKEN}"
corpus_path = "{corpus}"
faq_path = "{faq}"
log_path = "{log}"
snapshot_path = "{snap}"
seed = 7
{extra}
"#,
        corpus = demo.join("corpus.jsonl").display(),
        faq = demo.join("faq.jsonl").display(),
        log = dir.join("interactions.jsonl").display(),
        snap = dir.join("policy.snapshot").display(),
    );
    let cfg = ServiceConfig::parse(&text, dir, &[]).unwrap();
    cfg.validate().unwrap();
    cfg
}

pub struct TestServer {
    pub base: String,
    pub desk: Arc<Desk>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Result<(), ServiceError>>>,
}

impl TestServer {
    pub fn start(config: ServiceConfig) -> Self {
        Self::start_with_clock(config, Arc::new(SystemClock))
    }

    pub fn start_with_clock(config: ServiceConfig, clock: Arc<dyn Clock>) -> Self {
        let desk = Arc::new(Desk::with_clock(config, clock).unwrap());
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let d = desk.clone();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(4)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                http::serve(d, listener, async {
                    let _ = stop_rx.await;
                })
                .await
            })
        });
        let addr = addr_rx.recv().unwrap();
        Self {
            base: format!("http://{addr}"),
            desk,
            stop: Some(stop_tx),
            thread: Some(thread),
        }
    }

    /// Graceful shutdown: pending records are logged and the snapshot written.
    pub fn stop(mut self) {
        self.shutdown().unwrap();
    }

    fn shutdown(&mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap(),
            None => Ok(()),
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

pub struct Client {
    agent: ureq::Agent,
    base: String,
    token: Option<String>,
}

impl Client {
    pub fn new(base: &str) -> Self {
        Self::with_token(base, Some(TOKEN))
    }

    pub fn with_token(base: &str, token: Option<&str>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            base: base.to_string(),
            token: token.map(str::to_string),
        }
    }

    fn auth(&self) -> Option<String> {
        self.token.as_ref().map(|t| format!("Bearer {t}"))
    }

    pub fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut req = self.agent.post(format!("{}{path}", self.base));
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        let mut resp = req.send_json(&body).unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut req = self.agent.get(format!("{}{path}", self.base));
        if let Some(a) = self.auth() {
            req = req.header("Authorization", a);
        }
        let mut resp = req.call().unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }
}
