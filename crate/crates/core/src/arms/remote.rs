//! Adapter for answer models hosted elsewhere.
//!
//! Wire contract: `POST endpoint` with `{"utterance": string}`, answered by
//! `{"answer_text": string, "score": number}`. Timeouts, non-2xx statuses and
//! schema violations all surface as [`ArmError::Unavailable`].

use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{AnswerProvider, ArmAnswer, ArmError, ArmQuery};
use crate::model::ArmKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub utterance: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteResponse {
    pub answer_text: String,
    pub score: f64,
}

fn agent(timeout_ms: u64) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .http_status_as_error(false)
        .build()
        .into()
}

fn call(agent: &Agent, utterance: &str, endpoint: &str) -> Result<ArmAnswer, ArmError> {
    let unavailable = |why: String| ArmError::Unavailable(format!("{endpoint}: {why}"));
    let mut resp = agent
        .post(endpoint)
        .send_json(RemoteRequest {
            utterance: utterance.to_string(),
        })
        .map_err(|e| unavailable(e.to_string()))?;
    if !resp.status().is_success() {
        return Err(unavailable(format!("status {}", resp.status())));
    }
    let body: RemoteResponse = resp
        .body_mut()
        .read_json()
        .map_err(|e| unavailable(format!("bad response: {e}")))?;
    if body.answer_text.trim().is_empty() || !body.score.is_finite() {
        return Err(unavailable("empty answer or non-finite score".into()));
    }
    Ok(ArmAnswer {
        answer_text: body.answer_text,
        source_doc_ids: Vec::new(),
        score: body.score,
    })
}

/// One-off call with its own timeout.
pub fn remote_arm_answer(utterance: &str, endpoint: &str, timeout_ms: u64) -> Result<ArmAnswer, ArmError> {
    call(&agent(timeout_ms), utterance, endpoint)
}

pub struct RemoteArm {
    endpoint: String,
    agent: Agent,
}

impl RemoteArm {
    pub fn new(endpoint: impl Into<String>, timeout_ms: u64) -> Self {
        Self {
            endpoint: endpoint.into(),
            agent: agent(timeout_ms),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl AnswerProvider for RemoteArm {
    fn kind(&self) -> ArmKind {
        ArmKind::Remote
    }

    fn answer(&self, query: &ArmQuery) -> Result<ArmAnswer, ArmError> {
        call(&self.agent, &query.utterance, &self.endpoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serves `count` requests with a canned status and body, after `delay_ms`.
    fn stub(status: u16, body: &'static str, delay_ms: u64, count: usize) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            for stream in listener.incoming().take(count) {
                let mut stream = stream.unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut req = vec![0u8; len];
                reader.read_exact(&mut req).unwrap();
                thread::sleep(Duration::from_millis(delay_ms));
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        format!("http://{addr}/answer")
    }

    #[test]
    fn healthy_stub_passes_through() {
        let url = stub(200, r#"{"answer_text":"ok","score":0.7}"#, 0, 1);
        let a = remote_arm_answer("hello", &url, 2000).unwrap();
        assert_eq!(a.answer_text, "ok");
        assert_eq!(a.score, 0.7);
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        // Bind then drop to get a port nobody listens on.
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let r = remote_arm_answer("hello", &format!("http://127.0.0.1:{port}/x"), 500);
        assert!(matches!(r, Err(ArmError::Unavailable(_))));
    }

    #[test]
    fn missing_answer_text_is_unavailable() {
        let url = stub(200, r#"{"score":0.7}"#, 0, 1);
        assert!(matches!(
            remote_arm_answer("hello", &url, 2000),
            Err(ArmError::Unavailable(_))
        ));
    }

    #[test]
    fn non_2xx_is_unavailable() {
        let url = stub(500, r#"{"answer_text":"ok","score":1}"#, 0, 1);
        assert!(matches!(
            remote_arm_answer("hello", &url, 2000),
            Err(ArmError::Unavailable(_))
        ));
    }

    #[test]
    fn slow_stub_times_out() {
        let url = stub(200, r#"{"answer_text":"ok","score":1}"#, 800, 1);
        let arm = RemoteArm::new(url, 100);
        assert!(matches!(
            arm.answer(&ArmQuery::new("hello")),
            Err(ArmError::Unavailable(_))
        ));
    }
}
