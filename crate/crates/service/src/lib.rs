//! HTTP front end for the answer router.
//!
//! `POST /v1/suggest` picks an arm for a customer question, `POST /v1/feedback`
//! applies the agent's 1-5 star rating, `POST /v1/clarify/answer` walks the
//! clarifying-question flow, and `GET /v1/stats` and `GET /v1/arms` report
//! state. Every route requires `Authorization: Bearer <token>`.

pub mod config;
pub mod desk;
pub mod http;

pub use config::ServiceConfig;
pub use desk::Desk;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}
