//! Axum routes. Handlers only authenticate, decode and hand off to [`Desk`].

use std::sync::Arc;

use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::desk::{ClarifyRequest, Desk, FeedbackRequest, SuggestRequest};
use crate::ServiceError;

#[derive(Clone)]
pub struct AppState {
    pub desk: Arc<Desk>,
    token: Arc<str>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Config(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let ok = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == &*state.token);
    if !ok {
        return ServiceError::Unauthorized.into_response();
    }
    next.run(req).await
}

/// Runs blocking desk work (remote arms use blocking HTTP) off the reactor.
async fn blocking<T, F>(desk: Arc<Desk>, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Desk) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&desk))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn suggest(State(state): State<AppState>, Json(req): Json<SuggestRequest>) -> Result<Response, ServiceError> {
    let resp = blocking(state.desk, move |d| d.suggest(&req)).await?;
    Ok(Json(resp).into_response())
}

async fn feedback(State(state): State<AppState>, Json(req): Json<FeedbackRequest>) -> Result<Response, ServiceError> {
    let resp = blocking(state.desk, move |d| d.feedback(&req)).await?;
    Ok(Json(resp).into_response())
}

async fn clarify(State(state): State<AppState>, Json(req): Json<ClarifyRequest>) -> Result<Response, ServiceError> {
    let resp = blocking(state.desk, move |d| d.clarify_answer(&req)).await?;
    Ok(Json(resp).into_response())
}

async fn stats(State(state): State<AppState>) -> Response {
    Json(state.desk.stats()).into_response()
}

async fn arms(State(state): State<AppState>) -> Response {
    Json(state.desk.arms()).into_response()
}

pub fn router(desk: Arc<Desk>) -> Router {
    let state = AppState {
        token: desk.config().token.clone().into(),
        desk,
    };
    Router::new()
        .route("/v1/suggest", post(suggest))
        .route("/v1/feedback", post(feedback))
        .route("/v1/clarify/answer", post(clarify))
        .route("/v1/stats", get(stats))
        .route("/v1/arms", get(arms))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then finalizes pending records and
/// writes the policy snapshot.
pub async fn serve(
    desk: Arc<Desk>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let app = router(desk.clone());
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    let d = desk.clone();
    tokio::task::spawn_blocking(move || d.shutdown())
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}
