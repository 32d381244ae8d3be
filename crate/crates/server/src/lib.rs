//! HTTP/JSON service over the `glf` operations.
//!
//! Every operation is a `POST /v1/<op>` taking and returning the JSON types of
//! [`glf::api`]. Numerical work runs on the blocking pool. Failures return an
//! [`ApiError`] body with a status from [`status_for`]. `GET /health` answers
//! `ok`.

use std::net::SocketAddr;

use axum::extract::rejection::JsonRejection;
use axum::extract::DefaultBodyLimit;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use glf::api::{self, ApiError};
use glf::GlfError;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

/// Largest accepted request body.
pub const BODY_LIMIT: usize = 512 << 20;

/// HTTP status for a library error.
pub fn status_for(e: &GlfError) -> StatusCode {
    match e {
        GlfError::Capacity(_) => StatusCode::PAYLOAD_TOO_LARGE,
        GlfError::Unsupported(_) => StatusCode::UNPROCESSABLE_ENTITY,
        e if e.is_validation() => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_response(e: &GlfError) -> Response {
    (status_for(e), Json(ApiError::from(e))).into_response()
}

async fn run<Req, Resp>(
    op: &'static str,
    body: Result<Json<Req>, JsonRejection>,
    f: fn(&Req) -> glf::Result<Resp>,
) -> Response
where
    Req: DeserializeOwned + Send + 'static,
    Resp: Serialize + Send + 'static,
{
    let req = match body {
        Ok(Json(r)) => r,
        Err(rej) => {
            tracing::warn!(op, "rejected body: {}", rej.body_text());
            return error_response(&GlfError::invalid(format!("malformed {op} request: {}", rej.body_text())));
        }
    };
    let started = std::time::Instant::now();
    let out = tokio::task::spawn_blocking(move || f(&req)).await;
    match out {
        Ok(Ok(resp)) => {
            tracing::info!(op, seconds = started.elapsed().as_secs_f64(), "done");
            Json(resp).into_response()
        }
        Ok(Err(e)) => {
            tracing::info!(op, kind = e.kind(), "failed: {e}");
            error_response(&e)
        }
        Err(join) => {
            tracing::error!(op, "worker panicked: {join}");
            error_response(&GlfError::Numerical(format!("{op} worker aborted")))
        }
    }
}

macro_rules! op {
    ($name:literal, $req:ty, $f:path) => {
        post(|body: Result<Json<$req>, JsonRejection>| run($name, body, $f))
    };
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/v1/synth", op!("synth", api::SynthRequest, api::synth))
        .route("/v1/bounds", op!("bounds", api::BoundsRequest, api::bounds))
        .route("/v1/fit", op!("fit", api::FitRequest, api::fit))
        .route("/v1/predict", op!("predict", api::PredictRequest, api::predict))
        .route("/v1/learn", op!("learn", api::LearnRequest, api::learn))
        .route("/v1/audit", op!("audit", api::AuditRequest, api::audit))
        .route("/v1/bench", op!("bench", api::BenchRequest, api::bench))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
}

/// Serve until the listener fails.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

/// Bind an ephemeral loopback port and serve on a background task.
pub async fn spawn_local() -> std::io::Result<(SocketAddr, JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    Ok((addr, tokio::spawn(serve(listener))))
}
