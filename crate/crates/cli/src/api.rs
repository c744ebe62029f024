//! HTTP/JSON API and event stream over a live run.

use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use ecsim_core::canonical;
use ecsim_core::cloud_services::CloudError;
use ecsim_core::protocol::{ExpertRecommendation, Validate, Violation};
use serde::{Deserialize, Serialize};
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use crate::live::Shared;

pub const DEFAULT_TELEMETRY_WINDOW_MS: u64 = 60_000;

type AppState = Arc<Shared>;

pub fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/api/patients", get(patients))
        .route("/api/patients/{id}/telemetry", get(telemetry))
        .route("/api/alerts", get(alerts))
        .route("/api/metrics", get(metrics))
        .route("/api/recommendations", post(recommend))
        .route("/api/stream", get(stream))
        .with_state(shared)
}

fn json<T: Serialize + ?Sized>(status: StatusCode, body: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], canonical::to_string(body)).into_response()
}

#[derive(Serialize)]
struct Verdict<'a> {
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<Violation>,
}

fn rejected(status: StatusCode, reason: impl Into<String>, violations: Vec<Violation>) -> Response {
    json(
        status,
        &Verdict {
            status: "rejected",
            reason: Some(reason.into()),
            violations,
        },
    )
}

async fn patients(State(s): State<AppState>) -> Response {
    json(StatusCode::OK, &s.snapshot.borrow().patients)
}

#[derive(Deserialize)]
struct TelemetryQuery {
    window: Option<u64>,
}

async fn telemetry(State(s): State<AppState>, Path(id): Path<String>, Query(q): Query<TelemetryQuery>) -> Response {
    let snap = s.snapshot.borrow().clone();
    match snap.telemetry_since(&id, q.window.unwrap_or(DEFAULT_TELEMETRY_WINDOW_MS)) {
        Some(records) => json(StatusCode::OK, &records),
        None => rejected(StatusCode::NOT_FOUND, format!("unknown patient {id}"), Vec::new()),
    }
}

async fn alerts(State(s): State<AppState>) -> Response {
    json(StatusCode::OK, &s.snapshot.borrow().alerts)
}

async fn metrics(State(s): State<AppState>) -> Response {
    json(StatusCode::OK, &s.snapshot.borrow().metrics)
}

async fn recommend(State(s): State<AppState>, body: Bytes) -> Response {
    let rec: ExpertRecommendation = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return rejected(StatusCode::BAD_REQUEST, format!("malformed recommendation: {e}"), Vec::new()),
    };
    let violations = rec.violations(&s.vctx);
    if !violations.is_empty() {
        return rejected(StatusCode::BAD_REQUEST, "invalid recommendation", violations);
    }
    if !s.patients.contains(&rec.patient_id) {
        return rejected(StatusCode::NOT_FOUND, format!("unknown patient {}", rec.patient_id), Vec::new());
    }
    if s.snapshot.borrow().finished {
        return rejected(StatusCode::SERVICE_UNAVAILABLE, "run has finished", Vec::new());
    }
    let reply = s.submit(rec);
    match tokio::time::timeout(s.reply_timeout, reply).await {
        Ok(Ok(Ok(()))) => json(
            StatusCode::OK,
            &Verdict {
                status: "applied",
                reason: None,
                violations: Vec::new(),
            },
        ),
        Ok(Ok(Err(e))) => {
            let status = match &e {
                CloudError::StaleAck(_) => StatusCode::CONFLICT,
                CloudError::UnknownPatient(_) => StatusCode::NOT_FOUND,
                CloudError::Invalid(_) => StatusCode::BAD_REQUEST,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            let violations = match e {
                CloudError::Invalid(ref v) => v.clone(),
                _ => Vec::new(),
            };
            rejected(status, e.to_string(), violations)
        }
        // The run ended or stalled before the cloud saw the recommendation.
        Ok(Err(_)) | Err(_) => rejected(StatusCode::GATEWAY_TIMEOUT, "recommendation was not routed in time", Vec::new()),
    }
}

async fn stream(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let events = BroadcastStream::new(s.feed.subscribe()).filter_map(|item| {
        item.ok()
            .map(|e| Ok(Event::default().event(e.name).id(e.seq.to_string()).data(e.data)))
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}
