//! HTTP + WebSocket front end. Sessions live in memory; each has its own lock
//! and a broadcast channel fanning step results out to stream clients.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, Mutex, RwLock};

use crate::session::{HumanInput, Session, SessionConfig, SubmitError};

const STREAM_CAPACITY: usize = 64;

struct Entry {
    session: Mutex<Session>,
    stream: broadcast::Sender<String>,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Entry>>>>,
    next_id: Arc<AtomicU64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
}

/// Frames pushed on `/sessions/{id}/stream`.
#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum StreamFrame<'a, T: Serialize> {
    Snapshot { snapshot: &'a T },
    StepResult(&'a T),
}

fn error(status: StatusCode, body: serde_json::Value) -> Response {
    (status, Json(body)).into_response()
}

fn not_found(id: &str) -> Response {
    error(StatusCode::NOT_FOUND, json!({ "error": "unknown_session", "session_id": id }))
}

impl AppState {
    async fn entry(&self, id: &str) -> Option<Arc<Entry>> {
        self.sessions.read().await.get(id).cloned()
    }
}

async fn create(State(app): State<AppState>, body: Option<Json<SessionConfig>>) -> Response {
    let config = body.map(|Json(c)| c).unwrap_or_default();
    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed) + 1);
    match Session::new(id.clone(), config) {
        Ok(session) => {
            let (tx, _) = broadcast::channel(STREAM_CAPACITY);
            app.sessions.write().await.insert(id.clone(), Arc::new(Entry { session: Mutex::new(session), stream: tx }));
            (StatusCode::CREATED, Json(Created { session_id: id })).into_response()
        }
        Err(e) => error(StatusCode::BAD_REQUEST, json!({ "error": "invalid_config", "detail": e.to_string() })),
    }
}

async fn state(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    match app.entry(&id).await {
        Some(e) => Json(e.session.lock().await.snapshot()).into_response(),
        None => not_found(&id),
    }
}

async fn action(State(app): State<AppState>, Path(id): Path<String>, Json(input): Json<HumanInput>) -> Response {
    let Some(entry) = app.entry(&id).await else { return not_found(&id) };
    let mut session = entry.session.lock().await;
    match session.submit(input) {
        Ok(result) => {
            let frame = serde_json::to_string(&StreamFrame::StepResult(&result)).expect("step result serializes");
            // No subscribers is fine.
            let _ = entry.stream.send(frame);
            Json(result).into_response()
        }
        Err(e) => {
            let status = match e {
                SubmitError::IllegalAction { .. } | SubmitError::ChatTooLong { .. } | SubmitError::Empty => {
                    StatusCode::UNPROCESSABLE_ENTITY
                }
                SubmitError::Ended => StatusCode::CONFLICT,
                SubmitError::Reasoner { .. } => StatusCode::BAD_GATEWAY,
            };
            let mut body = serde_json::to_value(&e).expect("error serializes");
            body["detail"] = json!(e.to_string());
            error(status, body)
        }
    }
}

async fn stream(State(app): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    let Some(entry) = app.entry(&id).await else { return not_found(&id) };
    ws.on_upgrade(move |socket| pump(socket, entry))
}

async fn pump(mut socket: WebSocket, entry: Arc<Entry>) {
    // Subscribe before taking the snapshot so no step falls in between.
    let mut rx = entry.stream.subscribe();
    let first = {
        let s = entry.session.lock().await;
        serde_json::to_string(&StreamFrame::Snapshot { snapshot: &s.snapshot() }).expect("snapshot serializes")
    };
    if socket.send(WsMessage::Text(first.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            frame = rx.recv() => match frame {
                Ok(text) => {
                    if socket.send(WsMessage::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/state", get(state))
        .route("/sessions/{id}/action", post(action))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(app)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::default())).await
}
