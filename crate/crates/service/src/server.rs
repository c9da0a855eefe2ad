//! HTTP and websocket routes.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinHandle;

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::protocol::ActionMessage;
use crate::registry::{CreateSession, Registry, SessionEntry, SessionInfo};

pub type AppState = Arc<Registry>;

pub fn router(registry: AppState) -> Router {
    let mut app = Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(describe_session).delete(close_session))
        .route("/sessions/{id}/step", post(step_session))
        .route("/sessions/{id}/stream", get(stream_session))
        .route("/assets", get(list_assets))
        .route("/assets/{id}/manifest.json", get(avatar_manifest));
    if let Some(dir) = &registry.config().viewer_dir {
        app = app.nest_service("/viewer", tower_http::services::ServeDir::new(dir));
    }
    app.with_state(registry)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create_session(
    State(reg): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionInfo>), ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let info = blocking(move || reg.create(&req).map(|e| e.info())).await?;
    log::info!("session {} created for avatar {}", info.id, info.avatar);
    Ok((StatusCode::CREATED, Json(info)))
}

async fn describe_session(State(reg): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ServiceError> {
    Ok(Json(reg.get(&id)?.info()))
}

async fn close_session(State(reg): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ServiceError> {
    reg.close(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn step_session(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ActionMessage>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let entry = reg.get(&id)?;
    let Json(msg) = body.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let frame = blocking(move || entry.step(msg.a)).await?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], Bytes::from(frame.encode())).into_response())
}

async fn stream_session(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ServiceError> {
    let entry = reg.get(&id)?;
    Ok(ws.on_upgrade(move |socket| run_stream(socket, entry, reg)))
}

/// Reader offers actions to the coalescer; a writer task steps the latest one and sends frames.
async fn run_stream(socket: WebSocket, entry: Arc<SessionEntry>, reg: AppState) {
    let (mut sink, mut inbound) = socket.split();
    let (stop_tx, mut stop_rx) = watch::channel(false);
    let (notice_tx, mut notice_rx) = mpsc::unbounded_channel::<String>();
    let writer_entry = entry.clone();
    let writer = tokio::spawn(async move {
        let entry = writer_entry;
        loop {
            while let Some(action) = entry.coalescer.take() {
                let e = entry.clone();
                let msg = match blocking(move || e.step(action)).await {
                    Ok(frame) => Message::Binary(frame.encode().into()),
                    Err(err) => Message::Text(err.body().to_string().into()),
                };
                if sink.send(msg).await.is_err() {
                    return;
                }
            }
            if !reg.is_live(entry.id()) {
                let _ = sink.send(Message::Close(None)).await;
                return;
            }
            tokio::select! {
                _ = entry.coalescer.wait() => {}
                Some(text) = notice_rx.recv() => {
                    if sink.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                _ = stop_rx.changed() => return,
                _ = tokio::time::sleep(Duration::from_secs(1)) => {}
            }
        }
    });
    while let Some(Ok(msg)) = inbound.next().await {
        match msg {
            Message::Text(text) => match serde_json::from_str::<ActionMessage>(&text) {
                Ok(m) => {
                    entry.touch();
                    entry.coalescer.offer(m.a);
                }
                Err(e) => {
                    let err = ServiceError::BadRequest(format!("control message {:?}: {e}", text.as_str()));
                    let _ = notice_tx.send(err.body().to_string());
                }
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = stop_tx.send(true);
    let _ = writer.await;
    entry.coalescer.clear();
    log::debug!("stream for session {} closed", entry.id());
}

async fn list_assets(State(reg): State<AppState>) -> Json<serde_json::Value> {
    let avatars: Vec<_> = reg
        .avatar_ids()
        .iter()
        .filter_map(|id| reg.avatar(id))
        .map(|a| {
            serde_json::json!({
                "id": a.id(),
                "resolution": a.manifest.resolution,
                "upscale_factor": a.manifest.upscale_factor,
                "has_basis": a.basis.is_some(),
                "manifest": format!("/assets/{}/manifest.json", a.id()),
            })
        })
        .collect();
    Json(serde_json::json!({ "avatars": avatars }))
}

async fn avatar_manifest(State(reg): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let a = reg.avatar(&id).ok_or_else(|| ServiceError::UnknownAvatar(id.clone()))?;
    Ok(Json(a.manifest.clone()).into_response())
}

/// Periodically retires idle sessions.
pub fn spawn_expiry(registry: AppState, timeout: Duration, period: Duration) -> JoinHandle<()> {
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            registry.expire_idle(timeout);
        }
    })
}

/// Loads avatars and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let addr: SocketAddr = format!("{}:{}", config.bind, config.port)
        .parse()
        .map_err(|e| ServiceError::Config(format!("bind address: {e}")))?;
    let timeout = Duration::from_secs(config.idle_timeout_secs);
    let registry = Arc::new(tokio::task::spawn_blocking(move || Registry::from_config(config)).await.map_err(|e| ServiceError::Internal(e.to_string()))??);
    if registry.avatar_ids().is_empty() {
        log::warn!("no avatars registered");
    }
    spawn_expiry(registry.clone(), timeout, (timeout / 4).clamp(Duration::from_millis(100), Duration::from_secs(30)));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| ServiceError::Config(format!("bind {addr}: {e}")))?;
    log::info!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
    axum::serve(listener, router(registry)).await.map_err(|e| ServiceError::Internal(e.to_string()))
}
