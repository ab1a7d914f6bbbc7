//! HTTP and WebSocket front end.
//!
//! * `GET /session` upgrades to a WebSocket speaking the envelope protocol
//!   in [`riverecho_core::gateway`]. The `end` payload carries the
//!   `session_id` the server assigned, for use with `/ratings`.
//! * `GET /metrics` returns recent per-session metrics and their means.
//! * `POST /ratings` accepts one rating record; `GET /ratings` returns the
//!   per-dimension means in radar order.
//! * Anything else is served from `static_dir` when configured.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use parking_lot::Mutex;
use riverecho_core::backends::PcmAudio;
use riverecho_core::gateway::{
    encode_event, parse_client_message, radar_series, ClientMessage, Dimension, MetricsReport,
    MetricsStore, RatingRecord, RatingStore, WireEvent,
};
use riverecho_core::pipeline::{run_session, SessionInput};
use riverecho_core::{KnowledgeGraph, StageEvent};
use serde::Serialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::config::ServerConfig;

/// Upper bound on buffered WAV bytes per request.
pub const MAX_AUDIO_BYTES: usize = 16 << 20;

pub struct AppState {
    pub config: ServerConfig,
    pub graph: Arc<KnowledgeGraph>,
    pub metrics: Mutex<MetricsStore>,
    pub ratings: Mutex<RatingStore>,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new(config: ServerConfig, graph: KnowledgeGraph) -> Arc<Self> {
        Arc::new(AppState {
            metrics: Mutex::new(MetricsStore::new(config.metrics_retention)),
            ratings: Mutex::new(RatingStore::default()),
            graph: Arc::new(graph),
            config,
            next_session: AtomicU64::new(1),
        })
    }

    fn session_id(&self) -> String {
        format!("s{:06}", self.next_session.fetch_add(1, Ordering::Relaxed))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/session", get(session))
        .route("/metrics", get(metrics))
        .route("/ratings", get(ratings).post(submit_rating));
    if let Some(dir) = &state.config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    if !state.config.cors_allow.is_empty() {
        let origins: Vec<HeaderValue> = state
            .config
            .cors_allow
            .iter()
            .filter_map(|o| o.parse().ok())
            .collect();
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods(tower_http::cors::Any)
                .allow_headers(tower_http::cors::Any),
        );
    }
    app.with_state(state)
}

/// Binds the configured address and serves until the process exits.
pub async fn serve(state: Arc<AppState>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(&state.config.listen).await?;
    serve_on(listener, state).await
}

pub async fn serve_on(listener: tokio::net::TcpListener, state: Arc<AppState>) -> anyhow::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn metrics(State(state): State<Arc<AppState>>) -> Json<MetricsReport> {
    Json(state.metrics.lock().report())
}

#[derive(Serialize)]
struct RatingsReport {
    records: usize,
    means: Vec<(Dimension, f64)>,
}

async fn ratings(State(state): State<Arc<AppState>>) -> Json<RatingsReport> {
    let store = state.ratings.lock();
    Json(RatingsReport {
        records: store.records().len(),
        means: radar_series(&store.aggregate()),
    })
}

async fn submit_rating(State(state): State<Arc<AppState>>, Json(record): Json<RatingRecord>) -> impl IntoResponse {
    match state.ratings.lock().submit(record) {
        Ok(()) => (StatusCode::CREATED, Json(json!({"ok": true}))),
        Err(e) => (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({"error": e.to_string()}))),
    }
}

async fn session(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| handle_socket(socket, state))
}

fn protocol_error(message: impl Into<String>) -> WireEvent {
    WireEvent {
        kind: "error".into(),
        seq: 0,
        payload: json!({"stage": "gateway", "message": message.into()}),
    }
}

async fn send(socket: &mut WebSocket, event: &WireEvent) -> bool {
    socket.send(Message::Text(event.to_json().into())).await.is_ok()
}

async fn reject(mut socket: WebSocket, message: impl Into<String>) {
    let _ = send(&mut socket, &protocol_error(message)).await;
    let _ = socket.send(Message::Close(None)).await;
}

async fn handle_socket(mut socket: WebSocket, state: Arc<AppState>) {
    if !send(&mut socket, &WireEvent::hello()).await {
        return;
    }
    let mut wav = Vec::new();
    while let Some(msg) = socket.recv().await {
        let Ok(msg) = msg else { return };
        let input = match msg {
            Message::Text(text) => match parse_client_message(text.as_str()) {
                Ok(ClientMessage::Query(q)) if wav.is_empty() => SessionInput::Text(q),
                Ok(ClientMessage::Query(_)) => return reject(socket, "query_text while audio is pending").await,
                Ok(ClientMessage::AudioEnd) => match PcmAudio::from_wav_bytes(&std::mem::take(&mut wav)) {
                    Ok(audio) => SessionInput::Audio(audio),
                    Err(e) => return reject(socket, format!("bad audio: {e}")).await,
                },
                Err(e) => return reject(socket, e.to_string()).await,
            },
            Message::Binary(bytes) => {
                if wav.len() + bytes.len() > MAX_AUDIO_BYTES {
                    return reject(socket, "audio exceeds size limit").await;
                }
                wav.extend_from_slice(&bytes);
                continue;
            }
            Message::Close(_) => return,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        if !respond(&mut socket, &state, input).await {
            return;
        }
    }
}

/// Streams one response. Returns false once the client is gone.
async fn respond(socket: &mut WebSocket, state: &AppState, input: SessionInput) -> bool {
    let id = state.session_id();
    let cfg = &state.config;
    let mut handle = run_session(input, cfg.backends.instantiate(), state.graph.clone(), cfg.pipeline.clone());
    let mut seq = 0;
    while let Some(timed) = handle.events.recv().await {
        let mut wire = encode_event(&timed.event, seq);
        match &timed.event {
            StageEvent::Metrics(m) => state.metrics.lock().record(id.clone(), *m),
            StageEvent::End => wire.payload = json!({"session_id": id}),
            _ => {}
        }
        seq += 1;
        if !send(socket, &wire).await {
            tracing::debug!(session = %id, "client went away mid-response");
            return false;
        }
    }
    true
}
