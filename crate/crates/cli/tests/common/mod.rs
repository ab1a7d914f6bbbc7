#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use riverecho_cli::server::{serve_on, AppState};
use riverecho_cli::ServerConfig;
use riverecho_core::backends::StubPacing;
use riverecho_core::gateway::{decode_event, WireEvent};
use riverecho_core::pipeline::TimedEvent;
use riverecho_core::synthetic;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub fn unpaced_config() -> ServerConfig {
    let mut cfg = ServerConfig::default();
    cfg.backends.pacing = StubPacing::unpaced();
    cfg
}

/// Serves `config` over the bundled sample graph on an ephemeral port.
pub async fn start(config: ServerConfig) -> (String, Arc<AppState>) {
    let state = AppState::new(config, synthetic::fixture_graph().await);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    tokio::spawn(serve_on(listener, state.clone()));
    (addr, state)
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

pub const RECV_TIMEOUT: Duration = Duration::from_secs(60);

impl Client {
    /// Connects and consumes the handshake.
    pub async fn connect(addr: &str) -> Client {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session")).await.unwrap();
        let mut c = Client { ws };
        let hello = c.next().await.expect("hello");
        assert_eq!(hello, WireEvent::hello());
        c
    }

    pub async fn send_text(&mut self, text: &str) {
        self.ws.send(Message::Text(text.into())).await.unwrap();
    }

    pub async fn send_query(&mut self, q: &str) {
        self.send_text(&serde_json::json!({ "query_text": q }).to_string()).await;
    }

    pub async fn send_audio(&mut self, wav: &[u8], piece: usize) {
        for part in wav.chunks(piece) {
            self.ws.send(Message::Binary(part.to_vec().into())).await.unwrap();
        }
        self.send_text(r#"{"audio_end":true}"#).await;
    }

    /// Next envelope, or None once the server has closed.
    pub async fn next(&mut self) -> Option<WireEvent> {
        loop {
            let msg = tokio::time::timeout(RECV_TIMEOUT, self.ws.next()).await.expect("server went quiet")?;
            match msg.ok()? {
                Message::Text(t) => return Some(WireEvent::from_json(t.as_str()).unwrap()),
                Message::Close(_) => return None,
                _ => continue,
            }
        }
    }

    /// Events up to and including `end`.
    pub async fn response(&mut self) -> Vec<WireEvent> {
        let mut out = Vec::new();
        while let Some(e) = self.next().await {
            let end = e.kind == "end";
            out.push(e);
            if end {
                return out;
            }
        }
        panic!("connection closed before end: {out:?}");
    }
}

/// Decoded pipeline events; the timestamps are synthetic (arrival order).
pub fn decode_all(wire: &[WireEvent]) -> Vec<TimedEvent> {
    wire.iter()
        .enumerate()
        .map(|(i, w)| TimedEvent {
            at: Duration::from_micros(i as u64),
            event: decode_event(w).unwrap_or_else(|e| panic!("{e}: {w:?}")),
        })
        .collect()
}

pub fn answer_text(wire: &[WireEvent]) -> String {
    wire.iter()
        .filter(|w| w.kind == "token")
        .map(|w| w.payload["text"].as_str().unwrap())
        .collect()
}
