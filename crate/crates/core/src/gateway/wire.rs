//! JSON envelope protocol between the session endpoint and its clients.
//!
//! Server to client, one text message per event:
//!
//! | type         | payload                                                     |
//! |--------------|-------------------------------------------------------------|
//! | `hello`      | `{"protocol":"v1"}`, sent once on connect                   |
//! | `transcript` | `{"text"}`                                                  |
//! | `context`    | retrieval context: keywords, matches, ranked chunks         |
//! | `token`      | `{"text","seq"}`                                            |
//! | `sentence`   | `{"text","seq"}`                                            |
//! | `audio`      | `{"pcm_b64","sample_rate","seq","sentence_seq"}`, PCM is s16le |
//! | `frame`      | `{"frame_index","presentation_time","sentence_seq"}`        |
//! | `metrics`    | four per-module metrics, `null` where undefined             |
//! | `error`      | `{"stage","message"}`                                       |
//! | `end`        | `{}`; the server adds `{"session_id"}`                      |
//!
//! The envelope `seq` counts events within one response from 0.
//!
//! Client to server: `{"query_text": "..."}`, or binary messages whose
//! concatenation is a WAV file followed by `{"audio_end": true}`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backends::Stage;
use crate::pipeline::StageEvent;

pub const PROTOCOL_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    #[serde(rename = "type")]
    pub kind: String,
    pub seq: u64,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown event type {0:?}")]
    UnknownType(String),
}

impl WireEvent {
    pub fn hello() -> Self {
        WireEvent {
            kind: "hello".into(),
            seq: 0,
            payload: json!({ "protocol": PROTOCOL_VERSION }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire events always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, WireError> {
        serde_json::from_str(text).map_err(|e| WireError::Malformed(e.to_string()))
    }
}

pub fn pcm_to_b64(samples: &[i16]) -> String {
    let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn pcm_from_b64(text: &str) -> Result<Vec<i16>, WireError> {
    let bytes = STANDARD.decode(text).map_err(|e| WireError::Malformed(e.to_string()))?;
    if bytes.len() % 2 != 0 {
        return Err(WireError::Malformed("odd PCM byte count".into()));
    }
    Ok(bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect())
}

pub fn encode_event(event: &StageEvent, seq: u64) -> WireEvent {
    let payload = match event {
        StageEvent::TranscriptFinal { text } => json!({ "text": text }),
        StageEvent::ContextReady(ctx) => serde_json::to_value(ctx).expect("context serializes"),
        StageEvent::Token { text, seq } | StageEvent::Sentence { text, seq } => {
            json!({ "text": text, "seq": seq })
        }
        StageEvent::AudioBlock {
            samples,
            sample_rate,
            seq,
            sentence_seq,
        } => json!({
            "pcm_b64": pcm_to_b64(samples),
            "sample_rate": sample_rate,
            "seq": seq,
            "sentence_seq": sentence_seq,
        }),
        StageEvent::VideoFrame {
            frame_index,
            presentation_time,
            sentence_seq,
        } => json!({
            "frame_index": frame_index,
            "presentation_time": presentation_time,
            "sentence_seq": sentence_seq,
        }),
        StageEvent::Metrics(m) => serde_json::to_value(m).expect("metrics serialize"),
        StageEvent::End => json!({}),
        StageEvent::Error { stage, message } => json!({ "stage": stage, "message": message }),
    };
    WireEvent {
        kind: event.tag().to_owned(),
        seq,
        payload,
    }
}

fn field<T: serde::de::DeserializeOwned>(payload: &Value, name: &str) -> Result<T, WireError> {
    let v = payload
        .get(name)
        .ok_or_else(|| WireError::Malformed(format!("payload lacks {name:?}")))?;
    T::deserialize(v).map_err(|e| WireError::Malformed(format!("{name}: {e}")))
}

fn whole<T: serde::de::DeserializeOwned>(payload: &Value) -> Result<T, WireError> {
    T::deserialize(payload).map_err(|e| WireError::Malformed(e.to_string()))
}

pub fn decode_event(w: &WireEvent) -> Result<StageEvent, WireError> {
    let p = &w.payload;
    Ok(match w.kind.as_str() {
        "transcript" => StageEvent::TranscriptFinal { text: field(p, "text")? },
        "context" => StageEvent::ContextReady(whole(p)?),
        "token" => StageEvent::Token {
            text: field(p, "text")?,
            seq: field(p, "seq")?,
        },
        "sentence" => StageEvent::Sentence {
            text: field(p, "text")?,
            seq: field(p, "seq")?,
        },
        "audio" => StageEvent::AudioBlock {
            samples: pcm_from_b64(&field::<String>(p, "pcm_b64")?)?,
            sample_rate: field(p, "sample_rate")?,
            seq: field(p, "seq")?,
            sentence_seq: field(p, "sentence_seq")?,
        },
        "frame" => StageEvent::VideoFrame {
            frame_index: field(p, "frame_index")?,
            presentation_time: field(p, "presentation_time")?,
            sentence_seq: field(p, "sentence_seq")?,
        },
        "metrics" => StageEvent::Metrics(whole(p)?),
        "end" => StageEvent::End,
        "error" => StageEvent::Error {
            stage: field::<Stage>(p, "stage")?,
            message: field(p, "message")?,
        },
        other => return Err(WireError::UnknownType(other.to_owned())),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientMessage {
    Query(String),
    AudioEnd,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClient {
    query_text: Option<String>,
    audio_end: Option<bool>,
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage, WireError> {
    let raw: RawClient = serde_json::from_str(text).map_err(|e| WireError::Malformed(e.to_string()))?;
    match (raw.query_text, raw.audio_end) {
        (Some(q), None) if !q.trim().is_empty() => Ok(ClientMessage::Query(q)),
        (Some(_), None) => Err(WireError::Malformed("query_text is empty".into())),
        (None, Some(true)) => Ok(ClientMessage::AudioEnd),
        _ => Err(WireError::Malformed(
            "expected {\"query_text\": ...} or {\"audio_end\": true}".into(),
        )),
    }
}
