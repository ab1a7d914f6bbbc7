//! HTTP clients for remote stage services.
//!
//! Every stage speaks a small JSON protocol of its own:
//!
//! | stage      | request body                                              | response                                  |
//! |------------|-----------------------------------------------------------|-------------------------------------------|
//! | structurer | `{chunk_id, book_title, text, template}`                  | structured record object                  |
//! | asr        | `{sample_rate, audio_b64}`                                | `{text}`                                  |
//! | llm        | `{prompt}`                                                | newline-delimited `{token}` records, optional final `{done: true}` |
//! | tts        | `{text, sample_rate, voice, rate}`                        | `{sample_rate, pcm_b64}`                  |
//! | renderer   | `{sample_rate, audio_b64, first_frame, frame_count}`      | `{frames_driven}`                         |
//!
//! PCM is little-endian signed 16-bit mono, base64 encoded. Requests are
//! retried once (by default) with exponential backoff; a streaming LLM
//! response is never retried once tokens have started to flow.

use std::ops::Range;
use std::time::Duration;

use async_trait::async_trait;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use futures::StreamExt;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    AsrBackend, AudioStream, BackendError, LlmBackend, PcmAudio, RenderBackend, Stage,
    Structurer, TokenStream, TtsBackend, TtsVoice,
};
use crate::corpus::StructureRequest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteEndpoint {
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    5_000
}
fn default_retries() -> u32 {
    1
}
fn default_backoff_ms() -> u64 {
    100
}

impl RemoteEndpoint {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteEndpoint {
            url: url.into(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout_ms = timeout.as_millis() as u64;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            return Err(format!("url must be http(s), got {:?}", self.url));
        }
        if self.timeout_ms == 0 {
            return Err("timeout_ms must be > 0".into());
        }
        Ok(())
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

/// Shared HTTP plumbing: one connection pool per endpoint handle.
#[derive(Clone)]
pub struct RemoteClient {
    stage: Stage,
    endpoint: RemoteEndpoint,
    http: reqwest::Client,
}

impl RemoteClient {
    pub fn new(stage: Stage, endpoint: RemoteEndpoint) -> Self {
        let http = reqwest::Client::builder()
            .connect_timeout(endpoint.timeout())
            .read_timeout(endpoint.timeout())
            .build()
            .expect("http client builds");
        RemoteClient {
            stage,
            endpoint,
            http,
        }
    }

    fn map_err(&self, e: reqwest::Error) -> BackendError {
        if e.is_timeout() {
            BackendError::Timeout(self.stage)
        } else if e.is_decode() || e.is_body() {
            BackendError::MalformedResponse(self.stage, e.to_string())
        } else {
            BackendError::Unreachable(self.stage, e.to_string())
        }
    }

    async fn send(&self, body: &Value, whole_timeout: bool) -> Result<reqwest::Response, BackendError> {
        let mut attempt = 0;
        loop {
            let mut req = self.http.post(&self.endpoint.url).json(body);
            if whole_timeout {
                req = req.timeout(self.endpoint.timeout());
            }
            let result = match req.send().await {
                Ok(resp) if resp.status().is_success() => return Ok(resp),
                Ok(resp) if resp.status().is_server_error() => Err(BackendError::Unreachable(
                    self.stage,
                    format!("server returned {}", resp.status()),
                )),
                Ok(resp) => {
                    return Err(BackendError::MalformedResponse(
                        self.stage,
                        format!("server returned {}", resp.status()),
                    ))
                }
                Err(e) => Err(self.map_err(e)),
            };
            if attempt >= self.endpoint.retries {
                return result;
            }
            let backoff = self.endpoint.backoff_ms.saturating_mul(1 << attempt.min(16));
            tracing::debug!(stage = %self.stage, attempt, backoff, "retrying remote call");
            tokio::time::sleep(Duration::from_millis(backoff)).await;
            attempt += 1;
        }
    }

    /// POST `body` and decode a JSON object response.
    pub async fn post_json(&self, body: &Value) -> Result<Value, BackendError> {
        let resp = self.send(body, true).await?;
        let bytes = resp.bytes().await.map_err(|e| self.map_err(e))?;
        let v: Value = serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::MalformedResponse(self.stage, e.to_string()))?;
        if !v.is_object() {
            return Err(BackendError::MalformedResponse(self.stage, "expected a JSON object".into()));
        }
        Ok(v)
    }

    /// POST `body` and yield one decoded JSON value per response line.
    pub async fn post_ndjson(
        &self,
        body: &Value,
    ) -> Result<futures::stream::BoxStream<'static, Result<Value, BackendError>>, BackendError> {
        let resp = self.send(body, false).await?;
        let stage = self.stage;
        let this = self.clone();
        let bytes = resp.bytes_stream();
        let lines = futures::stream::unfold(
            (bytes, Vec::<u8>::new(), false),
            move |(mut bytes, mut buf, done)| {
                let this = this.clone();
                async move {
                    if done {
                        return None;
                    }
                    loop {
                        if let Some(nl) = buf.iter().position(|&b| b == b'\n') {
                            let line: Vec<u8> = buf.drain(..=nl).collect();
                            let line = &line[..line.len() - 1];
                            if line.iter().all(u8::is_ascii_whitespace) {
                                continue;
                            }
                            let item = serde_json::from_slice::<Value>(line)
                                .map_err(|e| BackendError::MalformedResponse(stage, e.to_string()));
                            return Some((item, (bytes, buf, false)));
                        }
                        match bytes.next().await {
                            Some(Ok(chunk)) => buf.extend_from_slice(&chunk),
                            Some(Err(e)) => return Some((Err(this.map_err(e)), (bytes, buf, true))),
                            None => {
                                if buf.iter().all(u8::is_ascii_whitespace) {
                                    return None;
                                }
                                let rest = std::mem::take(&mut buf);
                                let item = serde_json::from_slice::<Value>(&rest).map_err(|e| {
                                    BackendError::MalformedResponse(stage, e.to_string())
                                });
                                return Some((item, (bytes, buf, true)));
                            }
                        }
                    }
                }
            },
        );
        Ok(lines.boxed())
    }
}

fn field_str(stage: Stage, v: &Value, key: &str) -> Result<String, BackendError> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::MalformedResponse(stage, format!("missing string field {key:?}")))
}

pub fn encode_pcm(samples: &[i16]) -> String {
    let mut bytes = Vec::with_capacity(samples.len() * 2);
    for s in samples {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    B64.encode(bytes)
}

pub fn decode_pcm(b64: &str) -> Option<Vec<i16>> {
    let bytes = B64.decode(b64).ok()?;
    if bytes.len() % 2 != 0 {
        return None;
    }
    Some(bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect())
}

pub struct RemoteStructurer(RemoteClient);

impl RemoteStructurer {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        RemoteStructurer(RemoteClient::new(Stage::Structurer, endpoint))
    }
}

#[async_trait]
impl Structurer for RemoteStructurer {
    async fn structure(&mut self, request: &StructureRequest) -> Result<Value, BackendError> {
        self.0.post_json(&serde_json::to_value(request).expect("request serializes")).await
    }
}

pub struct RemoteAsr(RemoteClient);

impl RemoteAsr {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        RemoteAsr(RemoteClient::new(Stage::Asr, endpoint))
    }
}

#[async_trait]
impl AsrBackend for RemoteAsr {
    async fn transcribe(&mut self, audio: &PcmAudio) -> Result<String, BackendError> {
        if audio.samples.is_empty() {
            return Err(BackendError::InvalidInput(Stage::Asr, "empty audio".into()));
        }
        let body = json!({"sample_rate": audio.sample_rate, "audio_b64": encode_pcm(&audio.samples)});
        let v = self.0.post_json(&body).await?;
        field_str(Stage::Asr, &v, "text")
    }
}

pub struct RemoteLlm(RemoteClient);

impl RemoteLlm {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        RemoteLlm(RemoteClient::new(Stage::Llm, endpoint))
    }
}

#[async_trait]
impl LlmBackend for RemoteLlm {
    async fn stream(&mut self, prompt: &str) -> Result<TokenStream, BackendError> {
        let lines = self.0.post_ndjson(&json!({"prompt": prompt})).await?;
        let tokens = lines
            .take_while(|item| {
                let done = matches!(item, Ok(v) if v.get("done").and_then(Value::as_bool) == Some(true));
                futures::future::ready(!done)
            })
            .map(|item| item.and_then(|v| field_str(Stage::Llm, &v, "token")));
        Ok(tokens.boxed())
    }
}

pub struct RemoteTts {
    client: RemoteClient,
    voice: TtsVoice,
}

impl RemoteTts {
    pub fn new(endpoint: RemoteEndpoint, voice: TtsVoice) -> Self {
        RemoteTts {
            client: RemoteClient::new(Stage::Tts, endpoint),
            voice,
        }
    }
}

#[async_trait]
impl TtsBackend for RemoteTts {
    async fn synthesize(&mut self, sentence: &str, sample_rate: u32) -> Result<AudioStream, BackendError> {
        let body = json!({
            "text": sentence,
            "sample_rate": sample_rate,
            "voice": self.voice.name,
            "rate": self.voice.rate,
        });
        let v = self.client.post_json(&body).await?;
        let rate = v.get("sample_rate").and_then(Value::as_u64);
        if rate != Some(sample_rate as u64) {
            return Err(BackendError::MalformedResponse(
                Stage::Tts,
                format!("sample_rate {rate:?} does not match requested {sample_rate}"),
            ));
        }
        let pcm = decode_pcm(&field_str(Stage::Tts, &v, "pcm_b64")?)
            .ok_or_else(|| BackendError::MalformedResponse(Stage::Tts, "bad pcm_b64".into()))?;
        let block = ((sample_rate as f64 * super::stub::BLOCK_SECONDS).round() as usize).max(1);
        let blocks: Vec<Result<Vec<i16>, BackendError>> =
            pcm.chunks(block).map(|b| Ok(b.to_vec())).collect();
        Ok(futures::stream::iter(blocks).boxed())
    }
}

pub struct RemoteRenderer(RemoteClient);

impl RemoteRenderer {
    pub fn new(endpoint: RemoteEndpoint) -> Self {
        RemoteRenderer(RemoteClient::new(Stage::Render, endpoint))
    }
}

#[async_trait]
impl RenderBackend for RemoteRenderer {
    async fn drive(&mut self, audio: &[i16], sample_rate: u32, frames: Range<u64>) -> Result<(), BackendError> {
        let count = frames.end - frames.start;
        let body = json!({
            "sample_rate": sample_rate,
            "audio_b64": encode_pcm(audio),
            "first_frame": frames.start,
            "frame_count": count,
        });
        let v = self.0.post_json(&body).await?;
        match v.get("frames_driven").and_then(Value::as_u64) {
            Some(n) if n == count => Ok(()),
            other => Err(BackendError::MalformedResponse(
                Stage::Render,
                format!("frames_driven {other:?}, expected {count}"),
            )),
        }
    }
}
