//! Stage backends.
//!
//! Every stage of the system (structurer, ASR, LLM, TTS, renderer) is a
//! trait with two implementations: a deterministic stub paced to the
//! measured per-module costs, and a thin HTTP client for a remote service.
//! [`BackendConfig`] selects one implementation per stage and
//! [`BackendConfig::instantiate`] creates a fresh [`BackendSet`] for each
//! session.

mod pacing;
pub mod remote;
pub mod stub;
pub mod wav;

use std::fmt;
use std::time::Duration;

use async_trait::async_trait;
use futures::stream::BoxStream;
use serde::{Deserialize, Serialize};

pub use pacing::{Pacer, StubPacing};
pub use remote::{RemoteEndpoint, RemoteStructurer};
pub use stub::{StubAsr, StubLlm, StubRenderer, StubStructurer, StubTts, TtsVoice};
pub use wav::PcmAudio;

use crate::corpus::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Asr,
    Retrieval,
    Llm,
    Tts,
    Render,
    Structurer,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Asr => "asr",
            Stage::Retrieval => "retrieval",
            Stage::Llm => "llm",
            Stage::Tts => "tts",
            Stage::Render => "render",
            Stage::Structurer => "structurer",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("{0} backend timed out")]
    Timeout(Stage),
    #[error("{0} backend unreachable: {1}")]
    Unreachable(Stage, String),
    #[error("{0} backend returned a malformed response: {1}")]
    MalformedResponse(Stage, String),
    #[error("audio does not carry a recognizable transcript tag")]
    UnrecognizedAudio,
    #[error("{0} backend rejected input: {1}")]
    InvalidInput(Stage, String),
    #[error("{0} backend failed: {1}")]
    Failed(Stage, String),
}

impl BackendError {
    pub fn stage(&self) -> Stage {
        match self {
            BackendError::Timeout(s)
            | BackendError::Unreachable(s, _)
            | BackendError::MalformedResponse(s, _)
            | BackendError::InvalidInput(s, _)
            | BackendError::Failed(s, _) => *s,
            BackendError::UnrecognizedAudio => Stage::Asr,
        }
    }
}

pub type TokenStream = BoxStream<'static, Result<String, BackendError>>;
pub type AudioStream = BoxStream<'static, Result<Vec<i16>, BackendError>>;

/// Turns an unstructured chunk into a loosely typed structured record. The
/// caller validates the record against the chunk schema.
#[async_trait]
pub trait Structurer: Send {
    async fn structure(
        &mut self,
        request: &crate::corpus::StructureRequest,
    ) -> Result<serde_json::Value, BackendError>;
}

/// One-shot speech recognition.
#[async_trait]
pub trait AsrBackend: Send {
    async fn transcribe(&mut self, audio: &PcmAudio) -> Result<String, BackendError>;
}

/// Streaming text generation. The full prompt is supplied at once.
#[async_trait]
pub trait LlmBackend: Send {
    async fn stream(&mut self, prompt: &str) -> Result<TokenStream, BackendError>;
}

/// Sentence-level synthesis producing PCM blocks at `sample_rate`.
#[async_trait]
pub trait TtsBackend: Send {
    async fn synthesize(
        &mut self,
        sentence: &str,
        sample_rate: u32,
    ) -> Result<AudioStream, BackendError>;
}

/// Audio-driven frame rendering. `frames` is the half-open range of frame
/// indices that `audio` completes.
#[async_trait]
pub trait RenderBackend: Send {
    async fn drive(
        &mut self,
        audio: &[i16],
        sample_rate: u32,
        frames: std::ops::Range<u64>,
    ) -> Result<(), BackendError>;
}

/// One backend per stage, owned by a single session.
pub struct BackendSet {
    pub asr: Box<dyn AsrBackend>,
    pub llm: Box<dyn LlmBackend>,
    pub tts: Box<dyn TtsBackend>,
    pub renderer: Box<dyn RenderBackend>,
    pub structurer: Box<dyn Structurer>,
}

impl BackendSet {
    /// All stubs with the given pacing.
    pub fn stubs(pacing: StubPacing) -> Self {
        BackendConfig {
            pacing,
            ..BackendConfig::default()
        }
        .instantiate()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendChoice {
    #[default]
    Stub,
    Remote(RemoteEndpoint),
}

/// Per-stage implementation selection plus stub pacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub asr: BackendChoice,
    pub llm: BackendChoice,
    pub tts: BackendChoice,
    pub renderer: BackendChoice,
    pub structurer: BackendChoice,
    pub pacing: StubPacing,
    pub voice: TtsVoice,
    /// Stub TTS fault injection: fail when asked to synthesize this
    /// 0-based sentence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tts_fail_on_sentence: Option<u64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            asr: BackendChoice::Stub,
            llm: BackendChoice::Stub,
            tts: BackendChoice::Stub,
            renderer: BackendChoice::Stub,
            structurer: BackendChoice::Stub,
            pacing: StubPacing::default(),
            voice: TtsVoice::default(),
            tts_fail_on_sentence: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.pacing.validate()?;
        for (name, choice) in [
            ("asr", &self.asr),
            ("llm", &self.llm),
            ("tts", &self.tts),
            ("renderer", &self.renderer),
            ("structurer", &self.structurer),
        ] {
            if let BackendChoice::Remote(ep) = choice {
                ep.validate().map_err(|e| format!("backends.{name}: {e}"))?;
            }
        }
        Ok(())
    }

    /// Fresh per-session backend handles.
    pub fn instantiate(&self) -> BackendSet {
        self.instantiate_with_lexicon(Lexicon::fixture())
    }

    pub fn instantiate_with_lexicon(&self, lexicon: Lexicon) -> BackendSet {
        let p = &self.pacing;
        let asr: Box<dyn AsrBackend> = match &self.asr {
            BackendChoice::Stub => Box::new(StubAsr::new(p.asr_rtf)),
            BackendChoice::Remote(ep) => Box::new(remote::RemoteAsr::new(ep.clone())),
        };
        let llm: Box<dyn LlmBackend> = match &self.llm {
            BackendChoice::Stub => Box::new(StubLlm::new(p.llm_rate)),
            BackendChoice::Remote(ep) => Box::new(remote::RemoteLlm::new(ep.clone())),
        };
        let tts: Box<dyn TtsBackend> = match &self.tts {
            BackendChoice::Stub => {
                let mut tts = StubTts::new(p.tts_rtf, p.tts_seconds_per_char);
                if let Some(n) = self.tts_fail_on_sentence {
                    tts = tts.fail_on_sentence(n);
                }
                Box::new(tts)
            }
            BackendChoice::Remote(ep) => {
                Box::new(remote::RemoteTts::new(ep.clone(), self.voice.clone()))
            }
        };
        let renderer: Box<dyn RenderBackend> = match &self.renderer {
            BackendChoice::Stub => Box::new(StubRenderer::new(p.frame_cost)),
            BackendChoice::Remote(ep) => Box::new(remote::RemoteRenderer::new(ep.clone())),
        };
        let structurer: Box<dyn Structurer> = match &self.structurer {
            BackendChoice::Stub => Box::new(StubStructurer::new(lexicon)),
            BackendChoice::Remote(ep) => Box::new(RemoteStructurer::new(ep.clone())),
        };
        BackendSet {
            asr,
            llm,
            tts,
            renderer,
            structurer,
        }
    }
}

pub(crate) fn secs(d: f64) -> Duration {
    Duration::from_secs_f64(d.max(0.0))
}
