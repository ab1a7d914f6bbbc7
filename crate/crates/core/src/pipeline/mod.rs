//! The streaming dialogue pipeline: ASR, retrieval, LLM, sentence
//! accumulation, TTS and frame rendering as concurrent stages joined by
//! bounded queues.

mod config;
mod event;
mod invariants;
mod metrics;
mod sentence;
mod session;

pub use config::{PipelineConfig, DEFAULT_SENTENCE_PUNCTUATION};
pub use event::{read_event_log, write_event_log, StageEvent, TimedEvent};
pub use invariants::check_event_stream;
pub use metrics::{
    compute_module_metrics, MetricUndefined, ModuleMetrics, SessionMetrics, SessionTrace, StageSpan,
};
pub use sentence::{accumulate_sentences, SentenceAccumulator};
pub use session::{
    collect_session, frames_due, measure_isolated_stages, run_session, IsolatedTimings,
    SessionHandle, SessionInput,
};
