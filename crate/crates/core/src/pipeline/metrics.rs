use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backends::Stage;

/// Wall-clock activity of one stage within a session. `busy` counts only
/// time spent inside backend calls, not time blocked on queues.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSpan {
    pub start: Duration,
    pub stop: Duration,
    pub busy: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub spans: BTreeMap<Stage, StageSpan>,
    pub input_audio_seconds: f64,
    pub tokens: u64,
    pub sentences: u64,
    pub audio_blocks: u64,
    pub audio_samples: u64,
    pub sample_rate: u32,
    pub frames: u64,
    /// When the full prompt was handed to the LLM.
    pub llm_request: Option<Duration>,
    pub llm_last_token: Option<Duration>,
    pub first_token: Option<Duration>,
    pub first_audio: Option<Duration>,
    /// Highest occupancy observed on each inter-stage queue.
    pub queue_peaks: BTreeMap<String, usize>,
    pub queue_capacity: usize,
    pub total: Duration,
    pub answer: String,
    pub error: Option<(Stage, String)>,
}

impl SessionTrace {
    pub fn output_audio_seconds(&self) -> f64 {
        if self.sample_rate == 0 {
            0.0
        } else {
            self.audio_samples as f64 / self.sample_rate as f64
        }
    }

    fn busy(&self, stage: Stage) -> Option<f64> {
        self.spans.get(&stage).map(|s| s.busy.as_secs_f64())
    }
}

/// The four per-module processing measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleMetrics {
    pub asr_time_per_audio_second: f64,
    pub llm_tokens_per_second: f64,
    pub tts_time_per_audio_second: f64,
    pub frame_drive_time: f64,
}

/// Per-session metrics; a field is absent when its stage did not run or
/// its denominator was zero (e.g. no ASR for a text query).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub asr_time_per_audio_second: Option<f64>,
    pub llm_tokens_per_second: Option<f64>,
    pub tts_time_per_audio_second: Option<f64>,
    pub frame_drive_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("metric {0} is undefined for this session")]
pub struct MetricUndefined(pub &'static str);

fn ratio(num: Option<f64>, den: f64, field: &'static str) -> Result<f64, MetricUndefined> {
    match num {
        Some(n) if den > 0.0 => Ok(n / den),
        _ => Err(MetricUndefined(field)),
    }
}

fn asr(t: &SessionTrace) -> Result<f64, MetricUndefined> {
    ratio(t.busy(Stage::Asr), t.input_audio_seconds, "asr_time_per_audio_second")
}

fn llm(t: &SessionTrace) -> Result<f64, MetricUndefined> {
    const F: &str = "llm_tokens_per_second";
    let (Some(a), Some(b)) = (t.llm_request, t.llm_last_token) else {
        return Err(MetricUndefined(F));
    };
    if t.tokens == 0 {
        return Err(MetricUndefined(F));
    }
    ratio(Some(t.tokens as f64), b.saturating_sub(a).as_secs_f64(), F)
}

fn tts(t: &SessionTrace) -> Result<f64, MetricUndefined> {
    ratio(t.busy(Stage::Tts), t.output_audio_seconds(), "tts_time_per_audio_second")
}

fn frame(t: &SessionTrace) -> Result<f64, MetricUndefined> {
    ratio(t.busy(Stage::Render), t.frames as f64, "frame_drive_time")
}

/// All four metrics, or the first one whose denominator is zero.
pub fn compute_module_metrics(trace: &SessionTrace) -> Result<ModuleMetrics, MetricUndefined> {
    Ok(ModuleMetrics {
        asr_time_per_audio_second: asr(trace)?,
        llm_tokens_per_second: llm(trace)?,
        tts_time_per_audio_second: tts(trace)?,
        frame_drive_time: frame(trace)?,
    })
}

impl SessionMetrics {
    pub fn from_trace(trace: &SessionTrace) -> Self {
        SessionMetrics {
            asr_time_per_audio_second: asr(trace).ok(),
            llm_tokens_per_second: llm(trace).ok(),
            tts_time_per_audio_second: tts(trace).ok(),
            frame_drive_time: frame(trace).ok(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(busy: f64) -> StageSpan {
        StageSpan {
            busy: Duration::from_secs_f64(busy),
            ..StageSpan::default()
        }
    }

    fn full() -> SessionTrace {
        let mut t = SessionTrace {
            input_audio_seconds: 1.0,
            tokens: 3679,
            llm_request: Some(Duration::from_secs(2)),
            llm_last_token: Some(Duration::from_secs(102)),
            audio_samples: 32_000,
            sample_rate: 16_000,
            frames: 50,
            ..SessionTrace::default()
        };
        t.spans.insert(Stage::Asr, span(0.01460));
        t.spans.insert(Stage::Tts, span(2.0 * 0.27448));
        t.spans.insert(Stage::Render, span(50.0 * 0.0039));
        t
    }

    #[test]
    fn table_values_come_back() {
        let m = compute_module_metrics(&full()).unwrap();
        assert!((m.asr_time_per_audio_second - 0.01460).abs() < 1e-12);
        // 3679 tokens over 100 s
        assert!((m.llm_tokens_per_second - 36.79).abs() < 1e-9);
        assert!((m.tts_time_per_audio_second - 0.27448).abs() < 1e-9);
        assert!((m.frame_drive_time - 0.0039).abs() < 1e-12);
    }

    #[test]
    fn tokens_over_one_second() {
        let t = SessionTrace {
            tokens: 37,
            llm_request: Some(Duration::ZERO),
            llm_last_token: Some(Duration::from_secs(1)),
            ..full()
        };
        assert_eq!(compute_module_metrics(&t).unwrap().llm_tokens_per_second, 37.0);
    }

    #[test]
    fn zero_frames_undefined() {
        let t = SessionTrace { frames: 0, ..full() };
        assert_eq!(compute_module_metrics(&t), Err(MetricUndefined("frame_drive_time")));
        let s = SessionMetrics::from_trace(&t);
        assert!(s.frame_drive_time.is_none());
        assert!(s.tts_time_per_audio_second.is_some());
    }

    #[test]
    fn text_query_has_no_asr_metric() {
        let mut t = full();
        t.spans.remove(&Stage::Asr);
        t.input_audio_seconds = 0.0;
        assert_eq!(compute_module_metrics(&t), Err(MetricUndefined("asr_time_per_audio_second")));
        assert!(SessionMetrics::from_trace(&t).asr_time_per_audio_second.is_none());
    }
}
