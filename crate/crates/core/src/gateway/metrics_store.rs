use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::pipeline::SessionMetrics;

pub const DEFAULT_RETENTION: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    #[serde(flatten)]
    pub metrics: SessionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Oldest first.
    pub sessions: Vec<SessionRecord>,
    /// Per-field means over the sessions that define the field; absent
    /// when there are no sessions.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aggregate: Option<SessionMetrics>,
}

/// Metrics of the most recent sessions, bounded by `retention`.
#[derive(Debug)]
pub struct MetricsStore {
    retention: usize,
    sessions: VecDeque<SessionRecord>,
}

impl Default for MetricsStore {
    fn default() -> Self {
        Self::new(DEFAULT_RETENTION)
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0u32), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MetricsStore {
    pub fn new(retention: usize) -> Self {
        MetricsStore {
            retention: retention.max(1),
            sessions: VecDeque::new(),
        }
    }

    pub fn record(&mut self, session_id: impl Into<String>, metrics: SessionMetrics) {
        if self.sessions.len() == self.retention {
            self.sessions.pop_front();
        }
        self.sessions.push_back(SessionRecord {
            session_id: session_id.into(),
            metrics,
        });
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn report(&self) -> MetricsReport {
        let s = &self.sessions;
        let aggregate = (!s.is_empty()).then(|| SessionMetrics {
            asr_time_per_audio_second: mean(s.iter().map(|r| r.metrics.asr_time_per_audio_second)),
            llm_tokens_per_second: mean(s.iter().map(|r| r.metrics.llm_tokens_per_second)),
            tts_time_per_audio_second: mean(s.iter().map(|r| r.metrics.tts_time_per_audio_second)),
            frame_drive_time: mean(s.iter().map(|r| r.metrics.frame_drive_time)),
        });
        MetricsReport {
            sessions: s.iter().cloned().collect(),
            aggregate,
        }
    }
}
