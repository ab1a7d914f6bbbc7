use std::io::{self, BufRead, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::SessionMetrics;
use crate::backends::Stage;
use crate::graph::RetrievalContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageEvent {
    TranscriptFinal {
        text: String,
    },
    ContextReady(RetrievalContext),
    Token {
        text: String,
        seq: u64,
    },
    Sentence {
        text: String,
        seq: u64,
    },
    AudioBlock {
        samples: Vec<i16>,
        sample_rate: u32,
        seq: u64,
        sentence_seq: u64,
    },
    VideoFrame {
        frame_index: u64,
        /// Seconds from the start of the response audio.
        presentation_time: f64,
        sentence_seq: u64,
    },
    Metrics(SessionMetrics),
    End,
    Error {
        stage: Stage,
        message: String,
    },
}

impl StageEvent {
    pub fn tag(&self) -> &'static str {
        match self {
            StageEvent::TranscriptFinal { .. } => "transcript",
            StageEvent::ContextReady(_) => "context",
            StageEvent::Token { .. } => "token",
            StageEvent::Sentence { .. } => "sentence",
            StageEvent::AudioBlock { .. } => "audio",
            StageEvent::VideoFrame { .. } => "frame",
            StageEvent::Metrics(_) => "metrics",
            StageEvent::End => "end",
            StageEvent::Error { .. } => "error",
        }
    }
}

/// An event and the time since session start at which it was emitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    #[serde(with = "micros")]
    pub at: Duration,
    pub event: StageEvent,
}

mod micros {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_micros() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_micros)
    }
}

/// Writes one JSON record per event: `{"at": micros, "event": {...}}`.
pub fn write_event_log<W: Write>(events: &[TimedEvent], mut w: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_event_log<R: BufRead>(r: R) -> io::Result<Vec<TimedEvent>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_round_trip() {
        let events = vec![
            TimedEvent {
                at: Duration::from_micros(5),
                event: StageEvent::Token {
                    text: "黄".into(),
                    seq: 0,
                },
            },
            TimedEvent {
                at: Duration::from_micros(9),
                event: StageEvent::AudioBlock {
                    samples: vec![1, -2, 3],
                    sample_rate: 16_000,
                    seq: 0,
                    sentence_seq: 0,
                },
            },
            TimedEvent {
                at: Duration::from_millis(1),
                event: StageEvent::End,
            },
        ];
        let mut buf = Vec::new();
        write_event_log(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"at":5,"event":{"kind":"token","text":"黄","seq":0}}"#));
        assert_eq!(read_event_log(&buf[..]).unwrap(), events);
    }
}
