use std::time::Duration;

use super::{PipelineConfig, StageEvent, TimedEvent};

/// Checks the ordering contract of one session's event stream and returns
/// the first violation found.
pub fn check_event_stream(events: &[TimedEvent], config: &PipelineConfig) -> Result<(), String> {
    let fps = config.target_fps as f64;
    let Some(last) = events.last() else {
        return Err("empty event stream".into());
    };
    if last.event != StageEvent::End {
        return Err(format!("last event is {}, not end", last.event.tag()));
    }
    let mut prev_at = Duration::ZERO;
    let mut seen_transcript = false;
    let mut seen_context = false;
    let mut tokens = String::new();
    let mut sentences = String::new();
    let (mut n_tok, mut n_sent, mut n_audio, mut n_frame) = (0u64, 0u64, 0u64, 0u64);
    let mut audio_sentence: Option<u64> = None;
    let mut frame_sentence: Option<u64> = None;
    let mut error = false;

    for (i, TimedEvent { at, event }) in events.iter().enumerate() {
        let is_last = i + 1 == events.len();
        if *at < prev_at {
            return Err(format!("event {i} timestamp goes backwards"));
        }
        prev_at = *at;
        if error && !matches!(event, StageEvent::End) {
            return Err(format!("event {i} ({}) follows an error", event.tag()));
        }
        match event {
            StageEvent::TranscriptFinal { .. } => {
                if i != 0 {
                    return Err("transcript is not the first event".into());
                }
                seen_transcript = true;
            }
            StageEvent::ContextReady(ctx) => {
                if seen_context || i != usize::from(seen_transcript) {
                    return Err(format!("context at position {i}"));
                }
                if ctx.chunks.len() > config.retrieval_k {
                    return Err("context holds more than k chunks".into());
                }
                seen_context = true;
            }
            StageEvent::Token { text, seq } => {
                if !seen_context {
                    return Err("token before context".into());
                }
                if *seq != n_tok {
                    return Err(format!("token seq {seq}, expected {n_tok}"));
                }
                n_tok += 1;
                tokens.push_str(text);
            }
            StageEvent::Sentence { text, seq } => {
                if *seq != n_sent {
                    return Err(format!("sentence seq {seq}, expected {n_sent}"));
                }
                n_sent += 1;
                sentences.push_str(text);
                if !tokens.starts_with(&sentences) {
                    return Err(format!("sentence {seq} is not backed by tokens received so far"));
                }
            }
            StageEvent::AudioBlock {
                sample_rate,
                seq,
                sentence_seq,
                ..
            } => {
                if *sample_rate != config.sample_rate {
                    return Err(format!("audio block {seq} at {sample_rate} Hz"));
                }
                if *seq != n_audio {
                    return Err(format!("audio seq {seq}, expected {n_audio}"));
                }
                if *sentence_seq >= n_sent || audio_sentence.is_some_and(|s| *sentence_seq < s) {
                    return Err(format!("audio block {seq} for sentence {sentence_seq} out of order"));
                }
                audio_sentence = Some(*sentence_seq);
                n_audio += 1;
            }
            StageEvent::VideoFrame {
                frame_index,
                presentation_time,
                sentence_seq,
            } => {
                if *frame_index != n_frame {
                    return Err(format!("frame {frame_index}, expected {n_frame}"));
                }
                if (*presentation_time - *frame_index as f64 / fps).abs() > 1e-9 {
                    return Err(format!("frame {frame_index} presented at {presentation_time}"));
                }
                if audio_sentence.is_none_or(|s| *sentence_seq > s)
                    || frame_sentence.is_some_and(|s| *sentence_seq < s)
                {
                    return Err(format!("frame {frame_index} for sentence {sentence_seq} out of order"));
                }
                frame_sentence = Some(*sentence_seq);
                n_frame += 1;
            }
            StageEvent::Metrics(_) => {
                if i + 2 != events.len() {
                    return Err("metrics is not immediately before end".into());
                }
            }
            StageEvent::Error { .. } => {
                error = true;
                if i + 2 != events.len() {
                    return Err("error is not immediately before end".into());
                }
            }
            StageEvent::End => {
                if !is_last {
                    return Err(format!("end at position {i} of {}", events.len()));
                }
            }
        }
    }
    if !error {
        if !seen_context {
            return Err("no context event".into());
        }
        if tokens != sentences {
            return Err("sentences do not reproduce the token text".into());
        }
        if !matches!(events.iter().rev().nth(1).map(|e| &e.event), Some(StageEvent::Metrics(_))) {
            return Err("clean session without metrics".into());
        }
    }
    Ok(())
}
