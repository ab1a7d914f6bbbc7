//! Runs spoken stub sessions and reports the per-module processing table.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::bail;
use riverecho_core::backends::{BackendChoice, BackendConfig, PcmAudio};
use riverecho_core::gateway::MetricsStore;
use riverecho_core::pipeline::{collect_session, SessionInput};
use riverecho_core::{KnowledgeGraph, PipelineConfig, SessionMetrics};
use tokio::task::JoinSet;

/// Spoken questions cycled through by the benchmark.
pub const BENCH_QUERIES: [&str; 5] = [
    "黄河从哪里发源？",
    "大禹是怎样治水的？",
    "郦道元和水经注有什么关系？",
    "潘季驯提出的束水攻沙是什么？",
    "王景治河有哪些功绩？",
];

/// Length of each synthesized question clip.
pub const QUERY_AUDIO_SECONDS: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub sessions: Vec<SessionMetrics>,
    pub mean: SessionMetrics,
    pub wall: Duration,
}

/// Runs `n` sessions concurrently. Any session error fails the run.
pub async fn run_bench(
    backends: &BackendConfig,
    pipeline: &PipelineConfig,
    graph: Arc<KnowledgeGraph>,
    n: usize,
) -> anyhow::Result<BenchReport> {
    let start = Instant::now();
    let mut set = JoinSet::new();
    for i in 0..n {
        let query = BENCH_QUERIES[i % BENCH_QUERIES.len()];
        let audio = PcmAudio::fixture(query, QUERY_AUDIO_SECONDS, pipeline.sample_rate);
        let (b, g, p) = (backends.instantiate(), graph.clone(), pipeline.clone());
        set.spawn(async move { (i, collect_session(SessionInput::Audio(audio), b, g, p).await.1) });
    }
    let mut traces = Vec::with_capacity(n);
    while let Some(joined) = set.join_next().await {
        let (i, trace) = joined?;
        if let Some((stage, msg)) = &trace.error {
            bail!("session {i} failed in {stage}: {msg}");
        }
        traces.push((i, trace));
    }
    traces.sort_by_key(|(i, _)| *i);
    let mut store = MetricsStore::new(n.max(1));
    let sessions: Vec<SessionMetrics> = traces.iter().map(|(_, t)| SessionMetrics::from_trace(t)).collect();
    for (i, m) in sessions.iter().enumerate() {
        store.record(i.to_string(), *m);
    }
    let mean = store.report().aggregate.unwrap_or_default();
    Ok(BenchReport {
        sessions,
        mean,
        wall: start.elapsed(),
    })
}

fn model(choice: &BackendChoice) -> String {
    match choice {
        BackendChoice::Stub => "stub".into(),
        BackendChoice::Remote(ep) => format!("remote {}", ep.url),
    }
}

fn value(v: Option<f64>, decimals: usize, unit: &str) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.decimals$} {unit}"))
}

/// Mean metrics in the Module / Model / Processing Metric / Processing
/// Time layout.
pub fn format_table(report: &BenchReport, backends: &BackendConfig) -> String {
    let m = &report.mean;
    let rows = [
        ("ASR", model(&backends.asr), "Time required to recognize 1s audio", value(m.asr_time_per_audio_second, 5, "s")),
        (
            "LLM (including RAG)",
            format!("{} + RAG", model(&backends.llm)),
            "Tokens generated per second",
            value(m.llm_tokens_per_second, 2, "tokens/s"),
        ),
        ("TTS", model(&backends.tts), "Time required to synthesize 1s audio", value(m.tts_time_per_audio_second, 5, "s")),
        (
            "Talking-Head Generation",
            model(&backends.renderer),
            "Time required to drive one frame",
            value(m.frame_drive_time, 4, "s"),
        ),
    ];
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:<16} {:<38} Processing Time", "Module", "Model", "Processing Metric");
    for (module, model, metric, time) in rows {
        let _ = writeln!(out, "{module:<24} {model:<16} {metric:<38} {time}");
    }
    let _ = writeln!(out, "({} sessions, {:.1} s wall)", report.sessions.len(), report.wall.as_secs_f64());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let report = BenchReport {
            sessions: vec![SessionMetrics::default()],
            mean: SessionMetrics {
                asr_time_per_audio_second: Some(0.0146),
                llm_tokens_per_second: Some(36.79),
                tts_time_per_audio_second: None,
                frame_drive_time: Some(0.0039),
            },
            wall: Duration::from_secs(2),
        };
        let t = format_table(&report, &BackendConfig::default());
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("Module"));
        assert!(lines[1].starts_with("ASR") && lines[1].ends_with("0.01460 s"));
        assert!(lines[2].contains("stub + RAG") && lines[2].ends_with("36.79 tokens/s"));
        assert!(lines[3].ends_with(" -"));
        assert!(lines[4].starts_with("Talking-Head Generation") && lines[4].ends_with("0.0039 s"));
    }
}
