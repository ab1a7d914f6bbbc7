//! Session orchestration.
//!
//! ```text
//! front (ASR -> retrieval -> LLM) --tokens--> accumulator --sentences--> TTS --blocks--> renderer
//!        \__________________________ all stages emit into one event channel ___________/
//! ```
//!
//! Each arrow is a bounded channel of `queue_capacity` items, so a slow
//! consumer blocks its producer. The coordinator joins the stages; on the
//! first failure it aborts the rest and closes the stream with `Error`
//! then `End`. A clean run closes with `Metrics` then `End`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Duration;

use futures::StreamExt;
use parking_lot::Mutex;
use tokio::sync::{mpsc, Mutex as AsyncMutex};
use tokio::task::{JoinHandle, JoinSet};
use tokio::time::Instant;

use super::{PipelineConfig, SentenceAccumulator, SessionMetrics, SessionTrace, StageEvent, StageSpan, TimedEvent};
use crate::backends::{
    AsrBackend, BackendError, BackendSet, LlmBackend, PcmAudio, RenderBackend, Stage, TtsBackend,
};
use crate::graph::{format_context_prompt, retrieve_with, KnowledgeGraph, RetrievalParams};

#[derive(Debug, Clone, PartialEq)]
pub enum SessionInput {
    Text(String),
    Audio(PcmAudio),
}

pub struct SessionHandle {
    pub events: mpsc::Receiver<TimedEvent>,
    /// Resolves after `End` has been sent.
    pub trace: JoinHandle<SessionTrace>,
}

#[derive(Debug)]
enum Failure {
    Stage(Stage, String),
    /// A peer hung up: either a downstream stage was aborted or the event
    /// consumer went away.
    Cancelled,
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        Failure::Stage(e.stage(), e.to_string())
    }
}

type Shared = Arc<Mutex<SessionTrace>>;

#[derive(Clone)]
struct Emitter {
    tx: Arc<AsyncMutex<mpsc::Sender<TimedEvent>>>,
    start: Instant,
}

impl Emitter {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    /// Stamps and sends under one lock so the stream's timestamps never go
    /// backwards.
    async fn emit(&self, event: StageEvent) -> Result<Duration, Failure> {
        let tx = self.tx.lock().await;
        let at = self.now();
        tx.send(TimedEvent { at, event }).await.map_err(|_| Failure::Cancelled)?;
        Ok(at)
    }
}

/// Bounded inter-stage link that records its peak occupancy.
struct Link<T> {
    name: &'static str,
    tx: mpsc::Sender<T>,
    trace: Shared,
}

impl<T> Link<T> {
    async fn send(&self, v: T) -> Result<(), Failure> {
        self.tx.send(v).await.map_err(|_| Failure::Cancelled)?;
        let occupied = self.tx.max_capacity() - self.tx.capacity();
        let mut t = self.trace.lock();
        let peak = t.queue_peaks.entry(self.name.to_owned()).or_default();
        *peak = (*peak).max(occupied);
        Ok(())
    }
}

fn link<T>(name: &'static str, cap: usize, trace: &Shared) -> (Link<T>, mpsc::Receiver<T>) {
    let (tx, rx) = mpsc::channel(cap);
    (
        Link {
            name,
            tx,
            trace: Arc::clone(trace),
        },
        rx,
    )
}

/// Starts a session. Events arrive on the returned channel in emission
/// order; the trace resolves once the stream is closed.
pub fn run_session(
    input: SessionInput,
    backends: BackendSet,
    graph: Arc<KnowledgeGraph>,
    config: PipelineConfig,
) -> SessionHandle {
    let (tx, rx) = mpsc::channel(config.queue_capacity.max(1));
    let trace = tokio::spawn(coordinate(input, backends, graph, config, tx));
    SessionHandle { events: rx, trace }
}

/// Runs a session to completion and returns every event with the trace.
pub async fn collect_session(
    input: SessionInput,
    backends: BackendSet,
    graph: Arc<KnowledgeGraph>,
    config: PipelineConfig,
) -> (Vec<TimedEvent>, SessionTrace) {
    let mut handle = run_session(input, backends, graph, config);
    let mut events = Vec::new();
    while let Some(e) = handle.events.recv().await {
        events.push(e);
    }
    let trace = handle.trace.await.expect("session coordinator panicked");
    (events, trace)
}

async fn coordinate(
    input: SessionInput,
    backends: BackendSet,
    graph: Arc<KnowledgeGraph>,
    config: PipelineConfig,
    tx: mpsc::Sender<TimedEvent>,
) -> SessionTrace {
    let em = Emitter {
        tx: Arc::new(AsyncMutex::new(tx)),
        start: Instant::now(),
    };
    let cap = config.queue_capacity.max(1);
    let shared: Shared = Arc::new(Mutex::new(SessionTrace {
        sample_rate: config.sample_rate,
        queue_capacity: cap,
        ..SessionTrace::default()
    }));

    let (tok_tx, tok_rx) = link("tokens", cap, &shared);
    let (sent_tx, sent_rx) = link("sentences", cap, &shared);
    let (audio_tx, audio_rx) = link("audio", cap, &shared);
    let BackendSet {
        asr,
        llm,
        tts,
        renderer,
        ..
    } = backends;

    let mut set = JoinSet::new();
    let mut stage_of = HashMap::new();
    let h = set.spawn(front(input, asr, llm, graph, config.clone(), em.clone(), tok_tx, Arc::clone(&shared)));
    stage_of.insert(h.id(), Stage::Llm);
    let h = set.spawn(accumulate(tok_rx, config.clone(), em.clone(), sent_tx, Arc::clone(&shared)));
    stage_of.insert(h.id(), Stage::Llm);
    let h = set.spawn(synthesize(sent_rx, tts, config.sample_rate, em.clone(), audio_tx, Arc::clone(&shared)));
    stage_of.insert(h.id(), Stage::Tts);
    let h = set.spawn(render(audio_rx, renderer, config.clone(), em.clone(), Arc::clone(&shared)));
    stage_of.insert(h.id(), Stage::Render);

    let mut failure: Option<(Stage, String)> = None;
    let mut cancelled = false;
    while let Some(joined) = set.join_next_with_id().await {
        match joined {
            Ok((_, Ok(()))) => {}
            Ok((_, Err(Failure::Stage(stage, message)))) => {
                failure.get_or_insert((stage, message));
                set.abort_all();
            }
            Ok((_, Err(Failure::Cancelled))) => {
                cancelled = true;
                set.abort_all();
            }
            Err(e) if e.is_cancelled() => {}
            Err(e) => {
                let stage = stage_of.get(&e.id()).copied().unwrap_or(Stage::Llm);
                failure.get_or_insert((stage, format!("stage worker panicked: {e}")));
                set.abort_all();
            }
        }
    }

    let mut trace = shared.lock().clone();
    if let Some((stage, message)) = failure {
        trace.error = Some((stage, message.clone()));
        let _ = em.emit(StageEvent::Error { stage, message }).await;
    } else if !cancelled {
        let _ = em.emit(StageEvent::Metrics(SessionMetrics::from_trace(&trace))).await;
    }
    trace.total = em.emit(StageEvent::End).await.unwrap_or_else(|_| em.now());
    trace
}

fn span(trace: &Shared, stage: Stage, start: Duration, stop: Duration, busy: Duration) {
    trace.lock().spans.insert(stage, StageSpan { start, stop, busy });
}

#[allow(clippy::too_many_arguments)]
async fn front(
    input: SessionInput,
    mut asr: Box<dyn AsrBackend>,
    mut llm: Box<dyn LlmBackend>,
    graph: Arc<KnowledgeGraph>,
    config: PipelineConfig,
    em: Emitter,
    out: Link<String>,
    trace: Shared,
) -> Result<(), Failure> {
    let query = match input {
        SessionInput::Text(q) => q,
        SessionInput::Audio(audio) => {
            let t0 = em.now();
            let text = asr.transcribe(&audio).await?;
            let t1 = em.now();
            span(&trace, Stage::Asr, t0, t1, t1 - t0);
            trace.lock().input_audio_seconds = audio.duration_secs();
            em.emit(StageEvent::TranscriptFinal { text: text.clone() }).await?;
            text
        }
    };

    let t0 = em.now();
    let params = RetrievalParams {
        k: config.retrieval_k,
        depth: config.retrieval_depth,
        ..RetrievalParams::default()
    };
    let retrieval_err = |e: crate::graph::GraphError| Failure::Stage(Stage::Retrieval, e.to_string());
    let ctx = retrieve_with(&graph, &query, &params).map_err(retrieval_err)?;
    let prompt = format_context_prompt(&ctx, &query, config.prompt_budget_chars).map_err(retrieval_err)?;
    let t1 = em.now();
    span(&trace, Stage::Retrieval, t0, t1, t1 - t0);
    em.emit(StageEvent::ContextReady(ctx)).await?;

    let request = em.now();
    trace.lock().llm_request = Some(request);
    let mut busy = Duration::ZERO;
    let started = Instant::now();
    let mut tokens = llm.stream(&prompt).await?;
    busy += started.elapsed();
    let mut seq = 0;
    loop {
        let polled = Instant::now();
        let next = tokens.next().await;
        busy += polled.elapsed();
        let Some(tok) = next else { break };
        let tok = tok?;
        let got = em.now();
        {
            let mut t = trace.lock();
            t.tokens += 1;
            t.llm_last_token = Some(got);
            t.first_token.get_or_insert(got);
            t.answer.push_str(&tok);
        }
        em.emit(StageEvent::Token { text: tok.clone(), seq }).await?;
        out.send(tok).await?;
        seq += 1;
    }
    span(&trace, Stage::Llm, request, em.now(), busy);
    Ok(())
}

async fn accumulate(
    mut rx: mpsc::Receiver<String>,
    config: PipelineConfig,
    em: Emitter,
    out: Link<(u64, String)>,
    trace: Shared,
) -> Result<(), Failure> {
    let mut acc = SentenceAccumulator::new(config.punctuation());
    let mut seq = 0;
    let emit = |text: String, seq: u64| {
        let em = em.clone();
        let trace = Arc::clone(&trace);
        let out = &out;
        async move {
            trace.lock().sentences += 1;
            em.emit(StageEvent::Sentence { text: text.clone(), seq }).await?;
            out.send((seq, text)).await
        }
    };
    while let Some(tok) = rx.recv().await {
        for s in acc.push(&tok) {
            emit(s, seq).await?;
            seq += 1;
        }
    }
    if let Some(s) = acc.finish() {
        emit(s, seq).await?;
    }
    Ok(())
}

async fn synthesize(
    mut rx: mpsc::Receiver<(u64, String)>,
    mut tts: Box<dyn TtsBackend>,
    sample_rate: u32,
    em: Emitter,
    out: Link<(u64, Vec<i16>)>,
    trace: Shared,
) -> Result<(), Failure> {
    let mut busy = Duration::ZERO;
    let mut start = None;
    let mut seq = 0;
    while let Some((sentence_seq, text)) = rx.recv().await {
        start.get_or_insert_with(|| em.now());
        let t = Instant::now();
        let mut blocks = tts.synthesize(&text, sample_rate).await?;
        busy += t.elapsed();
        loop {
            let t = Instant::now();
            let next = blocks.next().await;
            busy += t.elapsed();
            let Some(block) = next else { break };
            let block = block?;
            {
                let mut tr = trace.lock();
                tr.audio_blocks += 1;
                tr.audio_samples += block.len() as u64;
            }
            let at = em
                .emit(StageEvent::AudioBlock {
                    samples: block.clone(),
                    sample_rate,
                    seq,
                    sentence_seq,
                })
                .await?;
            trace.lock().first_audio.get_or_insert(at);
            out.send((sentence_seq, block)).await?;
            seq += 1;
        }
        // keep the span current so an aborted run still reports it
        span(&trace, Stage::Tts, start.unwrap_or_default(), em.now(), busy);
    }
    Ok(())
}

/// Index one past the last frame completed by `samples` of audio: frame
/// `i` is due once `samples * fps > i * sample_rate`.
pub fn frames_due(samples: u64, fps: u32, sample_rate: u32) -> u64 {
    (samples * fps as u64).div_ceil(sample_rate as u64)
}

async fn render(
    mut rx: mpsc::Receiver<(u64, Vec<i16>)>,
    mut renderer: Box<dyn RenderBackend>,
    config: PipelineConfig,
    em: Emitter,
    trace: Shared,
) -> Result<(), Failure> {
    let (fps, sr) = (config.target_fps, config.sample_rate);
    let mut samples = 0u64;
    let mut next = 0u64;
    let mut busy = Duration::ZERO;
    let mut start = None;
    while let Some((sentence_seq, block)) = rx.recv().await {
        start.get_or_insert_with(|| em.now());
        samples += block.len() as u64;
        let due = frames_due(samples, fps, sr);
        if due == next {
            continue;
        }
        let t = Instant::now();
        renderer.drive(&block, sr, next..due).await?;
        busy += t.elapsed();
        for frame_index in next..due {
            em.emit(StageEvent::VideoFrame {
                frame_index,
                presentation_time: frame_index as f64 / fps as f64,
                sentence_seq,
            })
            .await?;
            trace.lock().frames += 1;
        }
        next = due;
        span(&trace, Stage::Render, start.unwrap_or_default(), em.now(), busy);
    }
    Ok(())
}

/// Wall time of each stage run alone, one after another, on the same
/// input. The sum is what a non-streaming implementation would take.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IsolatedTimings {
    pub stages: BTreeMap<Stage, Duration>,
    pub answer: String,
    pub sentences: Vec<String>,
}

impl IsolatedTimings {
    pub fn total(&self) -> Duration {
        self.stages.values().sum()
    }
}

pub async fn measure_isolated_stages(
    input: SessionInput,
    backends: BackendSet,
    graph: &KnowledgeGraph,
    config: &PipelineConfig,
) -> Result<IsolatedTimings, BackendError> {
    let BackendSet {
        mut asr,
        mut llm,
        mut tts,
        mut renderer,
        ..
    } = backends;
    let mut out = IsolatedTimings::default();
    let timed = Instant::now;

    let query = match input {
        SessionInput::Text(q) => q,
        SessionInput::Audio(a) => {
            let t = timed();
            let q = asr.transcribe(&a).await?;
            out.stages.insert(Stage::Asr, t.elapsed());
            q
        }
    };

    let t = timed();
    let params = RetrievalParams {
        k: config.retrieval_k,
        depth: config.retrieval_depth,
        ..RetrievalParams::default()
    };
    let fail = |e: crate::graph::GraphError| BackendError::Failed(Stage::Retrieval, e.to_string());
    let ctx = retrieve_with(graph, &query, &params).map_err(fail)?;
    let prompt = format_context_prompt(&ctx, &query, config.prompt_budget_chars).map_err(fail)?;
    out.stages.insert(Stage::Retrieval, t.elapsed());

    let t = timed();
    let tokens: Vec<String> = llm
        .stream(&prompt)
        .await?
        .collect::<Vec<_>>()
        .await
        .into_iter()
        .collect::<Result<_, _>>()?;
    out.stages.insert(Stage::Llm, t.elapsed());
    out.answer = tokens.concat();
    out.sentences = super::accumulate_sentences(&tokens, &config.punctuation());

    let t = timed();
    let mut blocks = Vec::new();
    for s in &out.sentences {
        let mut stream = tts.synthesize(s, config.sample_rate).await?;
        while let Some(b) = stream.next().await {
            blocks.push(b?);
        }
    }
    out.stages.insert(Stage::Tts, t.elapsed());

    let t = timed();
    let (mut samples, mut next) = (0u64, 0u64);
    for b in &blocks {
        samples += b.len() as u64;
        let due = frames_due(samples, config.target_fps, config.sample_rate);
        if due > next {
            renderer.drive(b, config.sample_rate, next..due).await?;
            next = due;
        }
    }
    out.stages.insert(Stage::Render, t.elapsed());
    Ok(out)
}
