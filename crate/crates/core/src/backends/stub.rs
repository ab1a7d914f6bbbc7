//! Deterministic local stand-ins for every stage, paced by [`StubPacing`](super::StubPacing).

use std::collections::BTreeSet;
use std::ops::Range;
use std::time::Duration;

use async_trait::async_trait;
use futures::StreamExt;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::pacing::Pacer;
use super::{
    secs, AsrBackend, AudioStream, BackendError, LlmBackend, PcmAudio, RenderBackend, Stage,
    Structurer, TokenStream, TtsBackend,
};
use crate::corpus::{Lexicon, StructureRequest};
use crate::graph::parse_prompt;

/// Returned by the stub LLM for an empty prompt.
pub const FALLBACK_ANSWER: &str = "抱歉，我暂时无法回答这个问题。";

/// Longest excerpt the stub LLM quotes from one retrieved passage.
const EXCERPT_CHARS: usize = 24;

/// Terminal punctuation the stub LLM keeps out of quoted text so that each
/// template sentence stays one sentence.
const TERMINALS: &str = "。！？…!?.；;";

pub struct StubAsr {
    rtf: f64,
    pacer: Pacer,
}

impl StubAsr {
    pub fn new(rtf: f64) -> Self {
        StubAsr {
            rtf,
            pacer: Pacer::new(),
        }
    }
}

#[async_trait]
impl AsrBackend for StubAsr {
    async fn transcribe(&mut self, audio: &PcmAudio) -> Result<String, BackendError> {
        if audio.samples.is_empty() {
            return Err(BackendError::InvalidInput(Stage::Asr, "empty audio".into()));
        }
        self.pacer.work(secs(self.rtf * audio.duration_secs())).await;
        audio.tag.clone().ok_or(BackendError::UnrecognizedAudio)
    }
}

pub struct StubLlm {
    rate: f64,
}

impl StubLlm {
    pub fn new(tokens_per_second: f64) -> Self {
        StubLlm {
            rate: tokens_per_second,
        }
    }

    /// The full answer the stub produces for `prompt`: one sentence
    /// restating the question, then one sentence per retrieved passage
    /// citing its book and page.
    pub fn answer(prompt: &str) -> String {
        if prompt.trim().is_empty() {
            return FALLBACK_ANSWER.to_owned();
        }
        let parsed = parse_prompt(prompt);
        let question: String = parsed
            .query
            .trim()
            .chars()
            .filter(|c| !TERMINALS.contains(*c))
            .collect();
        let mut out = if question.is_empty() {
            "以下依据检索到的黄河古籍资料作答。".to_owned()
        } else {
            format!("关于「{question}」，以下依据检索到的黄河古籍资料作答。")
        };
        if parsed.records.is_empty() {
            out.push_str("现有资料中未检索到直接记载，请换一种问法再试。");
        }
        for r in &parsed.records {
            let excerpt = excerpt(&r.text);
            out.push_str(&format!("据《{}》第{}页记载：{}。", r.book_title, r.page_number, excerpt));
        }
        out
    }
}

fn excerpt(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| if TERMINALS.contains(c) { '，' } else { c })
        .take(EXCERPT_CHARS)
        .collect();
    cleaned.trim_end_matches('，').to_owned()
}

#[async_trait]
impl LlmBackend for StubLlm {
    async fn stream(&mut self, prompt: &str) -> Result<TokenStream, BackendError> {
        let tokens: Vec<String> = Self::answer(prompt).chars().map(String::from).collect();
        let interval = if self.rate > 0.0 {
            Duration::from_secs_f64(1.0 / self.rate)
        } else {
            Duration::ZERO
        };
        let stream = futures::stream::unfold(
            (tokens.into_iter(), Pacer::new()),
            move |(mut it, mut pacer)| async move {
                let tok = it.next()?;
                pacer.work(interval).await;
                Some((Ok(tok), (it, pacer)))
            },
        );
        Ok(stream.boxed())
    }
}

/// Voice settings forwarded to remote synthesizers. The stub ignores them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtsVoice {
    pub name: String,
    /// Relative speaking rate, e.g. `-20%`.
    pub rate: String,
}

impl Default for TtsVoice {
    fn default() -> Self {
        TtsVoice {
            name: "zh-CN-YunjianNeural".into(),
            rate: "-20%".into(),
        }
    }
}

/// Tone frequency of stub speech.
pub const STUB_TONE_HZ: f64 = 440.0;
/// Block length of stub speech.
pub const BLOCK_SECONDS: f64 = 0.020;

pub struct StubTts {
    rtf: f64,
    seconds_per_char: f64,
    fail_on: Option<u64>,
    calls: u64,
}

impl StubTts {
    pub fn new(rtf: f64, seconds_per_char: f64) -> Self {
        StubTts {
            rtf,
            seconds_per_char,
            fail_on: None,
            calls: 0,
        }
    }

    /// Fail when asked for the `n`th (0-based) sentence.
    pub fn fail_on_sentence(mut self, n: u64) -> Self {
        self.fail_on = Some(n);
        self
    }

    /// Samples the stub produces for `sentence`.
    pub fn sample_count(sentence: &str, seconds_per_char: f64, sample_rate: u32) -> usize {
        let chars = sentence.chars().count() as f64;
        (chars * seconds_per_char * sample_rate as f64).round() as usize
    }

    pub fn render_tone(len: usize, sample_rate: u32) -> Vec<i16> {
        (0..len)
            .map(|i| {
                let t = i as f64 / sample_rate as f64;
                ((t * STUB_TONE_HZ * std::f64::consts::TAU).sin() * 8000.0).round() as i16
            })
            .collect()
    }
}

#[async_trait]
impl TtsBackend for StubTts {
    async fn synthesize(
        &mut self,
        sentence: &str,
        sample_rate: u32,
    ) -> Result<AudioStream, BackendError> {
        let call = self.calls;
        self.calls += 1;
        if sentence.is_empty() {
            return Err(BackendError::InvalidInput(Stage::Tts, "empty sentence".into()));
        }
        if self.fail_on == Some(call) {
            return Err(BackendError::Failed(
                Stage::Tts,
                format!("injected failure on sentence {call}"),
            ));
        }
        let total = Self::sample_count(sentence, self.seconds_per_char, sample_rate);
        let tone = Self::render_tone(total, sample_rate);
        let block = ((sample_rate as f64 * BLOCK_SECONDS).round() as usize).max(1);
        let blocks: Vec<Vec<i16>> = tone.chunks(block).map(<[i16]>::to_vec).collect();
        let rtf = self.rtf;
        let stream = futures::stream::unfold(
            (blocks.into_iter(), Pacer::new()),
            move |(mut it, mut pacer)| async move {
                let b = it.next()?;
                let dur = b.len() as f64 / sample_rate as f64;
                pacer.work(secs(rtf * dur)).await;
                Some((Ok(b), (it, pacer)))
            },
        );
        Ok(stream.boxed())
    }
}

pub struct StubRenderer {
    frame_cost: f64,
    pacer: Pacer,
}

impl StubRenderer {
    pub fn new(frame_cost: f64) -> Self {
        StubRenderer {
            frame_cost,
            pacer: Pacer::new(),
        }
    }
}

#[async_trait]
impl RenderBackend for StubRenderer {
    async fn drive(
        &mut self,
        _audio: &[i16],
        _sample_rate: u32,
        frames: Range<u64>,
    ) -> Result<(), BackendError> {
        for _ in frames {
            self.pacer.work(secs(self.frame_cost)).await;
        }
        Ok(())
    }
}

/// Rule-based structurer: entity mentions come from a surface lexicon and
/// a relation is read off every pair of adjacent mentions in one sentence
/// separated by a short run of plain text, which becomes the predicate.
pub struct StubStructurer {
    lexicon: Lexicon,
}

/// Longest gap between two mentions that still reads as a predicate.
const MAX_PREDICATE_CHARS: usize = 4;
const SENTENCE_END: &str = "。！？；!?;";
const SUMMARY_CHARS: usize = 30;

impl StubStructurer {
    pub fn new(lexicon: Lexicon) -> Self {
        StubStructurer { lexicon }
    }

    pub fn extract(&self, text: &str) -> serde_json::Value {
        let chars: Vec<char> = text.chars().collect();
        let mut entities = Vec::new();
        let mut seen = BTreeSet::new();
        let mut relations = Vec::new();
        let mut seen_rel = BTreeSet::new();

        let mut start = 0;
        while start < chars.len() {
            let end = (start..chars.len())
                .find(|&i| SENTENCE_END.contains(chars[i]))
                .map_or(chars.len(), |i| i + 1);
            let matches = self.lexicon.scan(&chars[start..end]);
            for m in &matches {
                if seen.insert((m.surface, m.entity_type)) {
                    entities.push(json!({
                        "surface": m.surface,
                        "type": m.entity_type.as_str(),
                        "span": [start + m.span.0, start + m.span.1],
                    }));
                }
            }
            for pair in matches.windows(2) {
                let gap = &chars[start + pair[0].span.1..start + pair[1].span.0];
                let plain = gap
                    .iter()
                    .all(|c| !c.is_whitespace() && !c.is_ascii_punctuation() && !is_cjk_punct(*c));
                if !gap.is_empty() && gap.len() <= MAX_PREDICATE_CHARS && plain {
                    let predicate: String = gap.iter().collect();
                    if seen_rel.insert((pair[0].surface, predicate.clone(), pair[1].surface)) {
                        relations.push(json!({
                            "subject": pair[0].surface,
                            "predicate": predicate,
                            "object": pair[1].surface,
                        }));
                    }
                }
            }
            start = end;
        }

        let first_sentence: String = chars
            .iter()
            .take_while(|c| !SENTENCE_END.contains(**c))
            .take(SUMMARY_CHARS)
            .collect();
        json!({
            "translation": format!("译：{text}"),
            "summary": first_sentence,
            "entities": entities,
            "relations": relations,
        })
    }
}

fn is_cjk_punct(c: char) -> bool {
    matches!(c, '\u{3000}'..='\u{303F}' | '\u{FF00}'..='\u{FF0F}' | '\u{FF1A}'..='\u{FF20}' | '…' | '—' | '·' | '“' | '”' | '‘' | '’')
}

#[async_trait]
impl Structurer for StubStructurer {
    async fn structure(
        &mut self,
        request: &StructureRequest,
    ) -> Result<serde_json::Value, BackendError> {
        Ok(self.extract(&request.text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntityType;
    use crate::graph::{format_context_prompt, RetrievalContext, ScoredChunk};
    use tokio::time::Instant;

    fn lexicon() -> Lexicon {
        [
            ("禹".to_owned(), EntityType::Person),
            ("河".to_owned(), EntityType::River),
            ("黄河".to_owned(), EntityType::River),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn structurer_reads_subject_verb_object() {
        let v = StubStructurer::new(lexicon()).extract("禹治河。");
        assert_eq!(
            v["entities"],
            json!([
                {"surface": "禹", "type": "person", "span": [0, 1]},
                {"surface": "河", "type": "river", "span": [2, 3]},
            ])
        );
        assert_eq!(v["relations"], json!([{"subject": "禹", "predicate": "治", "object": "河"}]));
    }

    #[test]
    fn structurer_ignores_pairs_across_punctuation() {
        let v = StubStructurer::new(lexicon()).extract("禹，河。禹见。黄河");
        assert_eq!(v["relations"], json!([]));
    }

    #[tokio::test]
    async fn asr_returns_tag() {
        let mut asr = StubAsr::new(0.0);
        let audio = PcmAudio::fixture("黄河从哪里发源？", 2.0, 16_000);
        assert_eq!(asr.transcribe(&audio).await.unwrap(), "黄河从哪里发源？");
        let empty = PcmAudio::new(vec![], 16_000).with_tag("x");
        assert!(matches!(asr.transcribe(&empty).await, Err(BackendError::InvalidInput(..))));
        let untagged = PcmAudio::new(vec![0; 100], 16_000);
        assert_eq!(asr.transcribe(&untagged).await, Err(BackendError::UnrecognizedAudio));
    }

    #[tokio::test]
    async fn asr_pacing_matches_rtf() {
        let mut asr = StubAsr::new(0.01460);
        let audio = PcmAudio::fixture("黄河从哪里发源？", 1.0, 16_000);
        let t = Instant::now();
        asr.transcribe(&audio).await.unwrap();
        let e = t.elapsed().as_secs_f64();
        assert!((0.0146 * 0.85..0.0146 * 1.6).contains(&e), "elapsed {e}");
    }

    #[tokio::test]
    async fn llm_quotes_retrieved_titles() {
        let ctx = RetrievalContext {
            chunks: vec![ScoredChunk {
                chunk_id: "c1".into(),
                score: 2,
                book_title: "水经注".into(),
                page_number: 3,
                text: "黄河发源于巴颜喀拉山。".into(),
            }],
            ..RetrievalContext::default()
        };
        let prompt = format_context_prompt(&ctx, "黄河从哪里发源？", 2000).unwrap();
        let mut llm = StubLlm::new(0.0);
        let tokens: Vec<String> = llm.stream(&prompt).await.unwrap().map(|t| t.unwrap()).collect().await;
        assert!(tokens.iter().all(|t| t.chars().count() == 1));
        let answer: String = tokens.concat();
        assert!(answer.contains("水经注"), "{answer}");
        assert!(answer.contains("黄河从哪里发源"));
        assert_eq!(answer, StubLlm::answer(&prompt));
    }

    #[tokio::test]
    async fn llm_empty_prompt_falls_back() {
        let mut llm = StubLlm::new(0.0);
        let answer: String = llm.stream("").await.unwrap().map(|t| t.unwrap()).collect::<Vec<_>>().await.concat();
        assert_eq!(answer, FALLBACK_ANSWER);
    }

    #[tokio::test]
    async fn llm_rate_is_paced() {
        // 100 tokens at 36.79/s should take 100 / 36.79 = 2.718 s
        let mut llm = StubLlm::new(36.79);
        let prompt = "黄".repeat(80);
        assert!(StubLlm::answer(&prompt).chars().count() >= 100);
        let start = Instant::now();
        let count = llm.stream(&prompt).await.unwrap().take(100).count().await;
        let e = start.elapsed().as_secs_f64();
        assert_eq!(count, 100);
        let expected = 100.0 / 36.79;
        assert!((e - expected).abs() <= expected * 0.10, "elapsed {e} expected {expected}");
    }

    #[tokio::test]
    async fn tts_duration_model() {
        let mut tts = StubTts::new(0.0, 0.25);
        let blocks: Vec<Vec<i16>> = tts.synthesize("黄河发源", 16_000).await.unwrap().map(|b| b.unwrap()).collect().await;
        assert_eq!(blocks.len(), 50);
        assert_eq!(blocks.iter().map(Vec::len).sum::<usize>(), 16_000);
        let one: usize = tts.synthesize("河", 16_000).await.unwrap().map(|b| b.unwrap().len()).collect::<Vec<_>>().await.iter().sum();
        assert_eq!(one, 4_000);
    }

    #[tokio::test]
    async fn tts_is_deterministic() {
        let mut a = StubTts::new(0.0, 0.25);
        let mut b = StubTts::new(0.0, 0.25);
        let x: Vec<_> = a.synthesize("禹治河。", 16_000).await.unwrap().collect().await;
        let y: Vec<_> = b.synthesize("禹治河。", 16_000).await.unwrap().collect().await;
        assert_eq!(x, y);
    }

    #[tokio::test]
    async fn tts_pacing_matches_rtf() {
        let mut tts = StubTts::new(0.27448, 0.25);
        let start = Instant::now();
        let n = tts.synthesize("黄河发源", 16_000).await.unwrap().count().await;
        let e = start.elapsed().as_secs_f64();
        assert_eq!(n, 50);
        assert!((e - 0.27448).abs() <= 0.27448 * 0.10, "elapsed {e}");
    }

    #[tokio::test]
    async fn tts_fault_injection() {
        let mut tts = StubTts::new(0.0, 0.25).fail_on_sentence(1);
        assert!(tts.synthesize("甲。", 16_000).await.is_ok());
        assert!(matches!(tts.synthesize("乙。", 16_000).await, Err(BackendError::Failed(Stage::Tts, _))));
    }

    #[tokio::test]
    async fn renderer_paces_per_frame() {
        let mut r = StubRenderer::new(0.0039);
        let start = Instant::now();
        for i in 0..100u64 {
            r.drive(&[], 16_000, i..i + 1).await.unwrap();
        }
        let e = start.elapsed().as_secs_f64();
        assert!((e - 0.39).abs() <= 0.39 * 0.10, "elapsed {e}");
    }
}
