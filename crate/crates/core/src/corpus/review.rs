//! Two-stage proofreading workflow.
//!
//! ```text
//! Draft ──sample──▶ Sampled ──stage 1──▶ Stage1Annotated ──stage 2 pass──▶ Accepted
//!   ▲                                          │
//!   └────────reopen──── Returned ◀──stage 2 flag┘
//! ```
//!
//! `Stage2Verified` names the point where the second reviewer has checked
//! the first reviewer's annotations. A stage-2 decision passes through it
//! and lands on `Accepted` or `Returned` within one step, so a chunk is
//! never persisted in it by this crate; it admits no further review.

use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ChunkId, CorpusError, StructuredChunk};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    Draft,
    Sampled,
    Stage1Annotated,
    Stage2Verified,
    Accepted,
    Returned,
}

impl ReviewState {
    pub const ALL: [ReviewState; 6] = [
        ReviewState::Draft,
        ReviewState::Sampled,
        ReviewState::Stage1Annotated,
        ReviewState::Stage2Verified,
        ReviewState::Accepted,
        ReviewState::Returned,
    ];

    /// The state a review decision leads to, if the current state admits
    /// that stage.
    pub fn after_review(self, stage: ReviewStage, decision: Decision) -> Result<ReviewState, CorpusError> {
        match (self, stage, decision) {
            (ReviewState::Sampled, ReviewStage::One, _) => Ok(ReviewState::Stage1Annotated),
            (ReviewState::Stage1Annotated, ReviewStage::Two, Decision::Pass) => Ok(ReviewState::Accepted),
            (ReviewState::Stage1Annotated, ReviewStage::Two, Decision::Flag) => Ok(ReviewState::Returned),
            _ => Err(CorpusError::InvalidTransition {
                current: self,
                attempted: format!("{stage:?}/{decision:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStage {
    One,
    Two,
}

impl ReviewStage {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(ReviewStage::One),
            2 => Some(ReviewStage::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Pass,
    Flag,
}

/// The closed set of hallucination categories reviewers annotate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    IncorrectTranslation,
    Overgeneralization,
    ExcessiveSupplementation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub category: ErrorCategory,
    pub note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub state: ReviewState,
    pub reviewer_id: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewStatus {
    pub state: ReviewState,
    pub annotations: Vec<ErrorAnnotation>,
    pub history: Vec<HistoryEntry>,
}

impl Default for ReviewStatus {
    fn default() -> Self {
        ReviewStatus {
            state: ReviewState::Draft,
            annotations: Vec::new(),
            history: Vec::new(),
        }
    }
}

impl ReviewStatus {
    fn enter(&mut self, state: ReviewState, reviewer_id: &str, timestamp_ms: u64) {
        self.state = state;
        self.history.push(HistoryEntry {
            state,
            reviewer_id: reviewer_id.to_owned(),
            timestamp_ms,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub stage: ReviewStage,
    pub reviewer_id: String,
    pub annotations: Vec<ErrorAnnotation>,
    pub decision: Decision,
    pub timestamp_ms: u64,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Reviewer id recorded when the sampler moves a chunk to `Sampled`.
pub const SAMPLER_ID: &str = "sampler";

/// Draws `ceil(rate * n)` chunks uniformly without replacement and moves
/// them to `Sampled`. The selection depends only on the chunk order, the
/// rate and the seed; ids are returned in input order.
pub fn sample_for_review(
    chunks: &mut [StructuredChunk],
    rate: f64,
    seed: u64,
) -> Result<Vec<ChunkId>, CorpusError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(CorpusError::InvalidRate(rate));
    }
    if let Some(c) = chunks.iter().find(|c| c.status.state != ReviewState::Draft) {
        return Err(CorpusError::NotDraft(c.chunk_id.clone()));
    }
    let n = chunks.len();
    let k = ((rate * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    let ts = now_ms();
    Ok(picked
        .into_iter()
        .map(|i| {
            chunks[i].status.enter(ReviewState::Sampled, SAMPLER_ID, ts);
            chunks[i].chunk_id.clone()
        })
        .collect())
}

/// Applies one reviewer decision. On error the chunk is left untouched.
pub fn apply_review(chunk: &mut StructuredChunk, record: &ReviewRecord) -> Result<(), CorpusError> {
    let next = chunk.status.state.after_review(record.stage, record.decision)?;
    chunk.status.annotations.extend(record.annotations.iter().cloned());
    chunk.status.enter(next, &record.reviewer_id, record.timestamp_ms);
    Ok(())
}

/// Sends a returned chunk back to `Draft` for another proofreading round.
pub fn reopen_returned(
    chunk: &mut StructuredChunk,
    reviewer_id: &str,
    timestamp_ms: u64,
) -> Result<(), CorpusError> {
    if chunk.status.state != ReviewState::Returned {
        return Err(CorpusError::InvalidTransition {
            current: chunk.status.state,
            attempted: "Reopen".into(),
        });
    }
    chunk.status.enter(ReviewState::Draft, reviewer_id, timestamp_ms);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn record(stage: ReviewStage, decision: Decision) -> ReviewRecord {
        ReviewRecord {
            stage,
            reviewer_id: "r1".into(),
            annotations: vec![],
            decision,
            timestamp_ms: 7,
        }
    }

    fn chunk_in(state: ReviewState) -> StructuredChunk {
        let mut c = synthetic::random_corpus(1, 1).remove(0);
        c.status.state = state;
        c
    }

    #[test]
    fn stage_one_then_pass_accepts() {
        let mut c = chunk_in(ReviewState::Sampled);
        let mut r = record(ReviewStage::One, Decision::Flag);
        r.annotations.push(ErrorAnnotation {
            category: ErrorCategory::Overgeneralization,
            note: "too broad".into(),
            span: None,
        });
        apply_review(&mut c, &r).unwrap();
        assert_eq!(c.status.state, ReviewState::Stage1Annotated);
        assert_eq!(c.status.annotations.len(), 1);
        apply_review(&mut c, &record(ReviewStage::Two, Decision::Pass)).unwrap();
        assert_eq!(c.status.state, ReviewState::Accepted);
        assert_eq!(c.status.history.len(), 2);
    }

    #[test]
    fn stage_two_on_draft_is_invalid() {
        for d in [Decision::Pass, Decision::Flag] {
            let mut c = chunk_in(ReviewState::Draft);
            let before = c.clone();
            let err = apply_review(&mut c, &record(ReviewStage::Two, d)).unwrap_err();
            assert!(matches!(err, CorpusError::InvalidTransition { current: ReviewState::Draft, .. }));
            assert_eq!(c, before);
        }
    }

    #[test]
    fn returned_chunks_reopen_to_draft() {
        let mut c = chunk_in(ReviewState::Stage1Annotated);
        apply_review(&mut c, &record(ReviewStage::Two, Decision::Flag)).unwrap();
        assert_eq!(c.status.state, ReviewState::Returned);
        reopen_returned(&mut c, "r2", 9).unwrap();
        assert_eq!(c.status.state, ReviewState::Draft);
        assert!(reopen_returned(&mut c, "r2", 9).is_err());
    }

    #[test]
    fn full_sample_selects_everything() {
        let mut chunks = synthetic::random_corpus(3, 10);
        let ids = sample_for_review(&mut chunks, 1.0, 0).unwrap();
        assert_eq!(ids.len(), 10);
        assert!(chunks.iter().all(|c| c.status.state == ReviewState::Sampled));
    }

    #[test]
    fn sampling_is_deterministic() {
        let base = synthetic::random_corpus(5, 100);
        let a = sample_for_review(&mut base.clone(), 0.1, 42).unwrap();
        let b = sample_for_review(&mut base.clone(), 0.1, 42).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        let c = sample_for_review(&mut base.clone(), 0.1, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rate_must_be_in_unit_interval() {
        let mut chunks = synthetic::random_corpus(5, 3);
        for r in [0.0, -0.1, 1.01, f64::NAN] {
            assert!(matches!(sample_for_review(&mut chunks, r, 1), Err(CorpusError::InvalidRate(_))));
        }
    }

    #[test]
    fn sampling_requires_drafts() {
        let mut chunks = synthetic::random_corpus(5, 3);
        chunks[1].status.state = ReviewState::Accepted;
        assert!(matches!(sample_for_review(&mut chunks, 0.5, 1), Err(CorpusError::NotDraft(_))));
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        // Monte-Carlo: 50 seeds x 25% of 1000 chunks; each chunk should be
        // picked in about a quarter of the runs.
        let base = synthetic::random_corpus(11, 1000);
        let mut hits = vec![0u32; base.len()];
        for seed in 0..50 {
            let mut chunks = base.clone();
            let ids = sample_for_review(&mut chunks, 0.25, seed).unwrap();
            assert_eq!(ids.len(), 250);
            for (i, c) in chunks.iter().enumerate() {
                if c.status.state == ReviewState::Sampled {
                    hits[i] += 1;
                }
            }
        }
        let freqs: Vec<f64> = hits.iter().map(|&h| h as f64 / 50.0).collect();
        let mean = freqs.iter().sum::<f64>() / freqs.len() as f64;
        assert!((mean - 0.25).abs() < 1e-9);
        // Binomial(50, 0.25) has sd 0.061 in frequency; individual chunks
        // can stray past 0.15/0.35, the bulk must not.
        let inside = freqs.iter().filter(|f| (0.15..=0.35).contains(*f)).count();
        assert!(inside as f64 / freqs.len() as f64 > 0.85, "inside {inside}");
    }
}
