use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub const DEFAULT_SENTENCE_PUNCTUATION: &str = "。！？…!?.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Characters that end a sentence. The comma is deliberately absent.
    pub sentence_punctuation: String,
    pub sample_rate: u32,
    pub target_fps: u32,
    /// Events buffered by each inter-stage queue.
    pub queue_capacity: usize,
    pub retrieval_k: usize,
    pub retrieval_depth: u8,
    /// Prompt length limit in characters.
    pub prompt_budget_chars: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sentence_punctuation: DEFAULT_SENTENCE_PUNCTUATION.to_owned(),
            sample_rate: 16_000,
            target_fps: 25,
            queue_capacity: 64,
            retrieval_k: 5,
            retrieval_depth: 1,
            prompt_budget_chars: 4000,
        }
    }
}

impl PipelineConfig {
    pub fn punctuation(&self) -> BTreeSet<char> {
        self.sentence_punctuation.chars().collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sentence_punctuation.is_empty() {
            return Err("pipeline.sentence_punctuation must not be empty".into());
        }
        if self.sample_rate == 0 {
            return Err("pipeline.sample_rate must be > 0".into());
        }
        if self.target_fps == 0 {
            return Err("pipeline.target_fps must be > 0".into());
        }
        if self.queue_capacity == 0 {
            return Err("pipeline.queue_capacity must be >= 1".into());
        }
        if self.retrieval_k == 0 {
            return Err("pipeline.retrieval_k must be >= 1".into());
        }
        if self.retrieval_depth > crate::graph::MAX_DEPTH {
            return Err(format!(
                "pipeline.retrieval_depth must be at most {}, got {}",
                crate::graph::MAX_DEPTH,
                self.retrieval_depth
            ));
        }
        Ok(())
    }
}
