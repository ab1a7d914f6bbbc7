//! Corpus ingestion: documents are segmented into unstructured chunks,
//! structured into annotated chunks by a [`Structurer`](crate::backends::Structurer)
//! and then proofread through a two-stage review workflow.

mod document;
pub mod io;
mod lexicon;
mod review;
mod segment;
mod stats;
mod structure;

pub use document::{
    BasicInfo, ChunkId, DocId, EntityMention, EntityType, Period, RelationMention,
    SourceDocument, StructuredChunk, Theme, UnstructuredChunk, CHUNK_SCHEMA,
};
pub(crate) use document::content_hash;
pub use lexicon::{Lexicon, LexiconMatch};
pub use review::{
    apply_review, reopen_returned, sample_for_review, Decision, ErrorAnnotation, ErrorCategory,
    HistoryEntry, ReviewRecord, ReviewStage, ReviewState, ReviewStatus,
};
pub use segment::{segment_document, SegmentPolicy, DEFAULT_BOUNDARY_PUNCTUATION, DEFAULT_MAX_CHARS};
pub use stats::{corpus_stats, CorpusStats};
pub use structure::{structure_chunk, StructureRequest};

use crate::backends::BackendError;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("document {0} has an empty body")]
    EmptyDocument(DocId),
    #[error("document {doc_id}: page break {offset} is out of order or out of range")]
    InvalidPageBreaks { doc_id: DocId, offset: usize },
    #[error("invalid segmentation policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("structured chunk violates schema: {}", .0.join(", "))]
    SchemaViolation(Vec<String>),
    #[error("structurer backend unavailable: {0}")]
    BackendUnavailable(#[from] BackendError),
    #[error("sampling rate {0} is outside (0, 1]")]
    InvalidRate(f64),
    #[error("chunks must be in draft state to be sampled ({0} is not)")]
    NotDraft(ChunkId),
    #[error("invalid review transition from {current:?} via {attempted}")]
    InvalidTransition {
        current: ReviewState,
        attempted: String,
    },
    #[error("unknown chunk {0}")]
    UnknownChunk(ChunkId),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
