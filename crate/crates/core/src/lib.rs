//! RiverEcho core: corpus structuring, knowledge-graph retrieval and the
//! streaming speech-to-talking-head dialogue pipeline.
//!
//! The crate is organised by subsystem:
//!
//! - [`corpus`]: source documents, segmentation, structuring and the
//!   two-stage proofreading workflow.
//! - [`graph`]: entity deduplication, graph construction, persistence and
//!   dual-level retrieval.
//! - [`pipeline`]: the session orchestrator, sentence accumulator and
//!   per-stage metrics.
//! - [`backends`]: stage interfaces with paced stub and remote HTTP
//!   implementations.
//! - [`gateway`]: wire encoding, metrics retention and rating aggregation
//!   shared by the server and CLI.

pub mod backends;
pub mod corpus;
pub mod gateway;
pub mod graph;
pub mod pipeline;
pub mod synthetic;

pub use backends::{BackendError, BackendSet, StubPacing};
pub use corpus::{
    EntityMention, EntityType, Period, RelationMention, ReviewState, SourceDocument,
    StructuredChunk, Theme, UnstructuredChunk,
};
pub use graph::{KnowledgeGraph, RetrievalContext};
pub use pipeline::{ModuleMetrics, PipelineConfig, SessionMetrics, StageEvent};
