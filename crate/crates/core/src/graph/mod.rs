//! Knowledge graph over structured chunks: deduplicated entities as nodes,
//! relations as edges, both carrying the chunks they were read from.

mod build;
mod keywords;
mod persist;
mod prompt;
mod retrieve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

pub use build::{build_graph, dedup_entities, BuildOptions, MergeKey};
pub use keywords::{extract_keywords, STOPWORDS};
pub use persist::{load_graph, persist_graph, read_graph, write_graph, GRAPH_VERSION};
pub use prompt::{
    format_context_prompt, parse_prompt, ParsedPrompt, PromptRecord, PREAMBLE, QUERY_LABEL,
    SOURCES_LABEL,
};
pub use retrieve::{
    retrieve_context, retrieve_with, MatchedEdge, MatchedEntity, RetrievalContext, MAX_DEPTH,
    RetrievalParams, ScoredChunk,
};

use crate::corpus::{ChunkId, EntityType, StructuredChunk};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl EntityId {
    /// Stable id derived from the merge key.
    pub fn for_key(canonical_name: &str, entity_type: EntityType) -> Self {
        EntityId(format!(
            "ent-{}",
            crate::corpus::content_hash(&[entity_type.as_str(), canonical_name])
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_id: EntityId,
    pub canonical_name: String,
    pub entity_type: EntityType,
    /// Raw surfaces that normalize to `canonical_name` but differ from it.
    pub aliases: BTreeSet<String>,
    pub chunk_refs: BTreeSet<ChunkId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub subject_id: EntityId,
    pub predicate: String,
    pub object_id: EntityId,
    pub chunk_refs: BTreeSet<ChunkId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    pub entities: BTreeMap<EntityId, Entity>,
    /// Sorted by `(subject_id, predicate, object_id)`, one edge per triple.
    pub edges: Vec<RelationEdge>,
    pub chunk_index: BTreeMap<ChunkId, StructuredChunk>,
    /// Edge indices incident to each entity; every entity has an entry.
    pub adjacency: BTreeMap<EntityId, BTreeSet<usize>>,
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("chunk {0} has a relation naming an entity it does not declare")]
    IntegrityError(ChunkId),
    #[error("graph integrity violated: {0}")]
    Inconsistent(String),
    #[error("chunk {0} appears twice with different content")]
    DuplicateChunk(ChunkId),
    #[error("corrupt graph file at line {line}: {reason}")]
    CorruptGraphFile { line: usize, reason: String },
    #[error("unsupported graph file version {0:?}")]
    UnsupportedVersion(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("expansion depth {0} is not one of 0, 1, 2")]
    InvalidDepth(u8),
    #[error("prompt budget of {budget} characters cannot hold the query ({needed} needed)")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Canonical form of an entity surface: NFC, trimmed, with every internal
/// whitespace run replaced by one space.
pub fn normalize_entity_name(surface: &str) -> String {
    let composed: String = surface.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out.nfc().collect()
}

impl KnowledgeGraph {
    pub fn entity_by_name(&self, name: &str, entity_type: EntityType) -> Option<&Entity> {
        self.entities.get(&EntityId::for_key(&normalize_entity_name(name), entity_type))
    }

    pub fn degree(&self, id: &EntityId) -> usize {
        self.adjacency.get(id).map_or(0, BTreeSet::len)
    }

    /// Surfaces the keyword extractor treats as known terms.
    pub fn known_surfaces(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in self.entities.values() {
            out.insert(e.canonical_name.clone());
            for a in &e.aliases {
                let trimmed = a.trim();
                if !trimmed.is_empty() {
                    out.insert(trimmed.to_owned());
                }
            }
        }
        out
    }

    pub(crate) fn rebuild_adjacency(&mut self) {
        let mut adjacency: BTreeMap<EntityId, BTreeSet<usize>> =
            self.entities.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        for (i, e) in self.edges.iter().enumerate() {
            adjacency.entry(e.subject_id.clone()).or_default().insert(i);
            adjacency.entry(e.object_id.clone()).or_default().insert(i);
        }
        self.adjacency = adjacency;
    }

    /// Checks that every id resolves, adjacency mirrors the edge list and no
    /// two entities share a merge key.
    pub fn check_integrity(&self) -> Result<(), GraphError> {
        let bad = |m: String| Err(GraphError::Inconsistent(m));
        let mut keys = BTreeSet::new();
        for (id, e) in &self.entities {
            if id != &e.entity_id {
                return bad(format!("entity keyed {id} carries id {}", e.entity_id));
            }
            if e.canonical_name != normalize_entity_name(&e.canonical_name) {
                return bad(format!("entity {id} name is not normalized"));
            }
            if e.chunk_refs.is_empty() {
                return bad(format!("entity {id} has no chunk refs"));
            }
            if let Some(a) = e.aliases.iter().find(|a| normalize_entity_name(a) != e.canonical_name) {
                return bad(format!("alias {a:?} of {id} does not normalize to its name"));
            }
            if !keys.insert((e.canonical_name.as_str(), e.entity_type)) {
                return bad(format!("duplicate entity key {:?}", e.canonical_name));
            }
            if let Some(c) = e.chunk_refs.iter().find(|c| !self.chunk_index.contains_key(*c)) {
                return bad(format!("entity {id} refers to unknown chunk {c}"));
            }
        }
        for (i, edge) in self.edges.iter().enumerate() {
            for end in [&edge.subject_id, &edge.object_id] {
                if !self.entities.contains_key(end) {
                    return bad(format!("edge {i} endpoint {end} is unknown"));
                }
            }
            if edge.chunk_refs.is_empty() {
                return bad(format!("edge {i} has no chunk refs"));
            }
            if let Some(c) = edge.chunk_refs.iter().find(|c| !self.chunk_index.contains_key(*c)) {
                return bad(format!("edge {i} refers to unknown chunk {c}"));
            }
        }
        let mut expected = self.clone();
        expected.rebuild_adjacency();
        if expected.adjacency != self.adjacency {
            return bad("adjacency does not match edges".into());
        }
        Ok(())
    }
}
