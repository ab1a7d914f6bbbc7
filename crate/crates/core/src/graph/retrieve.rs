//! Two-pass retrieval. The entity pass matches keywords against entity
//! names; the edge pass matches them against predicates and endpoint
//! names. Both sets are then grown through adjacency `depth` times and
//! every chunk they reference is scored
//!
//! `score(c) = entity_weight * |{e : c in e.chunk_refs}| + edge_weight * |{r : c in r.chunk_refs}|`
//!
//! over the final sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{extract_keywords, normalize_entity_name, EntityId, GraphError, KnowledgeGraph};
use crate::corpus::{ChunkId, EntityType};

pub const MAX_DEPTH: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub k: usize,
    pub depth: u8,
    pub entity_weight: u32,
    pub edge_weight: u32,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        RetrievalParams {
            k: 5,
            depth: 1,
            entity_weight: 2,
            edge_weight: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedEntity {
    pub entity_id: EntityId,
    pub name: String,
    pub entity_type: EntityType,
    /// Expansion step at which the entity joined; 0 for a keyword match.
    pub hop: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedEdge {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub hop: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub chunk_id: ChunkId,
    pub score: u32,
    pub book_title: String,
    pub page_number: u32,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalContext {
    pub keywords_used: Vec<String>,
    /// Ordered by `(hop, entity_id)`.
    pub matched_entities: Vec<MatchedEntity>,
    /// Ordered by `(hop, edge index)`.
    pub matched_edges: Vec<MatchedEdge>,
    /// Ordered by `(score desc, chunk_id asc)`, at most `k` long.
    pub chunks: Vec<ScoredChunk>,
}

pub fn retrieve_context(
    g: &KnowledgeGraph,
    query: &str,
    k: usize,
    depth: u8,
) -> Result<RetrievalContext, GraphError> {
    retrieve_with(
        g,
        query,
        &RetrievalParams {
            k,
            depth,
            ..RetrievalParams::default()
        },
    )
}

pub fn retrieve_with(
    g: &KnowledgeGraph,
    query: &str,
    p: &RetrievalParams,
) -> Result<RetrievalContext, GraphError> {
    if p.k == 0 {
        return Err(GraphError::InvalidK);
    }
    if p.depth > MAX_DEPTH {
        return Err(GraphError::InvalidDepth(p.depth));
    }
    let keywords = extract_keywords(query, &g.known_surfaces());
    let names: BTreeSet<String> = keywords.iter().map(|k| normalize_entity_name(k)).collect();

    // entity id -> hop, edge index -> hop
    let mut ents: BTreeMap<&EntityId, u8> = g
        .entities
        .values()
        .filter(|e| names.contains(&e.canonical_name))
        .map(|e| (&e.entity_id, 0))
        .collect();
    let mut edges: BTreeMap<usize, u8> = g
        .edges
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            names.contains(&r.predicate)
                || names.contains(&g.entities[&r.subject_id].canonical_name)
                || names.contains(&g.entities[&r.object_id].canonical_name)
        })
        .map(|(i, _)| (i, 0))
        .collect();

    for hop in 1..=p.depth {
        let frontier: Vec<&EntityId> = ents.keys().copied().collect();
        for id in frontier {
            for &i in &g.adjacency[id] {
                edges.entry(i).or_insert(hop);
            }
        }
        for &i in edges.keys() {
            let r = &g.edges[i];
            ents.entry(&r.subject_id).or_insert(hop);
            ents.entry(&r.object_id).or_insert(hop);
        }
    }

    let mut scores: BTreeMap<&ChunkId, u32> = BTreeMap::new();
    for id in ents.keys() {
        for c in &g.entities[*id].chunk_refs {
            *scores.entry(c).or_default() += p.entity_weight;
        }
    }
    for &i in edges.keys() {
        for c in &g.edges[i].chunk_refs {
            *scores.entry(c).or_default() += p.edge_weight;
        }
    }
    let mut ranked: Vec<(&ChunkId, u32)> = scores.into_iter().filter(|(_, s)| *s > 0).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(p.k);

    let chunks = ranked
        .into_iter()
        .map(|(id, score)| {
            let c = &g.chunk_index[id];
            ScoredChunk {
                chunk_id: id.clone(),
                score,
                book_title: c.basic.book_title.clone(),
                page_number: c.basic.page_number,
                text: c.basic.original_text.clone(),
            }
        })
        .collect();

    let mut matched_entities: Vec<MatchedEntity> = ents
        .into_iter()
        .map(|(id, hop)| {
            let e = &g.entities[id];
            MatchedEntity {
                entity_id: id.clone(),
                name: e.canonical_name.clone(),
                entity_type: e.entity_type,
                hop,
            }
        })
        .collect();
    matched_entities.sort_by(|a, b| a.hop.cmp(&b.hop).then_with(|| a.entity_id.cmp(&b.entity_id)));
    let mut edge_list: Vec<(usize, u8)> = edges.into_iter().collect();
    edge_list.sort_by_key(|&(i, hop)| (hop, i));
    let matched_edges = edge_list
        .into_iter()
        .map(|(i, hop)| {
            let r = &g.edges[i];
            MatchedEdge {
                subject: g.entities[&r.subject_id].canonical_name.clone(),
                predicate: r.predicate.clone(),
                object: g.entities[&r.object_id].canonical_name.clone(),
                hop,
            }
        })
        .collect();

    Ok(RetrievalContext {
        keywords_used: keywords,
        matched_entities,
        matched_edges,
        chunks,
    })
}
