use std::collections::{BTreeMap, BTreeSet};

use super::{normalize_entity_name, Entity, EntityId, GraphError, KnowledgeGraph, RelationEdge};
use crate::corpus::{ChunkId, EntityMention, EntityType, ReviewState, StructuredChunk};

/// Entities merge when their normalized surface and type agree.
pub type MergeKey = (String, EntityType);

/// Groups mentions by `(normalize(surface), type)`. The result does not
/// depend on mention order. Mentions whose surface normalizes to nothing
/// are dropped.
pub fn dedup_entities<'a, I>(mentions: I) -> (BTreeMap<EntityId, Entity>, BTreeMap<MergeKey, EntityId>)
where
    I: IntoIterator<Item = (&'a EntityMention, &'a ChunkId)>,
{
    let mut entities: BTreeMap<EntityId, Entity> = BTreeMap::new();
    let mut merge_map = BTreeMap::new();
    for (mention, chunk) in mentions {
        let name = normalize_entity_name(&mention.surface);
        if name.is_empty() {
            continue;
        }
        let id = EntityId::for_key(&name, mention.entity_type);
        let entry = entities.entry(id.clone()).or_insert_with(|| Entity {
            entity_id: id.clone(),
            canonical_name: name.clone(),
            entity_type: mention.entity_type,
            aliases: BTreeSet::new(),
            chunk_refs: BTreeSet::new(),
        });
        if mention.surface != name {
            entry.aliases.insert(mention.surface.clone());
        }
        entry.chunk_refs.insert(chunk.clone());
        merge_map.insert((name, mention.entity_type), id);
    }
    (entities, merge_map)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Admit chunks that have not been accepted by review.
    pub admit_unreviewed: bool,
}

impl BuildOptions {
    pub fn unreviewed() -> Self {
        BuildOptions {
            admit_unreviewed: true,
        }
    }
}

/// Builds the graph from accepted chunks (or all chunks with
/// [`BuildOptions::admit_unreviewed`]). Relations are resolved through the
/// merge map of the mention with the same surface in the same chunk.
pub fn build_graph<'a, I>(chunks: I, opts: BuildOptions) -> Result<KnowledgeGraph, GraphError>
where
    I: IntoIterator<Item = &'a StructuredChunk>,
{
    let mut chunk_index: BTreeMap<ChunkId, StructuredChunk> = BTreeMap::new();
    for c in chunks {
        if !opts.admit_unreviewed && c.status.state != ReviewState::Accepted {
            continue;
        }
        if let Some(prev) = chunk_index.get(&c.chunk_id) {
            if prev != c {
                return Err(GraphError::DuplicateChunk(c.chunk_id.clone()));
            }
            continue;
        }
        chunk_index.insert(c.chunk_id.clone(), c.clone());
    }

    let (entities, merge_map) = dedup_entities(
        chunk_index
            .values()
            .flat_map(|c| c.entities.iter().map(move |m| (m, &c.chunk_id))),
    );

    let mut triples: BTreeMap<(EntityId, String, EntityId), BTreeSet<ChunkId>> = BTreeMap::new();
    for c in chunk_index.values() {
        let resolve = |surface: &str| -> Option<EntityId> {
            let m = c.entities.iter().find(|m| m.surface == surface)?;
            merge_map
                .get(&(normalize_entity_name(&m.surface), m.entity_type))
                .cloned()
        };
        for r in &c.relations {
            let (Some(s), Some(o)) = (resolve(&r.subject_surface), resolve(&r.object_surface)) else {
                return Err(GraphError::IntegrityError(c.chunk_id.clone()));
            };
            let predicate = normalize_entity_name(&r.predicate);
            if predicate.is_empty() {
                return Err(GraphError::IntegrityError(c.chunk_id.clone()));
            }
            triples.entry((s, predicate, o)).or_default().insert(c.chunk_id.clone());
        }
    }
    let edges = triples
        .into_iter()
        .map(|((subject_id, predicate, object_id), chunk_refs)| RelationEdge {
            subject_id,
            predicate,
            object_id,
            chunk_refs,
        })
        .collect();

    let mut g = KnowledgeGraph {
        entities,
        edges,
        chunk_index,
        adjacency: BTreeMap::new(),
    };
    g.rebuild_adjacency();
    Ok(g)
}
