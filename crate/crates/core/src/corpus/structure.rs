use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::document::{BasicInfo, EntityMention, EntityType, RelationMention, CHUNK_SCHEMA};
use super::review::ReviewStatus;
use super::{CorpusError, SourceDocument, StructuredChunk, UnstructuredChunk};
use crate::backends::Structurer;

/// Default structuring template sent to remote structurers. Remote
/// deployments are expected to override it.
pub const DEFAULT_TEMPLATE: &str = "Return a JSON object with fields translation, summary, \
entities (surface, type) and relations (subject, predicate, object) for the passage.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureRequest {
    pub chunk_id: String,
    pub book_title: String,
    pub text: String,
    pub template: String,
}

impl StructureRequest {
    pub fn for_chunk(chunk: &UnstructuredChunk, doc: &SourceDocument) -> Self {
        StructureRequest {
            chunk_id: chunk.chunk_id.to_string(),
            book_title: doc.title.clone(),
            text: chunk.text.clone(),
            template: DEFAULT_TEMPLATE.to_owned(),
        }
    }
}

/// Runs `structurer` over one chunk and validates its output into a draft
/// [`StructuredChunk`].
pub async fn structure_chunk(
    chunk: &UnstructuredChunk,
    doc: &SourceDocument,
    structurer: &mut dyn Structurer,
) -> Result<StructuredChunk, CorpusError> {
    if chunk.text.is_empty() {
        return Err(CorpusError::SchemaViolation(vec!["original_text".into()]));
    }
    let raw = structurer.structure(&StructureRequest::for_chunk(chunk, doc)).await?;
    let structured = decode(&raw, chunk, doc)?;
    let bad = structured.violations();
    if !bad.is_empty() {
        return Err(CorpusError::SchemaViolation(bad));
    }
    Ok(structured)
}

fn decode(
    raw: &Value,
    chunk: &UnstructuredChunk,
    doc: &SourceDocument,
) -> Result<StructuredChunk, CorpusError> {
    let mut bad = Vec::new();
    let text_field = |key: &str, bad: &mut Vec<String>| match raw.get(key).and_then(Value::as_str) {
        Some(s) => s.to_owned(),
        None => {
            bad.push(key.to_owned());
            String::new()
        }
    };
    let translation = text_field("translation", &mut bad);
    let summary = text_field("summary", &mut bad);

    let mut entities = Vec::new();
    match raw.get("entities").and_then(Value::as_array) {
        None => bad.push("entities".into()),
        Some(items) => {
            for (i, item) in items.iter().enumerate() {
                let surface = item.get("surface").and_then(Value::as_str);
                let ty = item.get("type").and_then(Value::as_str).and_then(EntityType::parse);
                let span = item.get("span").and_then(Value::as_array).and_then(|a| {
                    match (a.first()?.as_u64(), a.get(1)?.as_u64()) {
                        (Some(s), Some(e)) if a.len() == 2 && s < e => Some((s as usize, e as usize)),
                        _ => None,
                    }
                });
                match (surface, ty) {
                    (Some(surface), Some(entity_type)) => entities.push(EntityMention {
                        surface: surface.to_owned(),
                        entity_type,
                        span,
                    }),
                    (None, _) => bad.push(format!("entities[{i}].surface")),
                    (_, None) => bad.push(format!("entities[{i}].type")),
                }
            }
        }
    }

    let mut relations = Vec::new();
    match raw.get("relations").and_then(Value::as_array) {
        None => bad.push("relations".into()),
        Some(items) => {
            for (i, item) in items.iter().enumerate() {
                let get = |k: &str| item.get(k).and_then(Value::as_str);
                match (get("subject"), get("predicate"), get("object")) {
                    (Some(s), Some(p), Some(o)) => relations.push(RelationMention::new(s, p, o)),
                    _ => bad.push(format!("relations[{i}]")),
                }
            }
        }
    }

    if !bad.is_empty() {
        return Err(CorpusError::SchemaViolation(bad));
    }
    Ok(StructuredChunk {
        schema: CHUNK_SCHEMA.to_owned(),
        chunk_id: chunk.chunk_id.clone(),
        doc_id: doc.doc_id.clone(),
        theme: doc.theme,
        period: doc.period,
        basic: BasicInfo {
            original_text: chunk.text.clone(),
            translation,
            summary,
            book_title: doc.title.clone(),
            page_number: chunk.page_number,
        },
        entities,
        relations,
        status: ReviewStatus::default(),
    })
}
