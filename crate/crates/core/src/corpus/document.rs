use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::review::ReviewStatus;
use super::CorpusError;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(DocId);
string_id!(ChunkId);

/// Hex prefix of a SHA-256 over `parts`, separated by a unit separator so
/// that `("ab", "c")` and `("a", "bc")` hash differently.
pub(crate) fn content_hash(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update([0x1f]);
        }
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    hex::encode(&digest[..8])
}

/// Historical period of a source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    PreQin,
    Han,
    WeiJinNorthSouth,
    TangSong,
    MingQing,
    Contemporary,
}

impl Period {
    pub const ALL: [Period; 6] = [
        Period::PreQin,
        Period::Han,
        Period::WeiJinNorthSouth,
        Period::TangSong,
        Period::MingQing,
        Period::Contemporary,
    ];
}

/// Subject theme of a source text. The row order of [`Theme::ALL`] is the
/// order used when printing corpus statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theme {
    RiverGovernance,
    TechnologyEngineering,
    NaturalKnowledge,
    SocioEconomic,
    CulturalHeritage,
    HistoricalNarratives,
    DisastersImpacts,
    Interdisciplinary,
}

impl Theme {
    pub const ALL: [Theme; 8] = [
        Theme::RiverGovernance,
        Theme::TechnologyEngineering,
        Theme::NaturalKnowledge,
        Theme::SocioEconomic,
        Theme::CulturalHeritage,
        Theme::HistoricalNarratives,
        Theme::DisastersImpacts,
        Theme::Interdisciplinary,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Theme::RiverGovernance => "River governance",
            Theme::TechnologyEngineering => "Technology and engineering",
            Theme::NaturalKnowledge => "Natural knowledge",
            Theme::SocioEconomic => "Socio-economic aspects",
            Theme::CulturalHeritage => "Cultural heritage",
            Theme::HistoricalNarratives => "Historical narratives",
            Theme::DisastersImpacts => "Disasters and their impacts",
            Theme::Interdisciplinary => "Interdisciplinary topics",
        }
    }
}

/// Closed entity taxonomy. Structurers that cannot classify a surface
/// should fall back to [`EntityType::Term`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    Person,
    Place,
    River,
    Dynasty,
    Work,
    Institution,
    Event,
    Term,
}

impl EntityType {
    pub const ALL: [EntityType; 8] = [
        EntityType::Person,
        EntityType::Place,
        EntityType::River,
        EntityType::Dynasty,
        EntityType::Work,
        EntityType::Institution,
        EntityType::Event,
        EntityType::Term,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Person => "person",
            EntityType::Place => "place",
            EntityType::River => "river",
            EntityType::Dynasty => "dynasty",
            EntityType::Work => "work",
            EntityType::Institution => "institution",
            EntityType::Event => "event",
            EntityType::Term => "term",
        }
    }

    pub fn parse(s: &str) -> Option<EntityType> {
        EntityType::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

/// A raw document before segmentation. Offsets are in Unicode scalar
/// values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: DocId,
    pub title: String,
    pub period: Period,
    pub theme: Theme,
    pub body: String,
    pub page_breaks: Vec<usize>,
}

impl SourceDocument {
    /// Builds a document with a content-derived id and validates it.
    pub fn new(
        title: impl Into<String>,
        period: Period,
        theme: Theme,
        body: impl Into<String>,
        page_breaks: Vec<usize>,
    ) -> Result<Self, CorpusError> {
        let title = title.into();
        let body = body.into();
        let doc_id = DocId(format!("doc-{}", content_hash(&[&title, &body])));
        let doc = SourceDocument {
            doc_id,
            title,
            period,
            theme,
            body,
            page_breaks,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.body.is_empty() {
            return Err(CorpusError::EmptyDocument(self.doc_id.clone()));
        }
        let len = self.body.chars().count();
        let mut prev = 0usize;
        for &b in &self.page_breaks {
            if b <= prev || b >= len {
                return Err(CorpusError::InvalidPageBreaks {
                    doc_id: self.doc_id.clone(),
                    offset: b,
                });
            }
            prev = b;
        }
        Ok(())
    }

    /// 1-based page containing the character at `offset`.
    pub fn page_at(&self, offset: usize) -> u32 {
        1 + self.page_breaks.iter().take_while(|&&b| b <= offset).count() as u32
    }
}

/// A contiguous slice of a document body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnstructuredChunk {
    pub chunk_id: ChunkId,
    pub doc_id: DocId,
    pub page_number: u32,
    /// `[start, end)` in characters.
    pub span: (usize, usize),
    pub text: String,
}

impl UnstructuredChunk {
    pub(crate) fn new(doc: &SourceDocument, start: usize, end: usize, text: String) -> Self {
        let chunk_id = ChunkId(format!(
            "chk-{}",
            content_hash(&[doc.doc_id.as_str(), &start.to_string(), &end.to_string(), &text])
        ));
        UnstructuredChunk {
            chunk_id,
            doc_id: doc.doc_id.clone(),
            page_number: doc.page_at(start),
            span: (start, end),
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub entity_type: EntityType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<(usize, usize)>,
}

impl EntityMention {
    pub fn new(surface: impl Into<String>, entity_type: EntityType) -> Self {
        EntityMention {
            surface: surface.into(),
            entity_type,
            span: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMention {
    pub subject_surface: String,
    pub predicate: String,
    pub object_surface: String,
}

impl RelationMention {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        RelationMention {
            subject_surface: subject.into(),
            predicate: predicate.into(),
            object_surface: object.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicInfo {
    pub original_text: String,
    pub translation: String,
    pub summary: String,
    pub book_title: String,
    pub page_number: u32,
}

/// Current line-record schema for structured chunks.
pub const CHUNK_SCHEMA: &str = "v1";

/// The annotated unit produced by structuring: basic information, the
/// entities it mentions and the relations between them.
///
/// `theme` and `period` are carried over from the source document so that
/// statistics can be computed from the chunk store alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredChunk {
    pub schema: String,
    pub chunk_id: ChunkId,
    pub doc_id: DocId,
    pub theme: Theme,
    pub period: Period,
    pub basic: BasicInfo,
    pub entities: Vec<EntityMention>,
    pub relations: Vec<RelationMention>,
    pub status: ReviewStatus,
}

impl StructuredChunk {
    /// Field paths that violate the chunk invariants. Empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if self.basic.original_text.is_empty() {
            bad.push("original_text".to_owned());
        }
        if self.basic.book_title.is_empty() {
            bad.push("book_title".to_owned());
        }
        if self.basic.page_number == 0 {
            bad.push("page_number".to_owned());
        }
        let combined =
            self.basic.original_text.chars().count() + self.basic.translation.chars().count();
        if self.basic.summary.chars().count() >= combined && combined > 0 {
            bad.push("summary".to_owned());
        }
        for (i, e) in self.entities.iter().enumerate() {
            if e.surface.trim().is_empty() {
                bad.push(format!("entities[{i}].surface"));
            }
        }
        for (i, r) in self.relations.iter().enumerate() {
            if r.predicate.trim().is_empty() {
                bad.push(format!("relations[{i}].predicate"));
            }
            if !self.declares(&r.subject_surface) {
                bad.push(format!("relations[{i}].subject_surface"));
            }
            if !self.declares(&r.object_surface) {
                bad.push(format!("relations[{i}].object_surface"));
            }
        }
        bad
    }

    /// Whether `surface` names one of this chunk's entity mentions.
    pub fn declares(&self, surface: &str) -> bool {
        self.entities.iter().any(|e| e.surface == surface)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn page_numbers_follow_breaks() {
        let doc = SourceDocument::new(
            "t",
            Period::Han,
            Theme::RiverGovernance,
            "abcdefgh",
            vec![3, 6],
        )
        .unwrap();
        assert_eq!(doc.page_at(0), 1);
        assert_eq!(doc.page_at(2), 1);
        assert_eq!(doc.page_at(3), 2);
        assert_eq!(doc.page_at(7), 3);
    }

    #[test]
    fn rejects_bad_page_breaks() {
        for breaks in [vec![0], vec![4, 4], vec![5, 3], vec![8]] {
            let r = SourceDocument::new("t", Period::Han, Theme::RiverGovernance, "abcdefgh", breaks);
            assert!(matches!(r, Err(CorpusError::InvalidPageBreaks { .. })));
        }
    }

    #[test]
    fn empty_body_is_rejected() {
        let r = SourceDocument::new("t", Period::Han, Theme::RiverGovernance, "", vec![]);
        assert!(matches!(r, Err(CorpusError::EmptyDocument(_))));
    }

    #[test]
    fn ids_are_content_derived() {
        let a = SourceDocument::new("t", Period::Han, Theme::RiverGovernance, "x", vec![]).unwrap();
        let b = SourceDocument::new("t", Period::TangSong, Theme::Interdisciplinary, "x", vec![])
            .unwrap();
        let c = SourceDocument::new("t", Period::Han, Theme::RiverGovernance, "y", vec![]).unwrap();
        assert_eq!(a.doc_id, b.doc_id);
        assert_ne!(a.doc_id, c.doc_id);
    }
}
