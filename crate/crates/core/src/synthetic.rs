//! Synthetic corpora for tests and benchmarks.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    BasicInfo, ChunkId, DocId, EntityMention, EntityType, Period, RelationMention, ReviewState,
    ReviewStatus, StructuredChunk, Theme, CHUNK_SCHEMA,
};
use crate::backends::StubStructurer;
use crate::corpus::io::{ingest_documents, load_documents};
use crate::corpus::{Lexicon, SegmentPolicy};
use crate::graph::{build_graph, BuildOptions, KnowledgeGraph};

/// Per-theme chunk counts of the full reference corpus.
pub const REFERENCE_THEME_COUNTS: [(Theme, u64); 8] = [
    (Theme::RiverGovernance, 6125),
    (Theme::TechnologyEngineering, 4369),
    (Theme::NaturalKnowledge, 2552),
    (Theme::SocioEconomic, 1649),
    (Theme::CulturalHeritage, 1778),
    (Theme::HistoricalNarratives, 1551),
    (Theme::DisastersImpacts, 1268),
    (Theme::Interdisciplinary, 1116),
];

pub const REFERENCE_TOTAL: u64 = 20408;

const ENTITY_POOL: &[(&str, EntityType)] = &[
    ("禹", EntityType::Person),
    ("鲧", EntityType::Person),
    ("郦道元", EntityType::Person),
    ("潘季驯", EntityType::Person),
    ("王景", EntityType::Person),
    ("靳辅", EntityType::Person),
    ("黄河", EntityType::River),
    (" 黄河", EntityType::River),
    ("黄河 ", EntityType::River),
    ("黄河", EntityType::Place),
    ("淮河", EntityType::River),
    ("汴渠", EntityType::River),
    ("渭水", EntityType::River),
    ("洛水", EntityType::River),
    ("龙门", EntityType::Place),
    ("孟津", EntityType::Place),
    ("开封", EntityType::Place),
    ("河套", EntityType::Place),
    ("三门峡", EntityType::Place),
    ("积石  山", EntityType::Place),
    ("积石 山", EntityType::Place),
    ("北魏", EntityType::Dynasty),
    ("明朝", EntityType::Dynasty),
    ("清朝", EntityType::Dynasty),
    ("水经注", EntityType::Work),
    ("禹贡", EntityType::Work),
    ("河防一览", EntityType::Work),
    ("河道总督", EntityType::Institution),
    ("都水监", EntityType::Institution),
    ("瓠子决口", EntityType::Event),
    ("铜瓦厢改道", EntityType::Event),
    ("束水攻沙", EntityType::Term),
    ("堤防", EntityType::Term),
    ("泥沙", EntityType::Term),
];

const PREDICATES: &[&str] = &["治", "著", "流经", "发源于", "任", "设", "记", "入"];

const TITLES: &[&str] = &["水经注", "禹贡", "河防一览", "史记", "汉书", "治河方略", "黄河文化概说"];

fn filler(rng: &mut ChaCha8Rng, len: usize) -> String {
    const CH: &[char] = &['水', '流', '东', '下', '岸', '民', '岁', '堤', '田', '城'];
    (0..len).map(|_| CH[rng.random_range(0..CH.len())]).collect()
}

/// A structurally valid chunk with random theme, entities and relations.
/// All chunks start in `Draft`.
pub fn random_corpus(seed: u64, n: usize) -> Vec<StructuredChunk> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let n_ent = rng.random_range(1..=4);
            let entities: Vec<EntityMention> = ENTITY_POOL
                .choose_multiple(&mut rng, n_ent)
                .map(|(s, t)| EntityMention::new(*s, *t))
                .collect();
            let n_rel = rng.random_range(0..=n_ent.min(3));
            let relations = (0..n_rel)
                .map(|_| {
                    let a = entities.choose(&mut rng).unwrap();
                    let b = entities.choose(&mut rng).unwrap();
                    RelationMention::new(
                        &a.surface,
                        *PREDICATES.choose(&mut rng).unwrap(),
                        &b.surface,
                    )
                })
                .collect();
            let mut text = String::new();
            for e in &entities {
                text.push_str(e.surface.trim());
                let len = rng.random_range(2..8);
                text.push_str(&filler(&mut rng, len));
                text.push('。');
            }
            let theme = *Theme::ALL.choose(&mut rng).unwrap();
            let title = *TITLES.choose(&mut rng).unwrap();
            StructuredChunk {
                schema: CHUNK_SCHEMA.to_owned(),
                chunk_id: ChunkId(format!("syn-{seed}-{i:05}")),
                doc_id: DocId(format!("doc-syn-{}", title)),
                theme,
                period: *Period::ALL.choose(&mut rng).unwrap(),
                basic: BasicInfo {
                    summary: text.chars().take(10).collect(),
                    translation: format!("译：{text}"),
                    original_text: text,
                    book_title: title.to_owned(),
                    page_number: rng.random_range(1..300),
                },
                entities,
                relations,
                status: ReviewStatus::default(),
            }
        })
        .collect()
}

/// Marks every chunk accepted, as if it went through both review stages.
pub fn accept_all(chunks: &mut [StructuredChunk]) {
    for c in chunks {
        c.status.state = ReviewState::Accepted;
    }
}

/// A corpus whose per-theme counts are exactly [`REFERENCE_THEME_COUNTS`].
pub fn reference_corpus() -> Vec<StructuredChunk> {
    let template = random_corpus(0, 1).remove(0);
    let mut out = Vec::with_capacity(REFERENCE_TOTAL as usize);
    for (theme, count) in REFERENCE_THEME_COUNTS {
        for i in 0..count {
            let mut c = template.clone();
            c.chunk_id = ChunkId(format!("t1-{theme:?}-{i:05}"));
            c.theme = theme;
            out.push(c);
        }
    }
    out
}

/// Directory of the bundled sample documents.
pub fn fixture_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus")
}

/// Chunk size used for the bundled documents; small enough that every
/// document yields several chunks.
pub const FIXTURE_MAX_CHARS: usize = 120;

/// The bundled documents ingested with the stub structurer, all accepted.
pub async fn fixture_chunks() -> Vec<StructuredChunk> {
    let docs = load_documents(&fixture_corpus_dir()).expect("bundled corpus loads");
    let policy = SegmentPolicy {
        max_chars: FIXTURE_MAX_CHARS,
        ..SegmentPolicy::default()
    };
    let mut chunks = ingest_documents(&docs, &policy, 2, &HashSet::new(), || {
        Box::new(StubStructurer::new(Lexicon::fixture()))
    })
    .await
    .expect("bundled corpus structures");
    accept_all(&mut chunks);
    chunks
}

pub async fn fixture_graph() -> KnowledgeGraph {
    build_graph(&fixture_chunks().await, BuildOptions::default()).expect("bundled corpus builds")
}
