//! Inputs shared by the benchmarks.

use riverecho_core::{synthetic, KnowledgeGraph, Period, SourceDocument, StructuredChunk, Theme};

const CLAUSES: [&str; 6] = [
    "大禹治水，疏川导滞",
    "河出昆仑，东流入海",
    "潘季驯束水攻沙",
    "郦道元注水经",
    "汴渠引河通淮",
    "堤防岁修不辍",
];

const ENDS: [char; 4] = ['。', '；', '！', '？'];

/// A document of roughly `chars` characters with a page break every 1000.
pub fn long_document(chars: usize) -> SourceDocument {
    let mut body = String::new();
    let mut n = 0;
    let mut i = 0;
    while n < chars {
        let clause = CLAUSES[i % CLAUSES.len()];
        body.push_str(clause);
        body.push(if i % 3 == 2 { ENDS[i % ENDS.len()] } else { '，' });
        n += clause.chars().count() + 1;
        i += 1;
    }
    let breaks = (1000..n).step_by(1000).collect();
    SourceDocument::new("河防通议", Period::TangSong, Theme::ALL[0], body, breaks).expect("valid document")
}

/// Answer-like token stream, two or three characters per token.
pub fn token_stream(tokens: usize) -> Vec<String> {
    let doc = long_document(tokens * 3);
    let chars: Vec<char> = doc.body.chars().collect();
    chars
        .chunks(3)
        .enumerate()
        .map(|(i, c)| c[..if i % 2 == 0 { 2 } else { c.len() }].iter().collect())
        .take(tokens)
        .collect()
}

/// Accepted synthetic corpus.
pub fn accepted_corpus(seed: u64, n: usize) -> Vec<StructuredChunk> {
    let mut chunks = synthetic::random_corpus(seed, n);
    synthetic::accept_all(&mut chunks);
    chunks
}

pub fn graph(seed: u64, n: usize) -> KnowledgeGraph {
    riverecho_core::graph::build_graph(&accepted_corpus(seed, n), Default::default()).expect("graph builds")
}
