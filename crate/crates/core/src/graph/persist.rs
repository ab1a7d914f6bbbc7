//! Graph file format: one JSON header line
//!
//! ```text
//! {"format":"riverecho-graph","version":"v1","entities":N,"edges":M,"chunks":C}
//! ```
//!
//! followed by N entity records, M edge records and C structured chunk
//! records, one per line, each section in key order. Adjacency is not
//! stored; it is recomputed on load.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Entity, GraphError, KnowledgeGraph, RelationEdge};
use crate::corpus::StructuredChunk;

pub const GRAPH_FORMAT: &str = "riverecho-graph";
pub const GRAPH_VERSION: &str = "v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: String,
    entities: usize,
    edges: usize,
    chunks: usize,
}

fn write_line<T: Serialize, W: Write>(w: &mut W, v: &T) -> Result<(), GraphError> {
    serde_json::to_writer(&mut *w, v).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_graph<W: Write>(g: &KnowledgeGraph, mut w: W) -> Result<(), GraphError> {
    let header = Header {
        format: GRAPH_FORMAT.into(),
        version: GRAPH_VERSION.into(),
        entities: g.entities.len(),
        edges: g.edges.len(),
        chunks: g.chunk_index.len(),
    };
    write_line(&mut w, &header)?;
    for e in g.entities.values() {
        write_line(&mut w, e)?;
    }
    for e in &g.edges {
        write_line(&mut w, e)?;
    }
    for c in g.chunk_index.values() {
        write_line(&mut w, c)?;
    }
    w.flush()?;
    Ok(())
}

fn corrupt(line: usize, reason: impl ToString) -> GraphError {
    GraphError::CorruptGraphFile {
        line,
        reason: reason.to_string(),
    }
}

pub fn read_graph<R: BufRead>(r: R) -> Result<KnowledgeGraph, GraphError> {
    let mut lines = r.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String), GraphError> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((i, Err(e))) => Err(corrupt(i + 1, e)),
            None => Err(corrupt(0, format!("file ends before {what}"))),
        }
    };
    fn parse<T: DeserializeOwned>(line: usize, text: &str) -> Result<T, GraphError> {
        serde_json::from_str(text).map_err(|e| corrupt(line, e))
    }

    let (n, text) = next("the header").map_err(|_| corrupt(1, "missing header"))?;
    let v: serde_json::Value = parse(n, &text)?;
    if v.get("format").and_then(|f| f.as_str()) != Some(GRAPH_FORMAT) {
        return Err(corrupt(n, "not a graph file"));
    }
    match v.get("version").and_then(|f| f.as_str()) {
        Some(GRAPH_VERSION) => {}
        Some(other) => return Err(GraphError::UnsupportedVersion(other.to_owned())),
        None => return Err(corrupt(n, "header has no version")),
    }
    let header: Header = serde_json::from_value(v).map_err(|e| corrupt(n, e))?;

    let mut sections: [Vec<(usize, String)>; 3] = Default::default();
    let mut last = n;
    for (slot, (count, what)) in sections.iter_mut().zip([
        (header.entities, "entities"),
        (header.edges, "edges"),
        (header.chunks, "chunks"),
    ]) {
        for i in 0..count {
            let (n, text) = next(what).map_err(|e| match e {
                GraphError::CorruptGraphFile { line: 0, .. } => {
                    corrupt(last + 1, format!("truncated: {i} of {count} {what} present"))
                }
                other => other,
            })?;
            last = n;
            slot.push((n, text));
        }
    }
    let [ent_lines, edge_lines, chunk_lines] = sections;

    let mut g = KnowledgeGraph::default();
    for (n, text) in ent_lines {
        let e: Entity = parse(n, &text)?;
        if g.entities.insert(e.entity_id.clone(), e).is_some() {
            return Err(corrupt(n, "duplicate entity id"));
        }
    }
    for (n, text) in edge_lines {
        let e: RelationEdge = parse(n, &text)?;
        g.edges.push(e);
    }
    for (n, text) in chunk_lines {
        let c: StructuredChunk = parse(n, &text)?;
        if g.chunk_index.insert(c.chunk_id.clone(), c).is_some() {
            return Err(corrupt(n, "duplicate chunk id"));
        }
    }
    if let Ok((n, text)) = next("") {
        if !text.trim().is_empty() {
            return Err(corrupt(n, "records beyond the counts in the header"));
        }
    }
    let sorted = g.edges.windows(2).all(|w| {
        (&w[0].subject_id, &w[0].predicate, &w[0].object_id) < (&w[1].subject_id, &w[1].predicate, &w[1].object_id)
    });
    if !sorted {
        return Err(corrupt(0, "edge section is not sorted"));
    }
    g.rebuild_adjacency();
    g.check_integrity()?;
    Ok(g)
}

/// Writes `g` to `path` through a temporary file so readers never see a
/// partial graph.
pub fn persist_graph(g: &KnowledgeGraph, path: &Path) -> Result<(), GraphError> {
    let tmp = path.with_extension("graph.tmp");
    write_graph(g, BufWriter::new(fs::File::create(&tmp)?))?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph, GraphError> {
    read_graph(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityMention, EntityType, RelationMention};
    use crate::graph::{build_graph, BuildOptions};
    use crate::synthetic;

    fn to_bytes(g: &KnowledgeGraph) -> Vec<u8> {
        let mut out = Vec::new();
        write_graph(g, &mut out).unwrap();
        out
    }

    #[test]
    fn empty_round_trip() {
        let g = KnowledgeGraph::default();
        let bytes = to_bytes(&g);
        assert_eq!(
            String::from_utf8(bytes.clone()).unwrap(),
            "{\"format\":\"riverecho-graph\",\"version\":\"v1\",\"entities\":0,\"edges\":0,\"chunks\":0}\n"
        );
        assert_eq!(read_graph(&bytes[..]).unwrap(), g);
    }

    #[test]
    fn synthetic_round_trip() {
        let g = build_graph(&synthetic::random_corpus(8, 500), BuildOptions::unreviewed()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.graph");
        persist_graph(&g, &path).unwrap();
        let back = load_graph(&path).unwrap();
        assert_eq!(back, g);
        back.check_integrity().unwrap();
        assert_eq!(to_bytes(&back), fs::read(&path).unwrap());
    }

    #[test]
    fn truncation_is_detected() {
        let g = build_graph(&synthetic::random_corpus(8, 30), BuildOptions::unreviewed()).unwrap();
        let text = String::from_utf8(to_bytes(&g)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        for keep in [1, lines.len() / 2, lines.len() - 1] {
            let cut = lines[..keep].join("\n");
            match read_graph(cut.as_bytes()) {
                Err(GraphError::CorruptGraphFile { line, .. }) => assert_eq!(line, keep + 1),
                other => panic!("keep {keep}: {other:?}"),
            }
        }
        // a line cut mid-record
        let half = &text.as_bytes()[..text.len() - 20];
        assert!(matches!(read_graph(half), Err(GraphError::CorruptGraphFile { .. })));
    }

    #[test]
    fn bad_record_reports_its_line() {
        let g = build_graph(&synthetic::random_corpus(8, 10), BuildOptions::unreviewed()).unwrap();
        let text = String::from_utf8(to_bytes(&g)).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        lines[3] = "{\"entity_id\": 5}".into();
        match read_graph(lines.join("\n").as_bytes()) {
            Err(GraphError::CorruptGraphFile { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn other_version_is_rejected() {
        let text = "{\"format\":\"riverecho-graph\",\"version\":\"v9\",\"entities\":0,\"edges\":0,\"chunks\":0}\n";
        assert!(matches!(read_graph(text.as_bytes()), Err(GraphError::UnsupportedVersion(v)) if v == "v9"));
    }

    fn golden_graph() -> KnowledgeGraph {
        let mut c = synthetic::random_corpus(0, 1).remove(0);
        c.chunk_id = "chk-golden".into();
        c.doc_id = "doc-golden".into();
        c.basic.original_text = "禹治河。".into();
        c.basic.translation = "译：禹治河。".into();
        c.basic.summary = "禹治河".into();
        c.basic.book_title = "禹贡".into();
        c.basic.page_number = 1;
        c.theme = crate::corpus::Theme::RiverGovernance;
        c.period = crate::corpus::Period::PreQin;
        c.entities = vec![EntityMention::new("禹", EntityType::Person), EntityMention::new("河", EntityType::River)];
        c.relations = vec![RelationMention::new("禹", "治", "河")];
        build_graph([&c], BuildOptions::unreviewed()).unwrap()
    }

    #[test]
    fn golden_file_is_bit_exact() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden.graph");
        let bytes = to_bytes(&golden_graph());
        if std::env::var_os("RIVERECHO_BLESS").is_some() {
            fs::write(&path, &bytes).unwrap();
        }
        assert_eq!(String::from_utf8(bytes).unwrap(), fs::read_to_string(&path).unwrap());
        assert_eq!(load_graph(&path).unwrap(), golden_graph());
    }
}
