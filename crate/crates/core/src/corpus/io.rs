//! File formats for the corpus: source documents with sidecar metadata on
//! the way in, line-delimited structured chunk records on the way out.
//!
//! A source directory holds `NAME.txt` (UTF-8 body) next to
//! `NAME.meta.jsonl`, whose first non-blank line is a JSON record
//! `{"title", "period", "theme", "page_breaks"}`. A single trailing newline
//! of the body file is not part of the body.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, Mutex};

use super::{
    segment_document, structure_chunk, CorpusError, Period, SegmentPolicy, SourceDocument,
    StructuredChunk, Theme, CHUNK_SCHEMA,
};
use crate::backends::Structurer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentMeta {
    pub title: String,
    pub period: Period,
    pub theme: Theme,
    #[serde(default)]
    pub page_breaks: Vec<usize>,
}

fn parse_err(path: &Path, line: usize, message: impl ToString) -> CorpusError {
    CorpusError::Parse {
        path: path.display().to_string(),
        line,
        message: message.to_string(),
    }
}

/// Loads every `*.txt` document in `dir` (sorted by file name).
pub fn load_documents(dir: &Path) -> Result<Vec<SourceDocument>, CorpusError> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let meta_path = path.with_extension("meta.jsonl");
        let meta_text = fs::read_to_string(&meta_path)
            .map_err(|e| parse_err(&meta_path, 0, format!("cannot read sidecar: {e}")))?;
        let (line_no, line) = meta_text
            .lines()
            .enumerate()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| parse_err(&meta_path, 1, "empty sidecar"))?;
        let meta: DocumentMeta =
            serde_json::from_str(line).map_err(|e| parse_err(&meta_path, line_no + 1, e))?;
        let mut body = fs::read_to_string(&path)?;
        if body.ends_with('\n') {
            body.pop();
            if body.ends_with('\r') {
                body.pop();
            }
        }
        docs.push(SourceDocument::new(meta.title, meta.period, meta.theme, body, meta.page_breaks)?);
    }
    Ok(docs)
}

pub fn write_chunks(path: &Path, chunks: &[StructuredChunk]) -> Result<(), CorpusError> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        for c in chunks {
            serde_json::to_writer(&mut w, c).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_chunks(path: &Path) -> Result<Vec<StructuredChunk>, CorpusError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let chunk: StructuredChunk =
            serde_json::from_str(&line).map_err(|e| parse_err(path, i + 1, e))?;
        if chunk.schema != CHUNK_SCHEMA {
            return Err(parse_err(path, i + 1, format!("unsupported schema {:?}", chunk.schema)));
        }
        out.push(chunk);
    }
    Ok(out)
}

/// Segments and structures `docs`, running up to `workers` structurers
/// concurrently. Results come back in document order, chunk order.
/// Chunks whose id is in `skip` are not re-structured.
pub async fn ingest_documents<F>(
    docs: &[SourceDocument],
    policy: &SegmentPolicy,
    workers: usize,
    skip: &HashSet<super::ChunkId>,
    mut make_structurer: F,
) -> Result<Vec<StructuredChunk>, CorpusError>
where
    F: FnMut() -> Box<dyn Structurer>,
{
    let mut jobs = Vec::new();
    for doc in docs {
        for chunk in segment_document(doc, policy)? {
            if !skip.contains(&chunk.chunk_id) {
                jobs.push((chunk, doc.clone()));
            }
        }
    }
    let total = jobs.len();
    let queue = Arc::new(Mutex::new(jobs.into_iter().enumerate()));
    let (tx, mut rx) = mpsc::channel(workers.max(1) * 2);
    let mut handles = Vec::new();
    for _ in 0..workers.max(1) {
        let queue = Arc::clone(&queue);
        let tx = tx.clone();
        let mut structurer = make_structurer();
        handles.push(tokio::spawn(async move {
            loop {
                let next = queue.lock().await.next();
                let Some((i, (chunk, doc))) = next else { break };
                let result = structure_chunk(&chunk, &doc, structurer.as_mut()).await;
                if tx.send((i, result)).await.is_err() {
                    break;
                }
            }
        }));
    }
    drop(tx);

    // single writer
    let mut slots: Vec<Option<StructuredChunk>> = vec![None; total];
    while let Some((i, result)) = rx.recv().await {
        match result {
            Ok(c) => slots[i] = Some(c),
            Err(e) => {
                for h in &handles {
                    h.abort();
                }
                return Err(e);
            }
        }
    }
    Ok(slots.into_iter().flatten().collect())
}
