use std::collections::BTreeSet;

use super::document::{SourceDocument, UnstructuredChunk};
use super::CorpusError;

/// Default chunk window in characters.
pub const DEFAULT_MAX_CHARS: usize = 500;

/// Sentence-terminal characters used when cutting documents into chunks.
pub const DEFAULT_BOUNDARY_PUNCTUATION: &str = "。！？；…!?;.";

#[derive(Debug, Clone)]
pub struct SegmentPolicy {
    pub max_chars: usize,
    pub boundary_punctuation: BTreeSet<char>,
}

impl Default for SegmentPolicy {
    fn default() -> Self {
        SegmentPolicy {
            max_chars: DEFAULT_MAX_CHARS,
            boundary_punctuation: DEFAULT_BOUNDARY_PUNCTUATION.chars().collect(),
        }
    }
}

impl SegmentPolicy {
    pub fn new(max_chars: usize, punctuation: &str) -> Self {
        SegmentPolicy {
            max_chars,
            boundary_punctuation: punctuation.chars().collect(),
        }
    }
}

/// Cuts a document body into ordered, non-overlapping chunks that cover it
/// exactly.
///
/// Each chunk is the longest prefix of the remaining text that fits in
/// `max_chars` and ends on a boundary character. When the rest of the body
/// fits in the window it becomes the final chunk. When the window holds no
/// boundary at all the chunk runs on to the next boundary (or the end of
/// the body), which is the only case where a chunk exceeds `max_chars`.
pub fn segment_document(
    doc: &SourceDocument,
    policy: &SegmentPolicy,
) -> Result<Vec<UnstructuredChunk>, CorpusError> {
    if doc.body.is_empty() {
        return Err(CorpusError::EmptyDocument(doc.doc_id.clone()));
    }
    if policy.max_chars == 0 {
        return Err(CorpusError::InvalidPolicy("max_chars must be at least 1"));
    }
    let chars: Vec<char> = doc.body.chars().collect();
    let is_boundary = |c: char| policy.boundary_punctuation.contains(&c);

    let mut chunks = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let window_end = (start + policy.max_chars).min(chars.len());
        let end = if window_end == chars.len() {
            chars.len()
        } else if let Some(p) = (start..window_end).rev().find(|&i| is_boundary(chars[i])) {
            p + 1
        } else {
            // unbreakable run: extend to the next boundary
            (window_end..chars.len())
                .find(|&i| is_boundary(chars[i]))
                .map_or(chars.len(), |p| p + 1)
        };
        let text: String = chars[start..end].iter().collect();
        chunks.push(UnstructuredChunk::new(doc, start, end, text));
        start = end;
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Period, Theme};
    use proptest::prelude::*;

    fn doc(body: &str) -> SourceDocument {
        SourceDocument::new("书", Period::Han, Theme::RiverGovernance, body, vec![]).unwrap()
    }

    fn texts(chunks: &[UnstructuredChunk]) -> Vec<&str> {
        chunks.iter().map(|c| c.text.as_str()).collect()
    }

    #[test]
    fn each_sentence_fills_window() {
        let chunks = segment_document(&doc("甲。乙。"), &SegmentPolicy::new(2, "。")).unwrap();
        assert_eq!(texts(&chunks), ["甲。", "乙。"]);
        assert_eq!(chunks[0].span, (0, 2));
        assert_eq!(chunks[1].span, (2, 4));
    }

    #[test]
    fn single_chunk_identity() {
        let chunks = segment_document(&doc("x"), &SegmentPolicy::default()).unwrap();
        assert_eq!(texts(&chunks), ["x"]);
    }

    #[test]
    fn unbreakable_run_overruns_to_next_boundary() {
        let chunks = segment_document(&doc("abcdef。gh"), &SegmentPolicy::new(3, "。")).unwrap();
        assert_eq!(texts(&chunks), ["abcdef。", "gh"]);
    }

    #[test]
    fn prefers_latest_boundary_in_window() {
        let chunks = segment_document(&doc("a。b。cdefg"), &SegmentPolicy::new(5, "。")).unwrap();
        assert_eq!(texts(&chunks), ["a。b。", "cdefg"]);
    }

    #[test]
    fn page_numbers_come_from_breaks() {
        let d = SourceDocument::new("书", Period::Han, Theme::RiverGovernance, "甲。乙。丙。", vec![2, 4])
            .unwrap();
        let chunks = segment_document(&d, &SegmentPolicy::new(2, "。")).unwrap();
        let pages: Vec<u32> = chunks.iter().map(|c| c.page_number).collect();
        assert_eq!(pages, [1, 2, 3]);
    }

    #[test]
    fn zero_window_is_rejected() {
        assert!(matches!(
            segment_document(&doc("x"), &SegmentPolicy::new(0, "。")),
            Err(CorpusError::InvalidPolicy(_))
        ));
    }

    /// Independent check of the segmentation contract, written against the
    /// chunk list only.
    fn check_contract(body: &str, max: usize, punct: &str, chunks: &[UnstructuredChunk]) {
        let joined: String = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(joined, body);
        let is_p = |c: char| punct.contains(c);
        let all: Vec<char> = body.chars().collect();
        let mut offset = 0;
        for (i, c) in chunks.iter().enumerate() {
            let cs: Vec<char> = c.text.chars().collect();
            assert!(!cs.is_empty());
            assert_eq!(c.span, (offset, offset + cs.len()));
            let last = i + 1 == chunks.len();
            if cs.len() > max {
                // forced overrun: the first `max` chars hold no boundary
                assert!(cs[..max].iter().all(|&ch| !is_p(ch)), "{:?}", c.text);
            }
            if !last {
                assert!(is_p(*cs.last().unwrap()), "{:?}", c.text);
                if cs.len() <= max {
                    // no later boundary fits inside the same window
                    let window_end = (offset + max).min(all.len());
                    let rest = &all[offset + cs.len()..window_end];
                    assert!(rest.iter().all(|&ch| !is_p(ch)) || window_end == all.len());
                }
            }
            offset += cs.len();
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn segmentation_is_lossless(body in "[ab甲乙。！x]{1,120}", max in 1usize..=50) {
            let d = doc(&body);
            let chunks = segment_document(&d, &SegmentPolicy::new(max, "。！")).unwrap();
            check_contract(&body, max, "。！", &chunks);
        }
    }
}
