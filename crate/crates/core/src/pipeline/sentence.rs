use std::collections::BTreeSet;

/// Incremental sentence splitter. Text is cut immediately after every
/// terminal character, including one that sits in the middle of a token,
/// so a sentence is released as soon as its terminator arrives.
#[derive(Debug, Clone)]
pub struct SentenceAccumulator {
    punct: BTreeSet<char>,
    buf: String,
}

impl SentenceAccumulator {
    pub fn new(punct: BTreeSet<char>) -> Self {
        SentenceAccumulator {
            punct,
            buf: String::new(),
        }
    }

    /// Feeds one token and returns the sentences it completes.
    pub fn push(&mut self, token: &str) -> Vec<String> {
        let mut out = Vec::new();
        for c in token.chars() {
            self.buf.push(c);
            if self.punct.contains(&c) {
                out.push(std::mem::take(&mut self.buf));
            }
        }
        out
    }

    /// Unterminated residue, if any.
    pub fn finish(&mut self) -> Option<String> {
        (!self.buf.is_empty()).then(|| std::mem::take(&mut self.buf))
    }
}

pub fn accumulate_sentences<I, S>(tokens: I, punct: &BTreeSet<char>) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut acc = SentenceAccumulator::new(punct.clone());
    let mut out = Vec::new();
    for t in tokens {
        out.extend(acc.push(t.as_ref()));
    }
    out.extend(acc.finish());
    out
}
