use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EntityType;

/// Dictionary of known entity surfaces, used by the stub structurer and by
/// keyword extraction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    entries: BTreeMap<String, EntityType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LexiconMatch<'a> {
    pub surface: &'a str,
    pub entity_type: EntityType,
    /// `[start, end)` in characters of the scanned text.
    pub span: (usize, usize),
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// The lexicon shipped with the fixture corpus.
    pub fn fixture() -> Self {
        serde_json::from_str(include_str!("../../fixtures/lexicon.json"))
            .expect("bundled lexicon is valid")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn insert(&mut self, surface: impl Into<String>, entity_type: EntityType) {
        let surface = surface.into();
        if !surface.is_empty() {
            self.entries.insert(surface, entity_type);
        }
    }

    pub fn get(&self, surface: &str) -> Option<EntityType> {
        self.entries.get(surface).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, EntityType)> {
        self.entries.iter().map(|(s, t)| (s.as_str(), *t))
    }

    fn longest_surface(&self) -> usize {
        self.entries.keys().map(|k| k.chars().count()).max().unwrap_or(0)
    }

    /// Forward maximum matching: scan left to right, at each position take
    /// the longest known surface starting there.
    pub fn scan<'a>(&'a self, chars: &[char]) -> Vec<LexiconMatch<'a>> {
        let longest = self.longest_surface();
        let mut out = Vec::new();
        let mut i = 0;
        let mut buf = String::new();
        while i < chars.len() {
            let mut hit = None;
            let max_len = longest.min(chars.len() - i);
            for len in (1..=max_len).rev() {
                buf.clear();
                buf.extend(&chars[i..i + len]);
                if let Some((surface, ty)) = self.entries.get_key_value(buf.as_str()) {
                    hit = Some(LexiconMatch {
                        surface,
                        entity_type: *ty,
                        span: (i, i + len),
                    });
                    break;
                }
            }
            match hit {
                Some(m) => {
                    i = m.span.1;
                    out.push(m);
                }
                None => i += 1,
            }
        }
        out
    }
}

impl FromIterator<(String, EntityType)> for Lexicon {
    fn from_iter<I: IntoIterator<Item = (String, EntityType)>>(iter: I) -> Self {
        let mut lex = Lexicon::new();
        for (s, t) in iter {
            lex.insert(s, t);
        }
        lex
    }
}
