use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::{StructuredChunk, Theme};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    /// Every theme is present, zero counts included.
    pub per_theme: BTreeMap<Theme, u64>,
    pub total: u64,
}

pub fn corpus_stats<'a, I>(chunks: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a StructuredChunk>,
{
    let mut per_theme: BTreeMap<Theme, u64> = Theme::ALL.iter().map(|&t| (t, 0)).collect();
    for c in chunks {
        *per_theme.entry(c.theme).or_default() += 1;
    }
    let total = per_theme.values().sum();
    CorpusStats { per_theme, total }
}

impl fmt::Display for CorpusStats {
    /// Theme distribution table: a total row followed by one row per theme.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<30} {:>16}", "Theme", "Number of Chunks")?;
        writeln!(f, "{:<30} {:>16}", "Total", self.total)?;
        for theme in Theme::ALL {
            writeln!(f, "{:<30} {:>16}", theme.label(), self.per_theme[&theme])?;
        }
        Ok(())
    }
}
