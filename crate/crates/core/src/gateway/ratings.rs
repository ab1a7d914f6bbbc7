use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Professionalism,
    Informativeness,
    LogicalCoherence,
    Fluency,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Professionalism,
        Dimension::Informativeness,
        Dimension::LogicalCoherence,
        Dimension::Fluency,
    ];
}

pub const MIN_SCORE: i64 = 1;
pub const MAX_SCORE: i64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub session_id: String,
    pub dimension: Dimension,
    /// Kept wide so that out-of-range submissions parse and can be
    /// rejected with a precise reason.
    pub score: i64,
    pub rater_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RatingInvalid {
    #[error("score {0} is outside {MIN_SCORE}..={MAX_SCORE}")]
    ScoreOutOfRange(i64),
    #[error("{0} must not be empty")]
    MissingField(&'static str),
}

impl RatingRecord {
    pub fn validate(&self) -> Result<(), RatingInvalid> {
        if !(MIN_SCORE..=MAX_SCORE).contains(&self.score) {
            return Err(RatingInvalid::ScoreOutOfRange(self.score));
        }
        if self.session_id.trim().is_empty() {
            return Err(RatingInvalid::MissingField("session_id"));
        }
        if self.rater_id.trim().is_empty() {
            return Err(RatingInvalid::MissingField("rater_id"));
        }
        Ok(())
    }
}

/// Mean score per dimension; dimensions without records are absent.
pub fn aggregate_ratings(records: &[RatingRecord]) -> BTreeMap<Dimension, f64> {
    let mut sums: BTreeMap<Dimension, (i64, u64)> = BTreeMap::new();
    for r in records {
        let e = sums.entry(r.dimension).or_default();
        e.0 += r.score;
        e.1 += 1;
    }
    sums.into_iter().map(|(d, (s, n))| (d, s as f64 / n as f64)).collect()
}

/// `(dimension, value)` pairs in the fixed axis order of a radar chart.
pub fn radar_series(means: &BTreeMap<Dimension, f64>) -> Vec<(Dimension, f64)> {
    Dimension::ALL.iter().filter_map(|d| means.get(d).map(|v| (*d, *v))).collect()
}

/// Validated rating records.
#[derive(Debug, Default)]
pub struct RatingStore {
    records: Vec<RatingRecord>,
}

impl RatingStore {
    pub fn submit(&mut self, record: RatingRecord) -> Result<(), RatingInvalid> {
        record.validate()?;
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn aggregate(&self) -> BTreeMap<Dimension, f64> {
        aggregate_ratings(&self.records)
    }
}
