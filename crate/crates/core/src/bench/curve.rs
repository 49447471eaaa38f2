use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "interactions,episode_length,episode_return";

/// One finished episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// Cumulative environment interactions when the episode ended.
    pub interactions: u64,
    pub length: usize,
    pub episode_return: f64,
}

/// Per-episode learning record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub algorithm: String,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
}

impl LearningCurve {
    pub fn new(algorithm: impl Into<String>, seed: u64) -> Self {
        LearningCurve {
            algorithm: algorithm.into(),
            seed,
            episodes: Vec::new(),
        }
    }

    pub fn push(&mut self, record: EpisodeRecord) {
        debug_assert!(self
            .episodes
            .last()
            .is_none_or(|last| last.interactions < record.interactions));
        self.episodes.push(record);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn total_interactions(&self) -> u64 {
        self.episodes.last().map_or(0, |e| e.interactions)
    }

    /// Interactions at the end of the first episode whose return exceeds
    /// `threshold`, if any.
    pub fn interactions_to_return(&self, threshold: f64) -> Option<u64> {
        self.episodes
            .iter()
            .find(|e| e.episode_return > threshold)
            .map(|e| e.interactions)
    }

    pub fn last_episodes(&self, n: usize) -> &[EpisodeRecord] {
        &self.episodes[self.episodes.len().saturating_sub(n)..]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.episodes.len() + 1));
        out.push_str(CURVE_HEADER);
        out.push('\n');
        for e in &self.episodes {
            let _ = writeln!(out, "{},{},{:?}", e.interactions, e.length, e.episode_return);
        }
        out
    }

    pub fn from_csv(text: &str, algorithm: impl Into<String>, seed: u64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some(CURVE_HEADER) => {}
            other => return Err(Error::parse("curve csv", format!("bad header {other:?}"))),
        }
        let mut curve = LearningCurve::new(algorithm, seed);
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::parse("curve csv", format!("row {}: {line:?}", n + 1));
            let mut f = line.split(',');
            let (Some(i), Some(l), Some(r), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(bad());
            };
            let record = EpisodeRecord {
                interactions: i.trim().parse().map_err(|_| bad())?,
                length: l.trim().parse().map_err(|_| bad())?,
                episode_return: r.trim().parse().map_err(|_| bad())?,
            };
            if curve.episodes.last().is_some_and(|p| p.interactions >= record.interactions) {
                return Err(Error::parse("curve csv", format!("row {}: interactions not increasing", n + 1)));
            }
            curve.episodes.push(record);
        }
        Ok(curve)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>, algorithm: impl Into<String>, seed: u64) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, algorithm, seed)
    }
}
