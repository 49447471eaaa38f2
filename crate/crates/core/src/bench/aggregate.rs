//! Resampling learning curves onto a shared interaction grid.

use std::fmt::Write as _;
use std::path::Path;

use super::curve::{EpisodeRecord, LearningCurve};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Return,
    Length,
}

impl Metric {
    fn of(self, e: &EpisodeRecord) -> f64 {
        match self {
            Metric::Return => e.episode_return,
            Metric::Length => e.length as f64,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "return" => Ok(Metric::Return),
            "length" => Ok(Metric::Length),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePoint {
    pub interactions: u64,
    pub mean: f64,
    /// Population standard deviation over curves.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub algorithm: String,
    pub metric: Metric,
    pub points: Vec<AggregatePoint>,
}

/// Value of the last episode finished by `at`, if any.
pub fn carry_forward(curve: &LearningCurve, at: u64, metric: Metric) -> Option<f64> {
    let n = curve.episodes.partition_point(|e| e.interactions <= at);
    n.checked_sub(1).map(|i| metric.of(&curve.episodes[i]))
}

/// Mean and population standard deviation of `metric` over `curves`, on the
/// grid of multiples of `grid_step` running from the first point at which
/// every curve has finished an episode to the last finished episode of any
/// curve.
pub fn aggregate(curves: &[LearningCurve], grid_step: u64, metric: Metric) -> Result<AggregateCurve> {
    if curves.is_empty() {
        return Err(Error::Config("nothing to aggregate".into()));
    }
    if grid_step == 0 {
        return Err(Error::Config("grid step must be positive".into()));
    }
    let mut first = 0;
    let mut last = 0;
    for c in curves {
        let (Some(a), Some(b)) = (c.episodes.first(), c.episodes.last()) else {
            return Err(Error::Config(format!("curve for seed {} has no episodes", c.seed)));
        };
        first = first.max(a.interactions);
        last = last.max(b.interactions);
    }
    let start = first.div_ceil(grid_step) * grid_step;
    let n = curves.len() as f64;
    let mut points = Vec::new();
    let mut at = start;
    while at <= last {
        let values: Vec<f64> = curves
            .iter()
            .map(|c| carry_forward(c, at, metric).expect("grid starts after every first episode"))
            .collect();
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        points.push(AggregatePoint { interactions: at, mean, std: var.sqrt() });
        at += grid_step;
    }
    Ok(AggregateCurve {
        algorithm: curves[0].algorithm.clone(),
        metric,
        points,
    })
}

impl AggregateCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("interactions,mean,std\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{:?},{:?}", p.interactions, p.mean, p.std);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
