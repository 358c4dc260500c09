//! Who passed by a fire antenna on the day of the fire.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::FireSitePair;
use crate::ingest::{AntennaId, TrajectoryPoint, VisitorKey};
use crate::lightclass::{ClusterModel, SiteClass};
use crate::time::Window;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajflowError {
    #[error("no epochs to summarize")]
    Empty,
    #[error("antenna {0} has no cluster label")]
    Unlabeled(AntennaId),
}

/// Trajectory points grouped by (antenna, calendar day). Only keys registered
/// up front are retained, so a large trajectory file can be streamed through
/// without holding it in memory.
#[derive(Debug, Clone)]
pub struct VisitIndex {
    window: Window,
    period_days: u32,
    cells: HashMap<(AntennaId, NaiveDate), Vec<TrajectoryPoint>>,
}

impl VisitIndex {
    pub fn for_pairs(pairs: &[FireSitePair], window: Window, period_days: u32) -> Self {
        let cells = pairs.iter().map(|p| ((p.antenna_id, p.fire.date), Vec::new())).collect();
        Self {
            window,
            period_days,
            cells,
        }
    }

    pub fn build(
        points: impl IntoIterator<Item = TrajectoryPoint>,
        pairs: &[FireSitePair],
        window: Window,
        period_days: u32,
    ) -> Self {
        let mut idx = Self::for_pairs(pairs, window, period_days);
        for p in points {
            idx.push(p);
        }
        idx
    }

    /// Keeps `p` if its (antenna, day) is tracked. Returns whether it was kept.
    pub fn push(&mut self, p: TrajectoryPoint) -> bool {
        match self.cells.get_mut(&(p.antenna_id, p.date())) {
            Some(v) => {
                v.push(p);
                true
            }
            None => false,
        }
    }

    pub fn points(&self, antenna: AntennaId, date: NaiveDate) -> &[TrajectoryPoint] {
        self.cells.get(&(antenna, date)).map_or(&[], Vec::as_slice)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn period_days(&self) -> u32 {
        self.period_days
    }
}

/// One epoch's visitors: every owner with at least one point at the fire
/// antenna on the fire day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochVisitors {
    pub pair: FireSitePair,
    pub visitors: BTreeSet<VisitorKey>,
    /// Sorted by timestamp, then user.
    pub points: Vec<TrajectoryPoint>,
}

impl EpochVisitors {
    pub fn n_visitors(&self) -> usize {
        self.visitors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visitors.is_empty()
    }
}

pub fn visitors_on_fire_day(index: &VisitIndex, pair: &FireSitePair) -> EpochVisitors {
    let mut points = index.points(pair.antenna_id, pair.fire.date).to_vec();
    points.sort_by_key(|p| (p.timestamp, p.user_id));
    let visitors = points.iter().map(|p| p.owner(&index.window, index.period_days)).collect();
    EpochVisitors {
        pair: pair.clone(),
        visitors,
        points,
    }
}

/// All epochs in canonical pair order.
pub fn visitors_for_pairs(index: &VisitIndex, pairs: &[FireSitePair]) -> Vec<EpochVisitors> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(FireSitePair::canonical_cmp);
    sorted.par_iter().map(|p| visitors_on_fire_day(index, p)).collect()
}

/// Full fire-day trajectories of every visitor, gathered in a second pass
/// over the trajectory stream.
#[derive(Debug, Clone)]
pub struct DayTrajectories {
    window: Window,
    period_days: u32,
    wanted: HashMap<(NaiveDate, VisitorKey), Vec<TrajectoryPoint>>,
}

impl DayTrajectories {
    pub fn for_epochs(epochs: &[EpochVisitors], window: Window, period_days: u32) -> Self {
        let wanted = epochs
            .iter()
            .flat_map(|e| e.visitors.iter().map(move |v| ((e.pair.fire.date, *v), Vec::new())))
            .collect();
        Self {
            window,
            period_days,
            wanted,
        }
    }

    pub fn push(&mut self, p: TrajectoryPoint) -> bool {
        let key = (p.date(), p.owner(&self.window, self.period_days));
        match self.wanted.get_mut(&key) {
            Some(v) => {
                v.push(p);
                true
            }
            None => false,
        }
    }

    /// Sorts every trajectory by time. Call once all points are pushed.
    pub fn finish(mut self) -> Self {
        for v in self.wanted.values_mut() {
            v.sort_by_key(|p| (p.timestamp, p.antenna_id));
        }
        self
    }

    pub fn get(&self, date: NaiveDate, visitor: &VisitorKey) -> &[TrajectoryPoint] {
        self.wanted.get(&(date, *visitor)).map_or(&[], Vec::as_slice)
    }
}

pub fn zero_visitor_fraction(epochs: &[EpochVisitors]) -> Result<f64, TrajflowError> {
    if epochs.is_empty() {
        return Err(TrajflowError::Empty);
    }
    Ok(epochs.iter().filter(|e| e.is_empty()).count() as f64 / epochs.len() as f64)
}

/// The zero-visitor share under both readings: per epoch, and per antenna
/// (an antenna counts as empty when none of its fire days had a visitor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroVisitorSummary {
    pub n_epochs: usize,
    pub n_empty_epochs: usize,
    pub epoch_fraction: f64,
    pub n_antennas: usize,
    pub n_empty_antennas: usize,
    pub antenna_fraction: f64,
}

pub fn zero_visitor_summary(epochs: &[EpochVisitors]) -> Result<ZeroVisitorSummary, TrajflowError> {
    let epoch_fraction = zero_visitor_fraction(epochs)?;
    let mut by_antenna: BTreeMap<AntennaId, bool> = BTreeMap::new();
    for e in epochs {
        *by_antenna.entry(e.pair.antenna_id).or_insert(true) &= e.is_empty();
    }
    let n_empty_antennas = by_antenna.values().filter(|v| **v).count();
    Ok(ZeroVisitorSummary {
        n_epochs: epochs.len(),
        n_empty_epochs: epochs.iter().filter(|e| e.is_empty()).count(),
        epoch_fraction,
        n_antennas: by_antenna.len(),
        n_empty_antennas,
        antenna_fraction: n_empty_antennas as f64 / by_antenna.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterVisitors {
    pub epochs: usize,
    pub total_visitors: usize,
    pub mean_visitors: f64,
}

/// Mean visitor count per class. Classes without epochs are absent.
pub fn visitors_by_cluster(
    epochs: &[EpochVisitors],
    model: &ClusterModel,
) -> Result<BTreeMap<SiteClass, ClusterVisitors>, TrajflowError> {
    let mut acc: BTreeMap<SiteClass, (usize, usize)> = BTreeMap::new();
    for e in epochs {
        let class = model
            .label_of(e.pair.antenna_id)
            .ok_or(TrajflowError::Unlabeled(e.pair.antenna_id))?;
        let slot = acc.entry(class).or_default();
        slot.0 += 1;
        slot.1 += e.n_visitors();
    }
    Ok(acc
        .into_iter()
        .map(|(c, (n, total))| {
            (
                c,
                ClusterVisitors {
                    epochs: n,
                    total_visitors: total,
                    mean_visitors: total as f64 / n as f64,
                },
            )
        })
        .collect())
}
