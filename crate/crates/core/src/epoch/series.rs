use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{AntennaId, Timeline, TrafficRecord};
use crate::time::{HourStamp, Window};

/// Which side of a call record an antenna must be on to count it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Originating,
    Terminating,
    #[default]
    Both,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Originating, Direction::Terminating, Direction::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Originating => "originating",
            Direction::Terminating => "terminating",
            Direction::Both => "both",
        }
    }

    /// A self-loop record (origin == dest) counts once for `Both`.
    pub fn matches(self, rec: &TrafficRecord, antenna: AntennaId) -> bool {
        match self {
            Direction::Originating => rec.origin == antenna,
            Direction::Terminating => rec.dest == antenna,
            Direction::Both => rec.origin == antenna || rec.dest == antenna,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown direction {s:?} (expected originating, terminating or both)"))
    }
}

/// Hourly call counts of one antenna over the whole observation window.
/// `None` marks hours with no data anywhere in the traffic file.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub antenna_id: AntennaId,
    pub direction: Direction,
    pub window: Window,
    pub values: Vec<Option<u64>>,
}

impl HourlySeries {
    pub fn all_missing(antenna_id: AntennaId, direction: Direction, window: Window) -> Self {
        Self {
            antenna_id,
            direction,
            window,
            values: vec![None; window.hours()],
        }
    }

    pub fn at(&self, h: HourStamp) -> Option<u64> {
        self.window.hour_index(h).and_then(|i| self.values[i])
    }

    pub fn present_hours(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Builds one series from a record stream. Hours absent from `timeline` are
/// missing; present hours without matching records are zero. An antenna that
/// appears in no record at all is unknown and gets an all-missing series.
pub fn build_series<'a>(
    records: impl IntoIterator<Item = &'a TrafficRecord>,
    timeline: &Timeline,
    antenna_id: AntennaId,
    direction: Direction,
) -> HourlySeries {
    let window = *timeline.window();
    let mut counts = vec![0u64; window.hours()];
    let mut known = false;
    for rec in records {
        if rec.origin == antenna_id || rec.dest == antenna_id {
            known = true;
        }
        if direction.matches(rec, antenna_id) {
            if let Some(i) = window.hour_index(rec.hour) {
                counts[i] += rec.n_calls as u64;
            }
        }
    }
    if !known {
        return HourlySeries::all_missing(antenna_id, direction, window);
    }
    mask(antenna_id, direction, timeline, &counts)
}

fn mask(antenna_id: AntennaId, direction: Direction, timeline: &Timeline, counts: &[u64]) -> HourlySeries {
    HourlySeries {
        antenna_id,
        direction,
        window: *timeline.window(),
        values: counts
            .iter()
            .enumerate()
            .map(|(i, c)| timeline.is_present_index(i).then_some(*c))
            .collect(),
    }
}

#[derive(Debug, Clone)]
struct AntennaCounts {
    originating: Vec<u64>,
    terminating: Vec<u64>,
    both: Vec<u64>,
}

/// Hourly counts for many antennas, filled in one pass over the traffic.
#[derive(Debug, Clone)]
pub struct CallTable {
    window: Window,
    tracked: Option<HashSet<AntennaId>>,
    counts: HashMap<AntennaId, AntennaCounts>,
}

impl CallTable {
    /// Tracks every antenna seen, or only `tracked` when given.
    pub fn new(window: Window, tracked: Option<HashSet<AntennaId>>) -> Self {
        Self {
            window,
            tracked,
            counts: HashMap::new(),
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    fn slot(&mut self, antenna: AntennaId) -> Option<&mut AntennaCounts> {
        if self.tracked.as_ref().is_some_and(|t| !t.contains(&antenna)) {
            return None;
        }
        let hours = self.window.hours();
        Some(self.counts.entry(antenna).or_insert_with(|| AntennaCounts {
            originating: vec![0; hours],
            terminating: vec![0; hours],
            both: vec![0; hours],
        }))
    }

    pub fn push(&mut self, rec: &TrafficRecord) {
        let Some(i) = self.window.hour_index(rec.hour) else { return };
        let n = rec.n_calls as u64;
        if let Some(c) = self.slot(rec.origin) {
            c.originating[i] += n;
            c.both[i] += n;
        }
        if rec.dest != rec.origin {
            if let Some(c) = self.slot(rec.dest) {
                c.terminating[i] += n;
                c.both[i] += n;
            }
        } else if let Some(c) = self.slot(rec.dest) {
            c.terminating[i] += n;
        }
    }

    pub fn series(&self, antenna_id: AntennaId, direction: Direction, timeline: &Timeline) -> HourlySeries {
        debug_assert_eq!(timeline.window(), &self.window);
        match self.counts.get(&antenna_id) {
            None => HourlySeries::all_missing(antenna_id, direction, self.window),
            Some(c) => {
                let counts = match direction {
                    Direction::Originating => &c.originating,
                    Direction::Terminating => &c.terminating,
                    Direction::Both => &c.both,
                };
                mask(antenna_id, direction, timeline, counts)
            }
        }
    }
}
