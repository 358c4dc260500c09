use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{field, headerless_reader, line_of, parse_num, AntennaId, IngestError, ParseMode, RowCounts};
use crate::time::{day_number, parse_minute, MinuteStamp, Window};

/// User identifiers are re-drawn every two weeks.
pub const DEFAULT_PERIOD_DAYS: u32 = 14;

/// One logged position of a sampled user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrajectoryPoint {
    pub user_id: u64,
    pub timestamp: MinuteStamp,
    pub antenna_id: AntennaId,
}

/// Identity of a trajectory owner. A raw user id is only meaningful inside
/// its identifier period, so owners are keyed by `(period, user_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VisitorKey {
    pub period: i64,
    pub user_id: u64,
}

impl TrajectoryPoint {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }

    /// Identifier period counted from the first day of `window`.
    pub fn period(&self, window: &Window, period_days: u32) -> i64 {
        let days = self.timestamp.0.div_euclid(1440) - day_number(window.first_day);
        days.div_euclid(period_days as i64)
    }

    pub fn owner(&self, window: &Window, period_days: u32) -> VisitorKey {
        VisitorKey {
            period: self.period(window, period_days),
            user_id: self.user_id,
        }
    }
}

/// Streaming reader over `user_id,timestamp,antenna_id` rows. Seconds are
/// truncated to the minute. Antenna ids are not checked here.
pub struct TrajectoryReader<R: Read> {
    csv: csv::Reader<R>,
    rec: csv::StringRecord,
    counts: RowCounts,
    mode: ParseMode,
    done: bool,
}

pub fn parse_trajectories<R: Read>(rdr: R, mode: ParseMode) -> TrajectoryReader<R> {
    TrajectoryReader {
        csv: headerless_reader(rdr),
        rec: csv::StringRecord::new(),
        counts: RowCounts::default(),
        mode,
        done: false,
    }
}

impl<R: Read> TrajectoryReader<R> {
    pub fn counts(&self) -> RowCounts {
        self.counts
    }

    fn parse_row(&self) -> Result<TrajectoryPoint, IngestError> {
        let rec = &self.rec;
        let line = line_of(rec);
        if rec.len() != 3 {
            return Err(IngestError::row(line, format!("expected 3 fields, got {}", rec.len())));
        }
        let user_id = parse_num(field(rec, 0, line, "user_id")?, line, "user_id")?;
        let timestamp = parse_minute(field(rec, 1, line, "timestamp")?).map_err(|e| IngestError::row(line, e))?;
        let antenna_id = parse_num(field(rec, 2, line, "antenna_id")?, line, "antenna_id")?;
        Ok(TrajectoryPoint {
            user_id,
            timestamp,
            antenna_id,
        })
    }
}

impl<R: Read> Iterator for TrajectoryReader<R> {
    type Item = Result<TrajectoryPoint, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            match self.csv.read_record(&mut self.rec) {
                Ok(true) => {}
                Ok(false) => {
                    self.done = true;
                    return None;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            }
            self.counts.rows += 1;
            match self.parse_row() {
                Ok(p) => {
                    self.counts.kept += 1;
                    return Some(Ok(p));
                }
                Err(e) => {
                    self.counts.errored += 1;
                    if self.mode == ParseMode::Strict {
                        self.done = true;
                        return Some(Err(e));
                    }
                }
            }
        }
        None
    }
}

pub fn write_trajectory_point<W: Write>(mut w: W, p: &TrajectoryPoint) -> std::io::Result<()> {
    writeln!(w, "{},{},{}", p.user_id, p.timestamp, p.antenna_id)
}
