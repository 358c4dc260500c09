use std::io::{Read, Write};

use serde::Serialize;

use super::{field, headerless_reader, line_of, parse_num, AntennaId, IngestError, ParseMode, RowCounts};
use crate::time::{parse_hour, HourStamp, Window};

/// Calls between two antennas during one UTC hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrafficRecord {
    pub hour: HourStamp,
    pub origin: AntennaId,
    pub dest: AntennaId,
    pub n_calls: u32,
    /// Total call duration in minutes.
    pub duration: f64,
}

/// Which hours of the observation window carried any traffic at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Timeline {
    window: Window,
    present: Vec<bool>,
}

impl Timeline {
    pub fn empty(window: Window) -> Self {
        Self {
            window,
            present: vec![false; window.hours()],
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn mark(&mut self, h: HourStamp) {
        if let Some(i) = self.window.hour_index(h) {
            self.present[i] = true;
        }
    }

    pub fn is_present(&self, h: HourStamp) -> bool {
        self.window.hour_index(h).is_some_and(|i| self.present[i])
    }

    pub fn is_present_index(&self, index: usize) -> bool {
        self.present[index]
    }

    pub fn total_hours(&self) -> usize {
        self.present.len()
    }

    pub fn present_hours(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }

    pub fn missing_hours(&self) -> usize {
        self.total_hours() - self.present_hours()
    }

    pub fn missing(&self) -> impl Iterator<Item = HourStamp> + '_ {
        self.present
            .iter()
            .enumerate()
            .filter(|(_, p)| !**p)
            .map(|(i, _)| self.window.hour_at(i))
    }
}

/// Streaming reader over `timestamp,origin,dest,n_calls,duration` rows.
///
/// Yields kept records one at a time and marks their hours on the timeline.
/// In strict mode the first bad row is yielded as an error and iteration
/// stops; in lenient mode bad rows are only counted.
pub struct TrafficReader<R: Read> {
    csv: csv::Reader<R>,
    rec: csv::StringRecord,
    timeline: Timeline,
    counts: RowCounts,
    mode: ParseMode,
    done: bool,
}

pub fn parse_traffic<R: Read>(rdr: R, window: Window, mode: ParseMode) -> TrafficReader<R> {
    TrafficReader {
        csv: headerless_reader(rdr),
        rec: csv::StringRecord::new(),
        timeline: Timeline::empty(window),
        counts: RowCounts::default(),
        mode,
        done: false,
    }
}

impl<R: Read> TrafficReader<R> {
    pub fn counts(&self) -> RowCounts {
        self.counts
    }

    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    /// Consumes the reader; call after the iterator is exhausted.
    pub fn finish(self) -> (Timeline, RowCounts) {
        (self.timeline, self.counts)
    }

    fn parse_row(&self) -> Result<TrafficRecord, IngestError> {
        let rec = &self.rec;
        let line = line_of(rec);
        if rec.len() != 5 {
            return Err(IngestError::row(line, format!("expected 5 fields, got {}", rec.len())));
        }
        let ts = field(rec, 0, line, "timestamp")?;
        let hour = parse_hour(ts).map_err(|e| IngestError::row(line, e))?;
        let origin = parse_num(field(rec, 1, line, "origin")?, line, "origin")?;
        let dest = parse_num(field(rec, 2, line, "dest")?, line, "dest")?;
        let n_calls = parse_num(field(rec, 3, line, "n_calls")?, line, "n_calls")?;
        let duration: f64 = parse_num(field(rec, 4, line, "duration")?, line, "duration")?;
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(IngestError::row(line, format!("invalid duration {duration}")));
        }
        Ok(TrafficRecord {
            hour,
            origin,
            dest,
            n_calls,
            duration,
        })
    }
}

impl<R: Read> Iterator for TrafficReader<R> {
    type Item = Result<TrafficRecord, IngestError>;

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
                Ok(r) if self.timeline.window().contains_hour(r.hour) => {
                    self.counts.kept += 1;
                    self.timeline.mark(r.hour);
                    return Some(Ok(r));
                }
                Ok(r) => {
                    self.counts.skipped += 1;
                    if self.mode == ParseMode::Strict {
                        self.done = true;
                        return Some(Err(IngestError::OutOfWindow {
                            line: line_of(&self.rec),
                            what: r.hour.to_string(),
                        }));
                    }
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

pub fn write_traffic_record<W: Write>(mut w: W, r: &TrafficRecord) -> std::io::Result<()> {
    writeln!(w, "{},{},{},{},{}", r.hour, r.origin, r.dest, r.n_calls, r.duration)
}
