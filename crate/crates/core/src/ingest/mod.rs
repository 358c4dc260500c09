//! Streaming parsers and writers for the five input files.
//!
//! | file | header | columns |
//! |------|--------|---------|
//! | antennas | none | `antenna_id,lon,lat` |
//! | traffic | none | `timestamp,origin,dest,n_calls,duration` |
//! | trajectories | none | `user_id,timestamp,antenna_id` |
//! | fires | required | at least `latitude,longitude,acq_date`; optional `acq_time,confidence` |
//! | night lights | ASCII grid | six `key value` lines then rows, top row first |
//!
//! Every reader is single pass over a [`std::io::Read`] and keeps only a
//! reused record buffer, so memory does not grow with file size.

mod antennas;
mod fires;
mod raster;
mod traffic;
mod trajectories;

pub use antennas::{parse_antennas, write_antennas, Antenna, AntennaId};
pub use fires::{parse_fires, write_fires, FireEvent, FireParse, FIRE_HEADER};
pub use raster::{parse_raster, write_raster};
pub use traffic::{parse_traffic, write_traffic_record, Timeline, TrafficReader, TrafficRecord};
pub use trajectories::{
    parse_trajectories, write_trajectory_point, TrajectoryPoint, TrajectoryReader, VisitorKey, DEFAULT_PERIOD_DAYS,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How rows that cannot be used are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Skip and count.
    #[default]
    Lenient,
    /// First bad row aborts the parse.
    Strict,
}

/// Per-file row accounting: `rows == kept + skipped + errored`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowCounts {
    pub rows: u64,
    pub kept: u64,
    /// Well-formed rows filtered out (outside window or bounding box).
    pub skipped: u64,
    /// Malformed rows dropped in lenient mode.
    pub errored: u64,
}

impl RowCounts {
    pub fn is_consistent(&self) -> bool {
        self.rows == self.kept + self.skipped + self.errored
    }

    /// The one-line summary printed by the `ingest` command.
    pub fn summary_line(&self, missing_hours: usize) -> String {
        format!(
            "rows={} kept={} skipped={} missing_hours={}",
            self.rows,
            self.kept,
            self.skipped + self.errored,
            missing_hours
        )
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: duplicate antenna id {id}")]
    DuplicateAntenna { line: u64, id: AntennaId },
    #[error("missing mandatory column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: {what} outside the observation window")]
    OutOfWindow { line: u64, what: String },
    #[error("invalid raster header: {0}")]
    RasterHeader(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    pub(crate) fn row(line: u64, message: impl fmt::Display) -> Self {
        IngestError::Row {
            line,
            message: message.to_string(),
        }
    }

    pub fn line(&self) -> Option<u64> {
        match self {
            IngestError::Row { line, .. }
            | IngestError::DuplicateAntenna { line, .. }
            | IngestError::OutOfWindow { line, .. } => Some(*line),
            _ => None,
        }
    }
}

pub(crate) fn headerless_reader<R: std::io::Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

pub(crate) fn field<'a>(rec: &'a csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<&'a str, IngestError> {
    rec.get(idx)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| IngestError::row(line, format!("missing field `{name}`")))
}

pub(crate) fn parse_num<T: std::str::FromStr>(s: &str, line: u64, name: &str) -> Result<T, IngestError> {
    s.parse()
        .map_err(|_| IngestError::row(line, format!("invalid {name} {s:?}")))
}

pub(crate) fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}
