//! UTC hour/minute stamps, ISO-8601 parsing and the observation window.

use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const UNIX_EPOCH_DAYS_FROM_CE: i64 = 719_163;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid timestamp {0:?}")]
pub struct TimestampError(pub String);

/// Whole hours since 1970-01-01T00:00 UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HourStamp(pub i64);

/// Whole minutes since 1970-01-01T00:00 UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MinuteStamp(pub i64);

pub fn day_number(date: NaiveDate) -> i64 {
    date.num_days_from_ce() as i64 - UNIX_EPOCH_DAYS_FROM_CE
}

pub fn date_from_day_number(day: i64) -> NaiveDate {
    NaiveDate::from_num_days_from_ce_opt((day + UNIX_EPOCH_DAYS_FROM_CE) as i32).expect("day number in chrono range")
}

impl HourStamp {
    pub fn from_date_hour(date: NaiveDate, hour: u32) -> Self {
        HourStamp(day_number(date) * 24 + hour as i64)
    }
    pub fn date(self) -> NaiveDate {
        date_from_day_number(self.0.div_euclid(24))
    }
    pub fn hour_of_day(self) -> u32 {
        self.0.rem_euclid(24) as u32
    }
}

impl fmt::Display for HourStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}T{:02}:00:00", self.date().format("%Y-%m-%d"), self.hour_of_day())
    }
}

impl MinuteStamp {
    pub fn from_date_minute(date: NaiveDate, minute_of_day: u32) -> Self {
        MinuteStamp(day_number(date) * 1440 + minute_of_day as i64)
    }
    pub fn date(self) -> NaiveDate {
        date_from_day_number(self.0.div_euclid(1440))
    }
    pub fn minute_of_day(self) -> u32 {
        self.0.rem_euclid(1440) as u32
    }
    pub fn hour(self) -> HourStamp {
        HourStamp(self.0.div_euclid(60))
    }
}

impl fmt::Display for MinuteStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.minute_of_day();
        write!(f, "{}T{:02}:{:02}:00", self.date().format("%Y-%m-%d"), m / 60, m % 60)
    }
}

/// Parses `YYYY-MM-DD[T| ]HH[:MM[:SS[.frac]]][Z]` into whole seconds since
/// the Unix epoch. Offsets other than `Z` are rejected: every input is UTC.
pub fn parse_timestamp_secs(s: &str) -> Result<i64, TimestampError> {
    let err = || TimestampError(s.to_owned());
    let b = s.trim().as_bytes();
    let b = b.strip_suffix(b"Z").unwrap_or(b);
    if b.len() < 13 || b[4] != b'-' || b[7] != b'-' || !(b[10] == b'T' || b[10] == b' ') {
        return Err(err());
    }
    let year = digits(&b[0..4]).ok_or_else(err)?;
    let month = digits(&b[5..7]).ok_or_else(err)?;
    let day = digits(&b[8..10]).ok_or_else(err)?;
    let hour = digits(&b[11..13]).ok_or_else(err)?;
    let mut minute = 0;
    let mut second = 0;
    let rest = &b[13..];
    match rest.len() {
        0 => {}
        3 if rest[0] == b':' => minute = digits(&rest[1..3]).ok_or_else(err)?,
        n if n >= 6 && rest[0] == b':' && rest[3] == b':' => {
            minute = digits(&rest[1..3]).ok_or_else(err)?;
            second = digits(&rest[4..6]).ok_or_else(err)?;
            let frac = &rest[6..];
            if !frac.is_empty() && (frac[0] != b'.' || frac.len() == 1 || digits(&frac[1..]).is_none()) {
                return Err(err());
            }
        }
        _ => return Err(err()),
    }
    if hour > 23 || minute > 59 || second > 59 {
        return Err(err());
    }
    let date = NaiveDate::from_ymd_opt(year as i32, month, day).ok_or_else(err)?;
    Ok(day_number(date) * 86_400 + (hour * 3600 + minute * 60 + second) as i64)
}

pub fn parse_hour(s: &str) -> Result<HourStamp, TimestampError> {
    parse_timestamp_secs(s).map(|secs| HourStamp(secs.div_euclid(3600)))
}

/// Truncates any seconds to the containing minute.
pub fn parse_minute(s: &str) -> Result<MinuteStamp, TimestampError> {
    parse_timestamp_secs(s).map(|secs| MinuteStamp(secs.div_euclid(60)))
}

pub fn parse_date(s: &str) -> Result<NaiveDate, TimestampError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| TimestampError(s.to_owned()))
}

fn digits(b: &[u8]) -> Option<u32> {
    if b.is_empty() || b.len() > 9 {
        return None;
    }
    b.iter().try_fold(0u32, |acc, c| c.is_ascii_digit().then(|| acc * 10 + (c - b'0') as u32))
}

/// Observation window covering whole UTC days `first_day..=last_day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
}

impl Window {
    pub fn new(first_day: NaiveDate, last_day: NaiveDate) -> Self {
        assert!(first_day <= last_day, "window must not be empty");
        Self { first_day, last_day }
    }

    pub fn start_hour(&self) -> HourStamp {
        HourStamp::from_date_hour(self.first_day, 0)
    }

    /// Exclusive end.
    pub fn end_hour(&self) -> HourStamp {
        HourStamp(self.start_hour().0 + self.hours() as i64)
    }

    pub fn hours(&self) -> usize {
        self.days() * 24
    }

    pub fn days(&self) -> usize {
        (day_number(self.last_day) - day_number(self.first_day) + 1) as usize
    }

    pub fn contains_hour(&self, h: HourStamp) -> bool {
        h >= self.start_hour() && h < self.end_hour()
    }

    pub fn contains_date(&self, d: NaiveDate) -> bool {
        d >= self.first_day && d <= self.last_day
    }

    /// Offset of `h` from the window start, if inside.
    pub fn hour_index(&self, h: HourStamp) -> Option<usize> {
        self.contains_hour(h).then(|| (h.0 - self.start_hour().0) as usize)
    }

    pub fn hour_at(&self, index: usize) -> HourStamp {
        HourStamp(self.start_hour().0 + index as i64)
    }

    pub fn day_index(&self, d: NaiveDate) -> Option<usize> {
        self.contains_date(d).then(|| (day_number(d) - day_number(self.first_day)) as usize)
    }

    pub fn day_at(&self, index: usize) -> NaiveDate {
        date_from_day_number(day_number(self.first_day) + index as i64)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.days()).map(|i| self.day_at(i))
    }
}

impl Default for Window {
    /// December 1, 2011 through April 28, 2012: 150 days, 3600 hours.
    fn default() -> Self {
        Self::new(
            NaiveDate::from_ymd_opt(2011, 12, 1).unwrap(),
            NaiveDate::from_ymd_opt(2012, 4, 28).unwrap(),
        )
    }
}
