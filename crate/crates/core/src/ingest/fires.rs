use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{line_of, parse_num, IngestError, ParseMode, RowCounts};
use crate::geo::{BoundingBox, GeoPoint};
use crate::time::{parse_date, Window};

pub const FIRE_HEADER: &str = "latitude,longitude,acq_date,acq_time,confidence";

/// A satellite active-fire detection: the center of a ~1 km pixel flagged
/// as burning on a given day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FireEvent {
    pub position: GeoPoint,
    pub date: NaiveDate,
    /// Overpass time as minutes after midnight UTC.
    pub acq_time: Option<u16>,
    /// Detection confidence, 0-100.
    pub confidence: Option<u8>,
}

#[derive(Debug, Clone, Default)]
pub struct FireParse {
    pub fires: Vec<FireEvent>,
    pub counts: RowCounts,
}

struct Columns {
    lat: usize,
    lon: usize,
    date: usize,
    time: Option<usize>,
    confidence: Option<usize>,
}

impl Columns {
    fn locate(header: &csv::StringRecord) -> Result<Self, IngestError> {
        let find = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
        Ok(Columns {
            lat: find("latitude").ok_or(IngestError::MissingColumn("latitude"))?,
            lon: find("longitude").ok_or(IngestError::MissingColumn("longitude"))?,
            date: find("acq_date").ok_or(IngestError::MissingColumn("acq_date"))?,
            time: find("acq_time"),
            confidence: find("confidence"),
        })
    }
}

/// Reads a FIRMS-style CSV export, keeping detections inside the inclusive
/// `bbox` (and inside `window`, when given). Extra columns are ignored.
pub fn parse_fires<R: Read>(
    rdr: R,
    bbox: &BoundingBox,
    window: Option<&Window>,
    mode: ParseMode,
) -> Result<FireParse, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(rdr);
    let cols = Columns::locate(csv.headers()?)?;
    let mut out = FireParse::default();
    let mut rec = csv::StringRecord::new();
    while csv.read_record(&mut rec)? {
        out.counts.rows += 1;
        match parse_row(&rec, &cols) {
            Ok(f) => {
                let inside = bbox.contains(f.position) && window.is_none_or(|w| w.contains_date(f.date));
                if inside {
                    out.counts.kept += 1;
                    out.fires.push(f);
                } else {
                    out.counts.skipped += 1;
                }
            }
            Err(e) => {
                out.counts.errored += 1;
                if mode == ParseMode::Strict {
                    return Err(e);
                }
            }
        }
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, cols: &Columns) -> Result<FireEvent, IngestError> {
    let line = line_of(rec);
    let get = |i: usize| rec.get(i).unwrap_or("");
    let lat: f64 = parse_num(get(cols.lat), line, "latitude")?;
    let lon: f64 = parse_num(get(cols.lon), line, "longitude")?;
    let position = GeoPoint::new(lat, lon).map_err(|e| IngestError::row(line, e))?;
    let date = parse_date(get(cols.date)).map_err(|e| IngestError::row(line, e))?;
    let acq_time = match cols.time.map(get).filter(|s| !s.is_empty()) {
        None => None,
        Some(s) => Some(parse_acq_time(s).ok_or_else(|| IngestError::row(line, format!("invalid acq_time {s:?}")))?),
    };
    let confidence = match cols.confidence.map(get).filter(|s| !s.is_empty()) {
        None => None,
        Some(s) => match s.parse::<f64>() {
            Ok(c) if (0.0..=100.0).contains(&c) => Some(c.round() as u8),
            Ok(c) => return Err(IngestError::row(line, format!("confidence {c} outside 0-100"))),
            // VIIRS exports use l/n/h codes
            Err(_) => None,
        },
    };
    Ok(FireEvent {
        position,
        date,
        acq_time,
        confidence,
    })
}

/// `HHMM`, `HMM` or `HH:MM`.
fn parse_acq_time(s: &str) -> Option<u16> {
    let (h, m) = match s.split_once(':') {
        Some((h, m)) => (h.parse::<u16>().ok()?, m.parse::<u16>().ok()?),
        None => {
            let v: u16 = s.parse().ok()?;
            (v / 100, v % 100)
        }
    };
    (h < 24 && m < 60).then_some(h * 60 + m)
}

pub fn write_fires<W: Write>(mut w: W, fires: &[FireEvent]) -> std::io::Result<()> {
    writeln!(w, "{FIRE_HEADER}")?;
    for f in fires {
        write!(w, "{},{},{},", f.position.lat(), f.position.lon(), f.date.format("%Y-%m-%d"))?;
        if let Some(t) = f.acq_time {
            write!(w, "{:02}{:02}", t / 60, t % 60)?;
        }
        w.write_all(b",")?;
        if let Some(c) = f.confidence {
            write!(w, "{c}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}
