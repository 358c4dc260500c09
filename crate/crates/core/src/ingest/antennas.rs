use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{field, headerless_reader, line_of, parse_num, IngestError};
use crate::geo::GeoPoint;

pub type AntennaId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Antenna {
    pub id: AntennaId,
    pub position: GeoPoint,
}

/// Reads `antenna_id,lon,lat` rows. Any malformed row or repeated id fails the
/// whole parse with the offending line number.
pub fn parse_antennas<R: Read>(rdr: R) -> Result<Vec<Antenna>, IngestError> {
    let mut csv = headerless_reader(rdr);
    let mut rec = csv::StringRecord::new();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    while csv.read_record(&mut rec)? {
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(IngestError::row(line, format!("expected 3 fields, got {}", rec.len())));
        }
        let id: AntennaId = parse_num(field(&rec, 0, line, "antenna_id")?, line, "antenna_id")?;
        if id == 0 {
            return Err(IngestError::row(line, "antenna id must be positive"));
        }
        let lon: f64 = parse_num(field(&rec, 1, line, "lon")?, line, "lon")?;
        let lat: f64 = parse_num(field(&rec, 2, line, "lat")?, line, "lat")?;
        let position = GeoPoint::new(lat, lon).map_err(|e| IngestError::row(line, e))?;
        if !seen.insert(id) {
            return Err(IngestError::DuplicateAntenna { line, id });
        }
        out.push(Antenna { id, position });
    }
    Ok(out)
}

pub fn write_antennas<W: Write>(mut w: W, antennas: &[Antenna]) -> std::io::Result<()> {
    for a in antennas {
        writeln!(w, "{},{},{}", a.id, a.position.lon(), a.position.lat())?;
    }
    Ok(())
}
