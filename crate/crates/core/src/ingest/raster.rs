use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use super::IngestError;
use crate::geo::LightRaster;

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

/// Reads an ESRI-style ASCII grid: six `key value` header lines followed by
/// `nrows` lines of `ncols` whitespace-separated values, northern row first.
pub fn parse_raster<R: Read>(rdr: R) -> Result<LightRaster, IngestError> {
    let mut lines = BufReader::new(rdr).lines();
    let mut header: HashMap<&'static str, String> = HashMap::new();
    for lineno in 1..=6u64 {
        let line = lines
            .next()
            .transpose()?
            .ok_or_else(|| IngestError::RasterHeader(format!("expected 6 header lines, got {}", lineno - 1)))?;
        let mut parts = line.split_whitespace();
        let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(IngestError::row(lineno, format!("malformed header line {line:?}")));
        };
        let key = HEADER_KEYS
            .iter()
            .find(|k| k.eq_ignore_ascii_case(key))
            .ok_or_else(|| IngestError::row(lineno, format!("unknown header key {key:?}")))?;
        if header.insert(key, value.to_owned()).is_some() {
            return Err(IngestError::row(lineno, format!("repeated header key {key:?}")));
        }
    }
    let get = |k: &'static str| header.get(k).ok_or_else(|| IngestError::RasterHeader(format!("missing `{k}`")));
    let num = |k: &'static str| -> Result<f64, IngestError> {
        get(k)?
            .parse()
            .map_err(|_| IngestError::RasterHeader(format!("invalid `{k}`")))
    };
    let count = |k: &'static str| -> Result<usize, IngestError> {
        get(k)?
            .parse()
            .map_err(|_| IngestError::RasterHeader(format!("invalid `{k}`")))
    };
    let (ncols, nrows) = (count("ncols")?, count("nrows")?);
    let (xll, yll, cellsize, nodata) = (num("xllcorner")?, num("yllcorner")?, num("cellsize")?, num("nodata_value")?);

    let mut values = Vec::with_capacity(ncols.saturating_mul(nrows));
    let mut lineno = 6u64;
    let mut rows_read = 0;
    for line in lines {
        let line = line?;
        lineno += 1;
        if line.trim().is_empty() {
            continue;
        }
        rows_read += 1;
        if rows_read > nrows {
            return Err(IngestError::row(lineno, format!("more than {nrows} rows")));
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| IngestError::row(lineno, format!("invalid value {tok:?}")))?;
            values.push(v);
        }
        if values.len() - before != ncols {
            return Err(IngestError::row(lineno, format!("expected {ncols} values, got {}", values.len() - before)));
        }
    }
    if rows_read != nrows {
        return Err(IngestError::RasterHeader(format!("expected {nrows} rows, got {rows_read}")));
    }
    LightRaster::from_corner(ncols, nrows, xll, yll, cellsize, nodata, values)
        .map_err(|e| IngestError::RasterHeader(e.to_string()))
}

/// Writes the canonical text form; numbers use the shortest representation
/// that parses back to the same `f64`.
pub fn write_raster<W: Write>(mut w: W, r: &LightRaster) -> std::io::Result<()> {
    writeln!(w, "ncols {}", r.ncols())?;
    writeln!(w, "nrows {}", r.nrows())?;
    writeln!(w, "xllcorner {}", r.xllcorner())?;
    writeln!(w, "yllcorner {}", r.yllcorner())?;
    writeln!(w, "cellsize {}", r.cellsize_deg())?;
    writeln!(w, "nodata_value {}", r.nodata())?;
    for row in r.values().chunks(r.ncols()) {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b" ")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{raster_value_at, GeoPoint};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn one_by_one() {
        let text = "ncols 1\nnrows 1\nxllcorner -4.5\nyllcorner 5\ncellsize 0.027\nnodata_value -9999\n12.5\n";
        let r = parse_raster(text.as_bytes()).unwrap();
        assert_eq!(r.values(), &[12.5]);
        let mut out = Vec::new();
        write_raster(&mut out, &r).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn nodata_preserved_as_absent() {
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -9999\n-9999 3\n";
        let r = parse_raster(text.as_bytes()).unwrap();
        assert_eq!(raster_value_at(&r, GeoPoint::new(0.5, 0.5).unwrap()), None);
        assert_eq!(raster_value_at(&r, GeoPoint::new(0.5, 1.5).unwrap()), Some(3.0));
    }

    #[test]
    fn crlf_and_header_case() {
        let text = "NCOLS 1\r\nNROWS 1\r\nXLLCORNER 0\r\nYLLCORNER 0\r\nCELLSIZE 1\r\nNODATA_VALUE -1\r\n2\r\n";
        assert_eq!(parse_raster(text.as_bytes()).unwrap().values(), &[2.0]);
    }

    #[test]
    fn wrong_row_width_names_line() {
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -1\n1 2 3\n";
        assert_eq!(parse_raster(text.as_bytes()).unwrap_err().line(), Some(7));
    }

    #[test]
    fn missing_rows_rejected() {
        let text = "ncols 1\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nnodata_value -1\n1\n";
        assert!(parse_raster(text.as_bytes()).is_err());
    }

    #[test]
    fn random_grid_round_trip() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        let values: Vec<f64> = (0..2500)
            .map(|_| if rng.random_bool(0.1) { -9999.0 } else { rng.random_range(0.0..1000.0) })
            .collect();
        let r = LightRaster::from_corner(50, 50, -8.6, 4.3, 0.027, -9999.0, values).unwrap();
        let mut text = Vec::new();
        write_raster(&mut text, &r).unwrap();
        let back = parse_raster(text.as_slice()).unwrap();
        assert_eq!(back, r);
        let mut again = Vec::new();
        write_raster(&mut again, &back).unwrap();
        assert_eq!(again, text);
    }
}
