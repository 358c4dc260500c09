use super::point::{haversine_km, GeoError, GeoPoint, EARTH_RADIUS_KM, KM_PER_DEGREE};

/// Row/column address of a pixel; row 0 is the northernmost row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelIndex {
    pub row: usize,
    pub col: usize,
}

/// Georeferenced night-light intensity grid in plain lat/lon degrees.
///
/// Values are stored row-major with the top (northern) row first, which is
/// also the order used by the ASCII grid format. Cells equal to `nodata` are
/// treated as absent.
#[derive(Debug, Clone, PartialEq)]
pub struct LightRaster {
    ncols: usize,
    nrows: usize,
    xllcorner: f64,
    yllcorner: f64,
    cellsize_deg: f64,
    nodata: f64,
    values: Vec<f64>,
}

impl LightRaster {
    pub fn new(
        ncols: usize,
        nrows: usize,
        origin: GeoPoint,
        cellsize_deg: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, GeoError> {
        Self::from_corner(ncols, nrows, origin.lon(), origin.lat(), cellsize_deg, nodata, values)
    }

    /// Same as [`LightRaster::new`] with the lower-left corner given as raw
    /// coordinates.
    pub fn from_corner(
        ncols: usize,
        nrows: usize,
        xllcorner: f64,
        yllcorner: f64,
        cellsize_deg: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self, GeoError> {
        if ncols == 0 || nrows == 0 {
            return Err(GeoError::Raster("ncols and nrows must be positive".into()));
        }
        if !(cellsize_deg.is_finite() && cellsize_deg > 0.0) {
            return Err(GeoError::Raster(format!("cellsize must be > 0, got {cellsize_deg}")));
        }
        GeoPoint::new(yllcorner, xllcorner)?;
        if values.len() != ncols * nrows {
            return Err(GeoError::Raster(format!(
                "expected {} values, got {}",
                ncols * nrows,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| **v != nodata && !(v.is_finite() && **v >= 0.0)) {
            return Err(GeoError::Raster(format!("negative or non-finite intensity {bad}")));
        }
        Ok(Self {
            ncols,
            nrows,
            xllcorner,
            yllcorner,
            cellsize_deg,
            nodata,
            values,
        })
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn xllcorner(&self) -> f64 {
        self.xllcorner
    }
    pub fn yllcorner(&self) -> f64 {
        self.yllcorner
    }
    pub fn cellsize_deg(&self) -> f64 {
        self.cellsize_deg
    }
    pub fn nodata(&self) -> f64 {
        self.nodata
    }
    /// Raw cell values including nodata sentinels, top row first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, px: PixelIndex) -> Option<f64> {
        let v = self.values[px.row * self.ncols + px.col];
        (v != self.nodata).then_some(v)
    }

    /// (lat, lon) of the pixel center.
    pub fn pixel_center(&self, px: PixelIndex) -> (f64, f64) {
        let lat = self.yllcorner + (self.nrows - px.row) as f64 * self.cellsize_deg - 0.5 * self.cellsize_deg;
        let lon = self.xllcorner + (px.col as f64 + 0.5) * self.cellsize_deg;
        (lat, lon)
    }

    /// Pixel whose half-open cell `[west, east) x [south, north)` contains `p`.
    pub fn pixel_of(&self, p: GeoPoint) -> Option<PixelIndex> {
        let fx = (p.lon() - self.xllcorner) / self.cellsize_deg;
        let fy = (p.lat() - self.yllcorner) / self.cellsize_deg;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let col = fx.floor() as usize;
        let from_bottom = fy.floor() as usize;
        if col >= self.ncols || from_bottom >= self.nrows {
            return None;
        }
        Some(PixelIndex {
            row: self.nrows - 1 - from_bottom,
            col,
        })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        self.pixel_of(p).is_some()
    }
}

pub fn raster_value_at(raster: &LightRaster, p: GeoPoint) -> Option<f64> {
    raster.pixel_of(p).and_then(|px| raster.value(px))
}

/// Sum of all valid pixels whose center lies strictly closer than
/// `radius_km` to `center`.
///
/// Only the rows and columns that can intersect the spherical cap are
/// visited; pixels are accumulated in row-major order, so the result is
/// bit-identical to a full scan in the same order.
pub fn integrate_disk(raster: &LightRaster, center: GeoPoint, radius_km: f64) -> f64 {
    if !(radius_km > 0.0) {
        return 0.0;
    }
    let cs = raster.cellsize_deg;
    let nrows = raster.nrows as f64;
    let dlat = radius_km / KM_PER_DEGREE;

    let lat_hi = center.lat() + dlat;
    let lat_lo = center.lat() - dlat;
    let row_of = |lat: f64| nrows - 0.5 - (lat - raster.yllcorner) / cs;
    let row_start = clamp_index(row_of(lat_hi).floor() - 1.0, raster.nrows);
    let row_end = clamp_index(row_of(lat_lo).ceil() + 1.0, raster.nrows);

    let angular = radius_km / EARTH_RADIUS_KM;
    let (col_start, col_end) = if lat_hi >= 90.0 || lat_lo <= -90.0 {
        (0, raster.ncols - 1)
    } else {
        let ratio = angular.sin() / center.lat().to_radians().cos();
        if ratio >= 1.0 {
            (0, raster.ncols - 1)
        } else {
            let dlon = ratio.asin().to_degrees();
            if center.lon() - dlon < -180.0 || center.lon() + dlon > 180.0 {
                (0, raster.ncols - 1)
            } else {
                let col_of = |lon: f64| (lon - raster.xllcorner) / cs - 0.5;
                (
                    clamp_index(col_of(center.lon() - dlon).floor() - 1.0, raster.ncols),
                    clamp_index(col_of(center.lon() + dlon).ceil() + 1.0, raster.ncols),
                )
            }
        }
    };

    let mut sum = 0.0;
    for row in row_start..=row_end {
        for col in col_start..=col_end {
            let px = PixelIndex { row, col };
            let Some(v) = raster.value(px) else { continue };
            let (lat, lon) = raster.pixel_center(px);
            let Ok(pc) = GeoPoint::new(lat, lon) else { continue };
            if haversine_km(center, pc) < radius_km {
                sum += v;
            }
        }
    }
    sum
}

fn clamp_index(x: f64, len: usize) -> usize {
    if x <= 0.0 {
        0
    } else if x >= (len - 1) as f64 {
        len - 1
    } else {
        x as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn random_raster(rng: &mut Xoshiro256PlusPlus, ncols: usize, nrows: usize, cs: f64) -> LightRaster {
        let values = (0..ncols * nrows)
            .map(|_| if rng.random_bool(0.05) { -9999.0 } else { rng.random_range(0.0..50.0) })
            .collect();
        LightRaster::from_corner(ncols, nrows, -8.6, 4.3, cs, -9999.0, values).unwrap()
    }

    /// Full scan, independent of the windowing used by `integrate_disk`.
    fn brute_force_disk(r: &LightRaster, center: GeoPoint, radius: f64) -> f64 {
        let mut sum = 0.0;
        for row in 0..r.nrows() {
            for col in 0..r.ncols() {
                let v = r.values()[row * r.ncols() + col];
                if v == r.nodata() {
                    continue;
                }
                let lat = r.yllcorner() + (r.nrows() - row) as f64 * r.cellsize_deg() - 0.5 * r.cellsize_deg();
                let lon = r.xllcorner() + (col as f64 + 0.5) * r.cellsize_deg();
                if haversine_km(center, pt(lat, lon)) < radius {
                    sum += v;
                }
            }
        }
        sum
    }

    /// Explicit floor arithmetic on the corner coordinates.
    fn brute_force_value(r: &LightRaster, p: GeoPoint) -> Option<f64> {
        let mut found = None;
        for row in 0..r.nrows() {
            for col in 0..r.ncols() {
                let fy = ((p.lat() - r.yllcorner()) / r.cellsize_deg()).floor();
                let fx = ((p.lon() - r.xllcorner()) / r.cellsize_deg()).floor();
                if fy == (r.nrows() - 1 - row) as f64 && fx == col as f64 {
                    let v = r.values()[row * r.ncols() + col];
                    found = (v != r.nodata()).then_some(v);
                }
            }
        }
        found
    }

    #[test]
    fn outside_extent_is_absent() {
        let r = LightRaster::from_corner(2, 2, 0.0, 0.0, 1.0, -1.0, vec![1.0; 4]).unwrap();
        assert_eq!(raster_value_at(&r, pt(-0.5, 0.5)), None);
        assert_eq!(raster_value_at(&r, pt(0.5, 2.0)), None);
        assert_eq!(raster_value_at(&r, pt(2.0, 0.5)), None);
    }

    #[test]
    fn single_pixel_center() {
        let r = LightRaster::from_corner(1, 1, -4.5, 5.0, 0.5, -9999.0, vec![3.25]).unwrap();
        assert_eq!(raster_value_at(&r, pt(5.25, -4.25)), Some(3.25));
    }

    #[test]
    fn top_row_is_north() {
        // 1 col x 2 rows: north cell 1.0, south cell 2.0
        let r = LightRaster::from_corner(1, 2, 0.0, 0.0, 1.0, -1.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(raster_value_at(&r, pt(1.5, 0.5)), Some(1.0));
        assert_eq!(raster_value_at(&r, pt(0.5, 0.5)), Some(2.0));
    }

    #[test]
    fn nodata_is_absent() {
        let r = LightRaster::from_corner(1, 1, 0.0, 0.0, 1.0, -9999.0, vec![-9999.0]).unwrap();
        assert_eq!(raster_value_at(&r, pt(0.5, 0.5)), None);
    }

    #[test]
    fn rejects_bad_rasters() {
        assert!(LightRaster::from_corner(2, 2, 0.0, 0.0, 1.0, -1.0, vec![1.0; 3]).is_err());
        assert!(LightRaster::from_corner(1, 1, 0.0, 0.0, 0.0, -1.0, vec![1.0]).is_err());
        assert!(LightRaster::from_corner(1, 1, 0.0, 0.0, 1.0, -1.0, vec![-0.5]).is_err());
        assert!(LightRaster::from_corner(0, 1, 0.0, 0.0, 1.0, -1.0, vec![]).is_err());
    }

    #[test]
    fn random_points_match_floor_oracle() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let r = random_raster(&mut rng, 13, 9, 0.1);
        for _ in 0..500 {
            let p = pt(rng.random_range(4.1..5.4), rng.random_range(-8.8..-7.1));
            assert_eq!(raster_value_at(&r, p), brute_force_value(&r, p), "{p:?}");
        }
    }

    #[test]
    fn all_zero_raster_integrates_to_zero() {
        let r = LightRaster::from_corner(10, 10, 0.0, 0.0, 0.027, -1.0, vec![0.0; 100]).unwrap();
        assert_eq!(integrate_disk(&r, pt(0.1, 0.1), 7.5), 0.0);
    }

    #[test]
    fn single_pixel_one_km_away() {
        // pixel center at (0.0135, 0.0135); query center 1 km due south
        let r = LightRaster::from_corner(1, 1, 0.0, 0.0, 0.027, -1.0, vec![7.0]).unwrap();
        let c = pt(0.0135, 0.0135).destination(180.0, 1.0);
        assert_eq!(integrate_disk(&r, c, 7.5), 7.0);
        assert_eq!(integrate_disk(&r, c, 0.5), 0.0);
    }

    #[test]
    fn windowed_disk_matches_full_scan() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let r = random_raster(&mut rng, 100, 100, 0.027);
        for _ in 0..50 {
            let c = pt(rng.random_range(4.2..7.1), rng.random_range(-8.7..-5.8));
            let radius = rng.random_range(0.5..30.0);
            assert_eq!(integrate_disk(&r, c, radius), brute_force_disk(&r, c, radius));
        }
    }

    #[test]
    fn disk_is_monotone_in_radius() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let r = random_raster(&mut rng, 40, 40, 0.027);
        let c = pt(4.8, -8.1);
        let mut prev = 0.0;
        for step in 1..40 {
            let s = integrate_disk(&r, c, step as f64 * 0.75);
            assert!(s >= prev);
            prev = s;
        }
    }
}
