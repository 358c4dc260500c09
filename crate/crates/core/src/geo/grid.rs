use std::collections::HashMap;

use super::point::{haversine_km, GeoPoint, EARTH_RADIUS_KM, KM_PER_DEGREE};

// Padding added to every degree range so rounding never drops a border cell.
const RANGE_PAD_DEG: f64 = 1e-7;

/// Uniform lat/lon bucket grid for radius queries.
///
/// Cells are `cell_km` tall; their width in degrees of longitude is scaled by
/// `cos(latitude)` at the midpoint of the indexed extent. Queries widen their
/// longitude range for the query latitude, so the candidate set always covers
/// the true neighbor set whatever the cell size.
#[derive(Debug, Clone)]
pub struct GridIndex<T> {
    cell_km: f64,
    km_per_lon_degree: f64,
    buckets: HashMap<(i64, i64), Vec<(T, GeoPoint)>>,
    len: usize,
}

impl<T: Copy> GridIndex<T> {
    pub fn build(points: impl IntoIterator<Item = (T, GeoPoint)>, cell_km: f64) -> Self {
        assert!(cell_km.is_finite() && cell_km > 0.0, "cell size must be positive");
        let points: Vec<(T, GeoPoint)> = points.into_iter().collect();
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, p)| {
            (lo.min(p.lat()), hi.max(p.lat()))
        });
        let mid_lat = if points.is_empty() { 0.0 } else { 0.5 * (lo + hi) };
        let km_per_lon_degree = KM_PER_DEGREE * mid_lat.to_radians().cos().max(1e-3);
        let mut index = Self {
            cell_km,
            km_per_lon_degree,
            buckets: HashMap::new(),
            len: points.len(),
        };
        for (id, p) in points {
            let key = index.cell_of(p.lat(), p.lon());
            index.buckets.entry(key).or_default().push((id, p));
        }
        index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_km(&self) -> f64 {
        self.cell_km
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    fn row_of(&self, lat: f64) -> i64 {
        (lat * KM_PER_DEGREE / self.cell_km).floor() as i64
    }

    fn col_of(&self, lon: f64) -> i64 {
        (lon * self.km_per_lon_degree / self.cell_km).floor() as i64
    }

    fn cell_of(&self, lat: f64, lon: f64) -> (i64, i64) {
        (self.row_of(lat), self.col_of(lon))
    }

    /// Candidate ids that may lie within `radius_km` of `p`. Always a superset
    /// of the true neighbor set; filter with [`haversine_km`].
    pub fn query(&self, p: GeoPoint, radius_km: f64) -> Vec<T> {
        let mut out = Vec::new();
        self.visit_candidates(p, radius_km, |id, _| out.push(id));
        out
    }

    /// Ids and distances of all points strictly closer than `radius_km`.
    pub fn within(&self, p: GeoPoint, radius_km: f64) -> Vec<(T, f64)> {
        let mut out = Vec::new();
        self.visit_candidates(p, radius_km, |id, q| {
            let d = haversine_km(p, q);
            if d < radius_km {
                out.push((id, d));
            }
        });
        out
    }

    fn visit_candidates(&self, p: GeoPoint, radius_km: f64, mut visit: impl FnMut(T, GeoPoint)) {
        if self.buckets.is_empty() || !(radius_km >= 0.0) {
            return;
        }
        let angular = radius_km / EARTH_RADIUS_KM;
        let dlat = angular.to_degrees() + RANGE_PAD_DEG;
        let lat_lo = (p.lat() - dlat).max(-90.0);
        let lat_hi = (p.lat() + dlat).min(90.0);

        // Longitude half-width of the spherical cap, or the whole circle when
        // the cap touches a pole.
        let lon_ranges: Vec<(f64, f64)> = {
            let ratio = angular.sin() / p.lat().to_radians().cos();
            let polar = p.lat() + dlat >= 90.0 || p.lat() - dlat <= -90.0;
            if polar || ratio >= 1.0 || angular >= std::f64::consts::FRAC_PI_2 {
                vec![(-180.0, 180.0)]
            } else {
                let dlon = ratio.asin().to_degrees() + RANGE_PAD_DEG;
                let (lo, hi) = (p.lon() - dlon, p.lon() + dlon);
                if lo < -180.0 {
                    vec![(-180.0, hi), (lo + 360.0, 180.0)]
                } else if hi > 180.0 {
                    vec![(lo, 180.0), (-180.0, hi - 360.0)]
                } else {
                    vec![(lo, hi)]
                }
            }
        };

        let (r0, r1) = (self.row_of(lat_lo), self.row_of(lat_hi));
        let col_ranges: Vec<(i64, i64)> = lon_ranges
            .iter()
            .map(|&(lo, hi)| (self.col_of(lo), self.col_of(hi)))
            .collect();
        let n_cells: u128 = col_ranges
            .iter()
            .map(|&(c0, c1)| ((r1 - r0 + 1) as u128) * ((c1 - c0 + 1) as u128))
            .sum();

        if n_cells > self.buckets.len() as u128 {
            for (&(row, col), items) in &self.buckets {
                let hit = row >= r0 && row <= r1 && col_ranges.iter().any(|&(c0, c1)| col >= c0 && col <= c1);
                if hit {
                    items.iter().for_each(|&(id, q)| visit(id, q));
                }
            }
        } else {
            for row in r0..=r1 {
                for &(c0, c1) in &col_ranges {
                    for col in c0..=c1 {
                        if let Some(items) = self.buckets.get(&(row, col)) {
                            items.iter().for_each(|&(id, q)| visit(id, q));
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;
    use std::collections::BTreeSet;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn scan(points: &[(u32, GeoPoint)], p: GeoPoint, r: f64) -> BTreeSet<u32> {
        points.iter().filter(|(_, q)| haversine_km(p, *q) < r).map(|(id, _)| *id).collect()
    }

    #[test]
    fn empty_index_yields_nothing() {
        let ix: GridIndex<u32> = GridIndex::build(Vec::new(), 1.0);
        assert!(ix.query(pt(5.0, -4.0), 10.0).is_empty());
    }

    #[test]
    fn point_itself_is_a_candidate() {
        let ix = GridIndex::build(vec![(7u32, pt(5.35, -4.02))], 1.0);
        for r in [0.0, 0.001, 1.0, 500.0] {
            assert_eq!(ix.query(pt(5.35, -4.02), r), vec![7]);
        }
    }

    #[test]
    fn every_point_in_exactly_one_bucket() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let pts: Vec<_> = (0..2000u32)
            .map(|i| (i, pt(rng.random_range(4.0..11.0), rng.random_range(-9.0..-2.0))))
            .collect();
        let ix = GridIndex::build(pts, 2.0);
        let mut seen: Vec<u32> = ix.buckets.values().flatten().map(|(id, _)| *id).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..2000).collect::<Vec<_>>());
    }

    #[test]
    fn filtered_queries_match_linear_scan() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(42);
        let pts: Vec<_> = (0..10_000u32)
            .map(|i| (i, pt(rng.random_range(4.3..10.7), rng.random_range(-8.6..-2.5))))
            .collect();
        let ix = GridIndex::build(pts.iter().copied(), 1.0);
        for _ in 0..100 {
            let q = pt(rng.random_range(4.0..11.0), rng.random_range(-9.0..-2.0));
            let r = rng.random_range(0.1..40.0);
            let got: BTreeSet<u32> = ix.within(q, r).into_iter().map(|(id, _)| id).collect();
            assert_eq!(got, scan(&pts, q, r));
        }
    }

    #[test]
    fn handles_poles_and_antimeridian() {
        let pts = vec![
            (1u32, pt(89.99, 10.0)),
            (2, pt(89.99, -170.0)),
            (3, pt(0.0, 179.995)),
            (4, pt(0.0, -179.995)),
            (5, pt(-60.0, 179.9)),
        ];
        let ix = GridIndex::build(pts.iter().copied(), 0.5);
        for (q, r) in [(pt(89.995, 100.0), 5.0), (pt(0.0, 180.0), 1.0), (pt(-60.0, -179.95), 10.0)] {
            let got: BTreeSet<u32> = ix.within(q, r).into_iter().map(|(id, _)| id).collect();
            assert_eq!(got, scan(&pts, q, r));
        }
    }

    proptest! {
        #[test]
        fn cell_size_never_affects_result(
            cell in 0.05f64..50.0,
            radius in 0.0f64..80.0,
            seed in 0u64..1000,
        ) {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let pts: Vec<_> = (0..300u32)
                .map(|i| (i, pt(rng.random_range(-70.0..70.0), rng.random_range(-180.0..180.0))))
                .collect();
            let ix = GridIndex::build(pts.iter().copied(), cell);
            let q = pts[0].1;
            let got: BTreeSet<u32> = ix.within(q, radius).into_iter().map(|(id, _)| id).collect();
            prop_assert_eq!(got, scan(&pts, q, radius));
        }
    }
}
