//! Spatial join between fire detections and antenna sites.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::GridIndex;
use crate::ingest::{Antenna, AntennaId, FireEvent};

pub const DEFAULT_THRESHOLD_KM: f64 = 1.0;

/// An antenna with a fire strictly closer than the join threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FireSitePair {
    pub antenna_id: AntennaId,
    pub fire: FireEvent,
    pub distance_km: f64,
}

impl FireSitePair {
    /// Canonical order: antenna, fire day, distance, then fire position.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.antenna_id
            .cmp(&other.antenna_id)
            .then(self.fire.date.cmp(&other.fire.date))
            .then(self.distance_km.total_cmp(&other.distance_km))
            .then(self.fire.position.lat().total_cmp(&other.fire.position.lat()))
            .then(self.fire.position.lon().total_cmp(&other.fire.position.lon()))
            .then(self.fire.acq_time.cmp(&other.fire.acq_time))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSummary {
    pub n_antennas_with_fire: usize,
    /// Fires per antenna -> number of antennas with that many fires.
    pub histogram: BTreeMap<usize, usize>,
    pub n_pairs: usize,
    /// Distinct fire events taking part in at least one pair.
    pub n_fires: usize,
    /// Rows dropped as same-day, same-position repeats before joining.
    pub n_duplicates_collapsed: usize,
}

impl JoinSummary {
    pub fn is_consistent(&self) -> bool {
        self.histogram.iter().map(|(k, v)| k * v).sum::<usize>() == self.n_pairs
            && self.histogram.values().sum::<usize>() == self.n_antennas_with_fire
    }
}

#[derive(Debug, Clone, Default)]
pub struct JoinResult {
    pub pairs: Vec<FireSitePair>,
    pub summary: JoinSummary,
}

/// Collapses detections sharing position and day to the first occurrence.
pub fn dedup_fires(fires: &[FireEvent]) -> Vec<FireEvent> {
    let mut seen = HashSet::with_capacity(fires.len());
    fires
        .iter()
        .filter(|f| seen.insert((f.position.lat().to_bits(), f.position.lon().to_bits(), f.date)))
        .copied()
        .collect()
}

/// Every (antenna, fire) pair closer than `threshold_km`, in canonical order.
///
/// A fire near several antennas yields one pair per antenna.
pub fn join(fires: &[FireEvent], antennas: &[Antenna], threshold_km: f64) -> JoinResult {
    assert!(threshold_km > 0.0, "join threshold must be positive");
    let unique = dedup_fires(fires);
    let index = GridIndex::build(antennas.iter().map(|a| (a.id, a.position)), threshold_km);

    let mut pairs: Vec<FireSitePair> = unique
        .par_iter()
        .flat_map_iter(|fire| {
            index
                .within(fire.position, threshold_km)
                .into_iter()
                .map(move |(antenna_id, distance_km)| FireSitePair {
                    antenna_id,
                    fire: *fire,
                    distance_km,
                })
        })
        .collect();
    pairs.sort_by(FireSitePair::canonical_cmp);

    let mut summary = summarize(&pairs);
    summary.n_duplicates_collapsed = fires.len() - unique.len();
    JoinResult { pairs, summary }
}

pub fn summarize(pairs: &[FireSitePair]) -> JoinSummary {
    let mut per_antenna: BTreeMap<AntennaId, usize> = BTreeMap::new();
    let mut fires = HashSet::new();
    for p in pairs {
        *per_antenna.entry(p.antenna_id).or_default() += 1;
        fires.insert((p.fire.position.lat().to_bits(), p.fire.position.lon().to_bits(), p.fire.date));
    }
    let mut histogram = BTreeMap::new();
    for n in per_antenna.values() {
        *histogram.entry(*n).or_default() += 1;
    }
    JoinSummary {
        n_antennas_with_fire: per_antenna.len(),
        histogram,
        n_pairs: pairs.len(),
        n_fires: fires.len(),
        n_duplicates_collapsed: 0,
    }
}
