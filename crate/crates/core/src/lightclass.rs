//! Urban/rural classification of antenna sites from night-light luminosity.
//!
//! Each site gets the light intensity integrated over a disk around it; the
//! one-dimensional values are clustered with Lloyd's algorithm from a
//! deterministic farthest-point start, and clusters are named by ascending
//! centroid: rural, small city, big city.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{integrate_disk, LightRaster};
use crate::ingest::{Antenna, AntennaId};

pub const DEFAULT_RADIUS_KM: f64 = 7.5;
pub const DEFAULT_K: usize = 3;
pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("need at least {k} distinct values to form {k} clusters, got {distinct}")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("non-finite luminosity {0}")]
    NonFinite(f64),
    #[error("degenerate fit: centroids {0:?} are not distinct")]
    CentroidTie(Vec<f64>),
    #[error("labeling needs exactly 3 clusters, model has {0}")]
    LabelCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SiteClass {
    Rural,
    SmallCity,
    BigCity,
}

impl SiteClass {
    pub const ALL: [SiteClass; 3] = [SiteClass::Rural, SiteClass::SmallCity, SiteClass::BigCity];

    pub fn as_str(self) -> &'static str {
        match self {
            SiteClass::Rural => "RURAL",
            SiteClass::SmallCity => "SMALL_CITY",
            SiteClass::BigCity => "BIG_CITY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for SiteClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteLuminosity {
    pub antenna_id: AntennaId,
    pub luminosity: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LuminosityTable {
    pub sites: Vec<SiteLuminosity>,
    /// Antennas outside the raster extent, reported with luminosity 0.
    pub outside_extent: usize,
}

/// Integrated night-light intensity around every antenna, in input order.
pub fn site_luminosities(antennas: &[Antenna], raster: &LightRaster, radius_km: f64) -> LuminosityTable {
    let sites: Vec<(SiteLuminosity, bool)> = antennas
        .par_iter()
        .map(|a| {
            if raster.contains(a.position) {
                let luminosity = integrate_disk(raster, a.position, radius_km);
                (SiteLuminosity { antenna_id: a.id, luminosity }, false)
            } else {
                (SiteLuminosity { antenna_id: a.id, luminosity: 0.0 }, true)
            }
        })
        .collect();
    let outside_extent = sites.iter().filter(|(_, out)| *out).count();
    if outside_extent > 0 {
        log::warn!("{outside_extent} antennas outside the night-light raster; luminosity set to 0");
    }
    LuminosityTable {
        sites: sites.into_iter().map(|(s, _)| s).collect(),
        outside_extent,
    }
}

/// Result of a one-dimensional k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Strictly ascending unless the data forced a duplicate.
    pub centroids: Vec<f64>,
    /// Cluster index per input value.
    pub assignment: Vec<usize>,
    pub iterations: usize,
    /// True when the assignment reached a fixed point before the cap.
    pub converged: bool,
    /// Within-cluster sum of squares: first entry for the seeding, then one
    /// entry after every centroid update.
    pub wcss_history: Vec<f64>,
}

impl KMeansFit {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Lloyd's algorithm on scalars.
///
/// Seeding starts at the minimum value and repeatedly adds the value farthest
/// from every chosen seed; `seed` only breaks ties between equally distant
/// candidates. Points equidistant from two centroids join the lower one.
/// Iterates until the assignment stops changing or [`MAX_ITERATIONS`].
pub fn kmeans_1d(values: &[f64], k: usize, seed: u64) -> Result<KMeansFit, ClassifyError> {
    if k == 0 {
        return Err(ClassifyError::ZeroK);
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(ClassifyError::NonFinite(*v));
    }
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < k {
        return Err(ClassifyError::TooFewDistinct { k, distinct: distinct.len() });
    }

    let mut centroids = farthest_point_seeds(&distinct, k, seed);
    let mut assignment = assign(values, &centroids);
    let mut wcss_history = vec![wcss(values, &assignment, &centroids)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        update_centroids(values, &assignment, &mut centroids);
        let current = wcss(values, &assignment, &centroids);
        debug_assert!(current <= wcss_history.last().unwrap() * (1.0 + 1e-12) + 1e-300);
        wcss_history.push(current);
        let next = assign(values, &centroids);
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
    }

    // 1-D Lloyd keeps centroid order, but sort defensively against empty
    // clusters that kept a stale centroid.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]));
    let mut rank = vec![0; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let centroids = order.iter().map(|&c| centroids[c]).collect();
    let assignment = assignment.into_iter().map(|c| rank[c]).collect();
    Ok(KMeansFit {
        centroids,
        assignment,
        iterations,
        converged,
        wcss_history,
    })
}

fn farthest_point_seeds(sorted_distinct: &[f64], k: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut seeds = vec![sorted_distinct[0]];
    let mut nearest: Vec<f64> = sorted_distinct.iter().map(|v| (v - sorted_distinct[0]).abs()).collect();
    while seeds.len() < k {
        let best = nearest.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..sorted_distinct.len()).filter(|&i| nearest[i] == best).collect();
        let pick = if tied.len() == 1 { tied[0] } else { tied[rng.random_range(0..tied.len())] };
        let s = sorted_distinct[pick];
        seeds.push(s);
        for (d, v) in nearest.iter_mut().zip(sorted_distinct) {
            *d = d.min((v - s).abs());
        }
    }
    seeds.sort_by(f64::total_cmp);
    seeds
}

fn assign(values: &[f64], centroids: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| {
            let mut best = 0;
            let mut best_d = (v - centroids[0]).abs();
            for (j, c) in centroids.iter().enumerate().skip(1) {
                let d = (v - c).abs();
                let lower = c < &centroids[best];
                if d < best_d || (d == best_d && lower) {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

fn update_centroids(values: &[f64], assignment: &[usize], centroids: &mut [f64]) {
    let mut sums = vec![0.0; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (v, &c) in values.iter().zip(assignment) {
        sums[c] += v;
        counts[c] += 1;
    }
    for j in 0..centroids.len() {
        if counts[j] > 0 {
            centroids[j] = sums[j] / counts[j] as f64;
        }
    }
}

fn wcss(values: &[f64], assignment: &[usize], centroids: &[f64]) -> f64 {
    values
        .iter()
        .zip(assignment)
        .map(|(v, &c)| (v - centroids[c]).powi(2))
        .sum()
}

/// Fitted clusters for a set of sites, optionally named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<f64>,
    /// Cluster index per antenna.
    pub assignment: BTreeMap<AntennaId, usize>,
    /// Class per cluster index, once labeled.
    pub labels: Option<Vec<SiteClass>>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn label_of(&self, antenna: AntennaId) -> Option<SiteClass> {
        let labels = self.labels.as_ref()?;
        self.assignment.get(&antenna).map(|&c| labels[c])
    }

    pub fn members(&self, class: SiteClass) -> Vec<AntennaId> {
        self.assignment
            .keys()
            .copied()
            .filter(|a| self.label_of(*a) == Some(class))
            .collect()
    }

    pub fn centroid_of(&self, class: SiteClass) -> Option<f64> {
        let labels = self.labels.as_ref()?;
        labels.iter().position(|l| *l == class).map(|i| self.centroids[i])
    }
}

/// Clusters site luminosities; the returned model is not yet labeled.
pub fn fit_sites(sites: &[SiteLuminosity], k: usize, seed: u64) -> Result<ClusterModel, ClassifyError> {
    let values: Vec<f64> = sites.iter().map(|s| s.luminosity).collect();
    let fit = kmeans_1d(&values, k, seed)?;
    Ok(ClusterModel {
        centroids: fit.centroids,
        assignment: sites.iter().map(|s| s.antenna_id).zip(fit.assignment).collect(),
        labels: None,
    })
}

/// Names clusters by centroid rank: lowest rural, middle small city, highest
/// big city. Independent of the order centroids are stored in.
pub fn label_clusters(mut model: ClusterModel) -> Result<ClusterModel, ClassifyError> {
    if model.k() != 3 {
        return Err(ClassifyError::LabelCount(model.k()));
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| model.centroids[a].total_cmp(&model.centroids[b]));
    let c = &model.centroids;
    if !(c[order[0]] < c[order[1]] && c[order[1]] < c[order[2]]) {
        return Err(ClassifyError::CentroidTie(model.centroids.clone()));
    }
    let mut labels = vec![SiteClass::Rural; 3];
    for (rank, &cluster) in order.iter().enumerate() {
        labels[cluster] = SiteClass::ALL[rank];
    }
    model.labels = Some(labels);
    Ok(model)
}
