use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::SynthMode;
use crate::ingest::AntennaId;
use crate::lightclass::SiteClass;
use crate::time::{parse_hour, HourStamp, Window};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteTruth {
    pub antenna_id: AntennaId,
    pub class: SiteClass,
    pub fire_dates: Vec<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTruth {
    pub antenna_id: AntennaId,
    pub fire_date: NaiveDate,
    pub class: SiteClass,
    pub visitors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireCounts {
    pub total: usize,
    pub planted: usize,
    pub background: usize,
    /// Fires per site to number of sites.
    pub multiplicity: BTreeMap<usize, usize>,
}

/// Every planted quantity of a generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub mode: SynthMode,
    pub rng: String,
    pub window: Window,
    pub n_antennas: usize,
    pub sites: Vec<SiteTruth>,
    pub class_sizes: BTreeMap<SiteClass, usize>,
    pub epochs: Vec<EpochTruth>,
    pub zero_visitor_epochs: usize,
    pub zero_visitor_fraction: f64,
    pub inversion_ratio: f64,
    pub big_city_factor: f64,
    pub monthly_decay: f64,
    pub spike_dates: Vec<NaiveDate>,
    pub dip_dates: Vec<NaiveDate>,
    pub missing_hours: Vec<String>,
    pub fires: FireCounts,
    /// Expected calls per hour of the window for fire-site antennas; `null`
    /// at missing hours.
    pub expected_hourly: BTreeMap<AntennaId, Vec<Option<u32>>>,
}

impl Manifest {
    pub fn missing_hour_stamps(&self) -> Vec<HourStamp> {
        self.missing_hours
            .iter()
            .map(|s| parse_hour(s).expect("manifest hours are well formed"))
            .collect()
    }

    pub fn class_of(&self, antenna: AntennaId) -> Option<SiteClass> {
        self.sites.iter().find(|s| s.antenna_id == antenna).map(|s| s.class)
    }
}
