use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geo::BoundingBox;
use crate::time::Window;

/// Côte d'Ivoire, roughly.
pub const DEFAULT_BBOX: BoundingBox = BoundingBox {
    lat_min: 4.3,
    lat_max: 10.8,
    lon_min: -8.7,
    lon_max: -2.4,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    /// Emit expected counts exactly.
    #[default]
    Deterministic,
    /// Poisson draws around the expected counts.
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CityTier {
    Big,
    Small,
}

/// A Gaussian light blob. `radius_km` is the standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitySpec {
    pub name: String,
    pub tier: CityTier,
    pub lat: f64,
    pub lon: f64,
    pub radius_km: f64,
    pub brightness: f64,
    /// Fraction of the ordinary (non fire site) antennas scattered around this city.
    pub antenna_share: f64,
}

fn city(name: &str, tier: CityTier, lat: f64, lon: f64, antenna_share: f64) -> CitySpec {
    let (radius_km, brightness) = match tier {
        CityTier::Big => (8.0, 80.0),
        CityTier::Small => (4.0, 30.0),
    };
    CitySpec {
        name: name.to_owned(),
        tier,
        lat,
        lon,
        radius_km,
        brightness,
        antenna_share,
    }
}

pub fn default_cities() -> Vec<CitySpec> {
    use CityTier::*;
    vec![
        city("Abidjan", Big, 5.36, -4.01, 0.25),
        city("Bouake", Big, 7.69, -5.03, 0.08),
        city("Yamoussoukro", Small, 6.82, -5.28, 0.05),
        city("Daloa", Small, 6.88, -6.45, 0.04),
        city("San-Pedro", Small, 4.75, -6.64, 0.04),
        city("Korhogo", Small, 9.46, -5.63, 0.04),
        city("Man", Small, 7.41, -7.55, 0.03),
        city("Gagnoa", Small, 6.13, -5.95, 0.03),
    ]
}

/// Antennas that receive planted fires, by tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteLayout {
    pub big: usize,
    pub small: usize,
    pub rural: usize,
    /// Sites that get a second fire on a different date.
    pub double_fire: usize,
    pub min_separation_km: f64,
    /// City sites sit within this fraction of the city radius from its center.
    pub big_spread: f64,
    pub small_spread: f64,
    pub fire_offset_min_km: f64,
    pub fire_offset_max_km: f64,
    /// Background fires keep at least this distance from every antenna.
    pub background_fire_clearance_km: f64,
    /// Rural sites stay this far inside the bounding box.
    pub edge_margin_km: f64,
    /// Radius the classifier integrates over; rural sites keep city light out of it.
    pub light_radius_km: f64,
}

impl Default for SiteLayout {
    fn default() -> Self {
        Self {
            big: 8,
            small: 15,
            rural: 72,
            double_fire: 14,
            min_separation_km: 2.0,
            big_spread: 0.5,
            small_spread: 0.75,
            fire_offset_min_km: 0.05,
            fire_offset_max_km: 0.6,
            background_fire_clearance_km: 2.5,
            edge_margin_km: 10.0,
            light_radius_km: 7.5,
        }
    }
}

impl SiteLayout {
    pub fn total(&self) -> usize {
        self.big + self.small + self.rural
    }
}

/// Hourly call model: `level * day_factor(date) * shape(hour)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Behavior {
    pub morning_peak_hour: u32,
    pub evening_peak_hour: u32,
    pub peak_width_hours: f64,
    /// Evening peak amplitude relative to the morning one.
    pub evening_morning_ratio: f64,
    pub night_floor: f64,
    /// Fractional decline per day of month.
    pub monthly_decay: f64,
    pub spike_dates: Vec<NaiveDate>,
    pub spike_factor: f64,
    pub dip_dates: Vec<NaiveDate>,
    pub dip_factor: f64,
    /// Morning/evening peak ratio at rural fire sites after the fire.
    pub inversion_ratio: f64,
    /// Call volume multiplier at big-city fire sites after the fire.
    pub big_city_factor: f64,
    /// Days after the fire day that carry the fire response.
    pub effect_days: u32,
    pub level_big: f64,
    pub level_small: f64,
    pub level_rural: f64,
    /// Ordinary antennas draw their level from `[0.5, 1.5) * level_other`.
    pub level_other: f64,
    /// Traffic duration column is `n_calls * mean_call_seconds / 60` minutes, to 0.01.
    pub mean_call_seconds: f64,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

impl Default for Behavior {
    fn default() -> Self {
        Self {
            morning_peak_hour: 9,
            evening_peak_hour: 19,
            peak_width_hours: 1.5,
            evening_morning_ratio: 1.1,
            night_floor: 0.15,
            monthly_decay: 0.02,
            spike_dates: vec![ymd(2012, 1, 1), ymd(2012, 3, 1)],
            spike_factor: 1.6,
            dip_dates: vec![ymd(2011, 12, 24), ymd(2011, 12, 25), ymd(2011, 12, 26)],
            dip_factor: 0.7,
            inversion_ratio: 1.3,
            big_city_factor: 0.8,
            effect_days: 1,
            level_big: 400.0,
            level_small: 150.0,
            level_rural: 60.0,
            level_other: 40.0,
            mean_call_seconds: 95.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    pub users_per_period: usize,
    pub period_days: u32,
    pub pings_per_user_day: u32,
    pub visitors_big: usize,
    pub visitors_small: usize,
    pub visitors_rural: usize,
    /// Share of epochs planted with no visitor; drawn from rural epochs.
    pub zero_visitor_fraction: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            users_per_period: 50_000,
            period_days: 14,
            pings_per_user_day: 1,
            visitors_big: 50,
            visitors_small: 10,
            visitors_rural: 2,
            zero_visitor_fraction: 0.18,
        }
    }
}

/// Everything except seed, window and bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub mode: SynthMode,
    pub n_antennas: usize,
    /// All fires, planted ones included.
    pub n_fires: usize,
    pub n_missing_hours: usize,
    pub raster_cellsize_deg: f64,
    /// Background pixels draw from `[1, 1.5) * background_light`.
    pub background_light: f64,
    pub cities: Vec<CitySpec>,
    pub sites: SiteLayout,
    pub behavior: Behavior,
    pub trajectories: TrajectorySpec,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            mode: SynthMode::Deterministic,
            n_antennas: 1231,
            n_fires: 59_469,
            n_missing_hours: 100,
            raster_cellsize_deg: 0.01,
            background_light: 0.05,
            cities: default_cities(),
            sites: SiteLayout::default(),
            behavior: Behavior::default(),
            trajectories: TrajectorySpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub window: Window,
    pub bbox: BoundingBox,
    pub params: SynthParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            window: Window::default(),
            bbox: DEFAULT_BBOX,
            params: SynthParams::default(),
        }
    }
}

fn infeasible<T>(msg: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::Infeasible(msg.into()))
}

impl SynthConfig {
    /// Checks everything that can be checked before drawing random numbers.
    pub fn validate(&self) -> Result<(), SynthError> {
        let p = &self.params;
        let s = &p.sites;
        let b = &p.behavior;
        let t = &p.trajectories;
        if p.n_antennas == 0 {
            return infeasible("n_antennas must be positive");
        }
        if s.total() > p.n_antennas {
            return infeasible(format!("{} fire sites exceed {} antennas", s.total(), p.n_antennas));
        }
        if s.double_fire > s.total() {
            return infeasible(format!("{} double-fire sites exceed {} sites", s.double_fire, s.total()));
        }
        let epochs = s.total() + s.double_fire;
        if p.n_fires < epochs {
            return infeasible(format!("n_fires {} is below the {} planted fires", p.n_fires, epochs));
        }
        if self.window.last_day < self.window.first_day {
            return infeasible("window ends before it starts");
        }
        let bb = &self.bbox;
        if !(bb.lat_min < bb.lat_max && bb.lon_min < bb.lon_max && bb.lat_min >= -80.0 && bb.lat_max <= 80.0) {
            return infeasible("bounding box must be non-empty and within 80 degrees of the equator");
        }
        if !(p.raster_cellsize_deg > 0.0 && p.background_light >= 0.0) {
            return infeasible("raster cellsize must be positive and background light non-negative");
        }
        for c in &p.cities {
            if !(c.radius_km > 0.0 && c.brightness >= 0.0 && c.antenna_share >= 0.0) {
                return infeasible(format!("city {} has invalid radius, brightness or share", c.name));
            }
        }
        if p.cities.iter().map(|c| c.antenna_share).sum::<f64>() > 1.0 + 1e-12 {
            return infeasible("city antenna shares sum above 1");
        }
        if !(s.fire_offset_min_km >= 0.0 && s.fire_offset_min_km <= s.fire_offset_max_km) {
            return infeasible("fire offset range is empty");
        }
        if b.morning_peak_hour > 23 || b.evening_peak_hour > 23 || b.morning_peak_hour == b.evening_peak_hour {
            return infeasible("peak hours must be distinct hours of day");
        }
        if !(b.inversion_ratio > 0.0 && b.peak_width_hours > 0.0 && b.evening_morning_ratio > 0.0) {
            return infeasible("ratios and peak width must be positive");
        }
        if !(1..=2).contains(&b.effect_days) {
            return infeasible("effect_days must be 1 or 2");
        }
        if !(0.0..=1.0).contains(&t.zero_visitor_fraction) {
            return infeasible("zero_visitor_fraction must lie in [0, 1]");
        }
        if t.period_days == 0 {
            return infeasible("period_days must be positive");
        }
        let most = t.visitors_big.max(t.visitors_small).max(t.visitors_rural);
        if epochs > 0 && most > t.users_per_period {
            return infeasible(format!("{most} planted visitors exceed {} users per period", t.users_per_period));
        }
        Ok(())
    }
}
