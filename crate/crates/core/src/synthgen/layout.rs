//! Spatial and calendar placement: antennas, light raster, fires, missing hours.

use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::config::{CitySpec, CityTier, SynthConfig};
use super::SynthError;
use crate::geo::{haversine_km, GeoPoint, GridIndex, LightRaster, KM_PER_DEGREE};
use crate::ingest::{Antenna, AntennaId, FireEvent};
use crate::lightclass::SiteClass;
use crate::time::HourStamp;

const MAX_ATTEMPTS: usize = 200_000;
/// Missing hours are kept to the night so they never touch a peak window.
const NIGHT_HOURS: u32 = 6;

#[derive(Debug, Clone)]
pub(crate) struct Site {
    pub index: usize,
    pub class: SiteClass,
    pub dates: Vec<NaiveDate>,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    /// In generation order; sites occupy the first indices.
    pub antennas: Vec<Antenna>,
    pub levels: Vec<f64>,
    pub sites: Vec<Site>,
    pub ordinary: Vec<AntennaId>,
    pub raster: LightRaster,
    pub fires: Vec<FireEvent>,
    pub n_planted: usize,
    pub missing: BTreeSet<HourStamp>,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn rounded(p: GeoPoint) -> GeoPoint {
    GeoPoint::new(round6(p.lat()), round6(p.lon())).expect("rounding keeps coordinates valid")
}

fn infeasible<T>(msg: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::Infeasible(msg.into()))
}

fn uniform_in(rng: &mut Xoshiro256PlusPlus, cfg: &SynthConfig, margin_km: f64) -> Result<GeoPoint, SynthError> {
    let b = &cfg.bbox;
    let dlat = margin_km / KM_PER_DEGREE;
    let mid = ((b.lat_min + b.lat_max) / 2.0).to_radians().cos();
    let dlon = margin_km / (KM_PER_DEGREE * mid);
    let (lat0, lat1, lon0, lon1) = (b.lat_min + dlat, b.lat_max - dlat, b.lon_min + dlon, b.lon_max - dlon);
    if lat0 >= lat1 || lon0 >= lon1 {
        return infeasible("bounding box too small for the edge margin");
    }
    let lat = lat0 + (lat1 - lat0) * rng.random::<f64>();
    let lon = lon0 + (lon1 - lon0) * rng.random::<f64>();
    Ok(rounded(GeoPoint::new(lat, lon)?))
}

fn check_city_edges(cfg: &SynthConfig) -> Result<(), SynthError> {
    let b = &cfg.bbox;
    for c in &cfg.params.cities {
        let coslat = c.lat.to_radians().cos();
        let edges = [
            (c.lat - b.lat_min) * KM_PER_DEGREE,
            (b.lat_max - c.lat) * KM_PER_DEGREE,
            (c.lon - b.lon_min) * KM_PER_DEGREE * coslat,
            (b.lon_max - c.lon) * KM_PER_DEGREE * coslat,
        ];
        let nearest = edges.iter().copied().fold(f64::INFINITY, f64::min);
        if nearest < 3.0 * c.radius_km {
            return infeasible(format!(
                "city {} lies {nearest:.1} km from the raster edge, under 3 radii",
                c.name
            ));
        }
    }
    Ok(())
}

fn city_center(c: &CitySpec) -> Result<GeoPoint, SynthError> {
    Ok(GeoPoint::new(c.lat, c.lon)?)
}

fn far_from(p: GeoPoint, placed: &[GeoPoint], km: f64) -> bool {
    placed.iter().all(|q| haversine_km(p, *q) >= km)
}

fn place_city_sites(
    rng: &mut Xoshiro256PlusPlus,
    cfg: &SynthConfig,
    tier: CityTier,
    n: usize,
    placed: &mut Vec<GeoPoint>,
) -> Result<(), SynthError> {
    if n == 0 {
        return Ok(());
    }
    let cities: Vec<&CitySpec> = cfg.params.cities.iter().filter(|c| c.tier == tier).collect();
    if cities.is_empty() {
        return infeasible(format!("{n} {tier:?} sites requested but no such city"));
    }
    let s = &cfg.params.sites;
    let spread = match tier {
        CityTier::Big => s.big_spread,
        CityTier::Small => s.small_spread,
    };
    for i in 0..n {
        let c = cities[i % cities.len()];
        let center = city_center(c)?;
        let p = (0..MAX_ATTEMPTS)
            .map(|_| {
                let r = spread * c.radius_km * rng.random::<f64>().sqrt();
                rounded(center.destination(360.0 * rng.random::<f64>(), r))
            })
            .find(|p| cfg.bbox.contains(*p) && far_from(*p, placed, s.min_separation_km));
        match p {
            Some(p) => placed.push(p),
            None => return infeasible(format!("cannot fit {n} {tier:?} sites around {}", c.name)),
        }
    }
    Ok(())
}

fn place_rural_sites(rng: &mut Xoshiro256PlusPlus, cfg: &SynthConfig, placed: &mut Vec<GeoPoint>) -> Result<(), SynthError> {
    let s = &cfg.params.sites;
    let centers: Vec<(GeoPoint, f64)> = cfg
        .params
        .cities
        .iter()
        .map(|c| Ok((city_center(c)?, 6.0 * c.radius_km + s.light_radius_km)))
        .collect::<Result<_, SynthError>>()?;
    for _ in 0..s.rural {
        let mut found = None;
        for _ in 0..MAX_ATTEMPTS {
            let p = uniform_in(rng, cfg, s.edge_margin_km)?;
            if centers.iter().all(|(c, d)| haversine_km(p, *c) >= *d) && far_from(p, placed, s.min_separation_km) {
                found = Some(p);
                break;
            }
        }
        match found {
            Some(p) => placed.push(p),
            None => return infeasible("cannot fit the rural sites away from cities"),
        }
    }
    Ok(())
}

fn place_ordinary(
    rng: &mut Xoshiro256PlusPlus,
    cfg: &SynthConfig,
    sites: &[GeoPoint],
) -> Result<Vec<GeoPoint>, SynthError> {
    let n = cfg.params.n_antennas - sites.len();
    let sep = cfg.params.sites.min_separation_km;
    let mut out = Vec::with_capacity(n);
    let accept = |p: GeoPoint| cfg.bbox.contains(p) && far_from(p, sites, sep);
    for c in &cfg.params.cities {
        let k = (c.antenna_share * n as f64).floor() as usize;
        let center = city_center(c)?;
        for _ in 0..k {
            let p = (0..MAX_ATTEMPTS)
                .map(|_| {
                    let (dx, dy): (f64, f64) = (gauss(rng) * c.radius_km, gauss(rng) * c.radius_km);
                    rounded(center.destination(dx.atan2(dy).to_degrees(), dx.hypot(dy)))
                })
                .find(|p| accept(*p))
                .ok_or_else(|| SynthError::Infeasible(format!("cannot place antennas around {}", c.name)))?;
            out.push(p);
        }
    }
    while out.len() < n {
        let p = (0..MAX_ATTEMPTS)
            .map(|_| uniform_in(rng, cfg, 0.0))
            .find(|p| p.as_ref().map_or(true, |p| accept(*p)))
            .ok_or_else(|| SynthError::Infeasible("cannot place ordinary antennas".into()))??;
        out.push(p);
    }
    Ok(out)
}

fn gauss(rng: &mut Xoshiro256PlusPlus) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

fn build_raster(rng: &mut Xoshiro256PlusPlus, cfg: &SynthConfig) -> Result<LightRaster, SynthError> {
    let b = &cfg.bbox;
    let cs = cfg.params.raster_cellsize_deg;
    let ncols = ((b.lon_max - b.lon_min) / cs - 1e-9).ceil() as usize;
    let nrows = ((b.lat_max - b.lat_min) / cs - 1e-9).ceil() as usize;
    let cities: Vec<(GeoPoint, f64, f64)> = cfg
        .params
        .cities
        .iter()
        .map(|c| Ok((city_center(c)?, 2.0 * c.radius_km * c.radius_km, c.brightness)))
        .collect::<Result<_, SynthError>>()?;
    let mut values = Vec::with_capacity(ncols * nrows);
    for row in 0..nrows {
        let lat = b.lat_min + (nrows - row) as f64 * cs - cs / 2.0;
        for col in 0..ncols {
            let lon = b.lon_min + col as f64 * cs + cs / 2.0;
            let p = GeoPoint::new(lat, lon)?;
            let mut v = cfg.params.background_light * (1.0 + 0.5 * rng.random::<f64>());
            for (c, two_s2, peak) in &cities {
                let d = haversine_km(p, *c);
                v += peak * (-d * d / two_s2).exp();
            }
            values.push((v * 1e4).round() / 1e4);
        }
    }
    Ok(LightRaster::from_corner(ncols, nrows, b.lon_min, b.lat_min, cs, -9999.0, values)?)
}

fn event_days(cfg: &SynthConfig) -> BTreeSet<NaiveDate> {
    let b = &cfg.params.behavior;
    b.spike_dates.iter().chain(&b.dip_dates).copied().collect()
}

/// Fire days whose five-day window lies in one month, inside the observation
/// window, and clear of holiday spikes and dips.
fn valid_fire_days(cfg: &SynthConfig) -> Vec<NaiveDate> {
    let events = event_days(cfg);
    cfg.window
        .dates()
        .filter(|d| {
            let (a, z) = (*d - Duration::days(2), *d + Duration::days(2));
            cfg.window.contains_date(a)
                && cfg.window.contains_date(z)
                && a.month() == z.month()
                && !events.range(a..=z).any(|_| true)
        })
        .collect()
}

fn assign_dates(rng: &mut Xoshiro256PlusPlus, cfg: &SynthConfig, n_sites: usize) -> Result<Vec<Vec<NaiveDate>>, SynthError> {
    if n_sites == 0 {
        return Ok(Vec::new());
    }
    let valid = valid_fire_days(cfg);
    if valid.is_empty() {
        return infeasible("no date admits a clean five-day epoch window");
    }
    let doubles: BTreeSet<usize> = index::sample(rng, n_sites, cfg.params.sites.double_fire).into_iter().collect();
    let mut out = Vec::with_capacity(n_sites);
    for i in 0..n_sites {
        let first = valid[rng.random_range(0..valid.len())];
        let mut dates = vec![first];
        if doubles.contains(&i) {
            let apart: Vec<NaiveDate> = valid.iter().copied().filter(|d| (*d - first).num_days().abs() >= 6).collect();
            if apart.is_empty() {
                return infeasible("window too short for two separated fires at one site");
            }
            dates.push(apart[rng.random_range(0..apart.len())]);
            dates.sort();
        }
        out.push(dates);
    }
    Ok(out)
}

fn random_fire(rng: &mut Xoshiro256PlusPlus, position: GeoPoint, date: NaiveDate) -> FireEvent {
    FireEvent {
        position,
        date,
        acq_time: Some(rng.random_range(0..1440u16)),
        confidence: Some(rng.random_range(0..=100u8)),
    }
}

fn place_missing(rng: &mut Xoshiro256PlusPlus, cfg: &SynthConfig) -> Result<BTreeSet<HourStamp>, SynthError> {
    let n = cfg.params.n_missing_hours;
    let events = event_days(cfg);
    let days: Vec<NaiveDate> = cfg
        .window
        .dates()
        .filter(|d| !events.iter().any(|e| (*e - *d).num_days().abs() <= 3))
        .collect();
    if days.len() * (NIGHT_HOURS as usize) < n {
        return infeasible(format!("{n} missing hours do not fit in the night hours of clean days"));
    }
    let mut missing = BTreeSet::new();
    while missing.len() < n {
        let day = days[rng.random_range(0..days.len())];
        let start = rng.random_range(0..NIGHT_HOURS);
        let len = rng.random_range(1..=NIGHT_HOURS - start);
        for h in start..start + len {
            if missing.len() < n {
                missing.insert(HourStamp::from_date_hour(day, h));
            }
        }
    }
    Ok(missing)
}

impl Layout {
    pub fn build(cfg: &SynthConfig, stream: impl Fn(u64) -> Xoshiro256PlusPlus) -> Result<Self, SynthError> {
        check_city_edges(cfg)?;
        let s = &cfg.params.sites;
        let b = &cfg.params.behavior;

        let mut rng = stream(1);
        let mut site_points = Vec::with_capacity(s.total());
        place_city_sites(&mut rng, cfg, CityTier::Big, s.big, &mut site_points)?;
        place_city_sites(&mut rng, cfg, CityTier::Small, s.small, &mut site_points)?;
        place_rural_sites(&mut rng, cfg, &mut site_points)?;
        let classes: Vec<SiteClass> = std::iter::repeat_n(SiteClass::BigCity, s.big)
            .chain(std::iter::repeat_n(SiteClass::SmallCity, s.small))
            .chain(std::iter::repeat_n(SiteClass::Rural, s.rural))
            .collect();

        let mut rng = stream(2);
        let ordinary = place_ordinary(&mut rng, cfg, &site_points)?;
        let levels: Vec<f64> = classes
            .iter()
            .map(|c| match c {
                SiteClass::BigCity => b.level_big,
                SiteClass::SmallCity => b.level_small,
                SiteClass::Rural => b.level_rural,
            })
            .chain(ordinary.iter().map(|_| b.level_other * (0.5 + rng.random::<f64>())))
            .collect();

        let mut rng = stream(3);
        let mut ids: Vec<AntennaId> = (1..=cfg.params.n_antennas as AntennaId).collect();
        ids.shuffle(&mut rng);
        let antennas: Vec<Antenna> = site_points
            .iter()
            .chain(&ordinary)
            .zip(&ids)
            .map(|(p, id)| Antenna { id: *id, position: *p })
            .collect();

        let raster = build_raster(&mut stream(4), cfg)?;

        let dates = assign_dates(&mut stream(5), cfg, s.total())?;
        let sites: Vec<Site> = classes
            .into_iter()
            .zip(dates)
            .enumerate()
            .map(|(index, (class, dates))| Site { index, class, dates })
            .collect();

        let mut rng = stream(6);
        let mut fires = Vec::with_capacity(cfg.params.n_fires);
        for site in &sites {
            let at = antennas[site.index].position;
            for d in &site.dates {
                let r = s.fire_offset_min_km + (s.fire_offset_max_km - s.fire_offset_min_km) * rng.random::<f64>();
                let p = rounded(at.destination(360.0 * rng.random::<f64>(), r));
                fires.push(random_fire(&mut rng, p, *d));
            }
        }
        let n_planted = fires.len();
        let clearance = s.background_fire_clearance_km;
        let grid = GridIndex::build(antennas.iter().map(|a| (a.id, a.position)), clearance.max(0.5));
        let n_days = cfg.window.days();
        for _ in n_planted..(cfg.params.n_fires) {
            let mut found = None;
            for _ in 0..MAX_ATTEMPTS {
                let p = uniform_in(&mut rng, cfg, 0.0)?;
                if grid.within(p, clearance).is_empty() {
                    found = Some(p);
                    break;
                }
            }
            let Some(p) = found else {
                return infeasible("no room for background fires away from antennas");
            };
            let d = cfg.window.day_at(rng.random_range(0..n_days));
            fires.push(random_fire(&mut rng, p, d));
        }
        fires.sort_by(|a, b| {
            (a.date, a.acq_time)
                .cmp(&(b.date, b.acq_time))
                .then(a.position.lat().total_cmp(&b.position.lat()))
                .then(a.position.lon().total_cmp(&b.position.lon()))
        });

        let missing = place_missing(&mut stream(7), cfg)?;

        Ok(Layout {
            ordinary: antennas[s.total()..].iter().map(|a| a.id).collect(),
            antennas,
            levels,
            sites,
            raster,
            fires,
            n_planted,
            missing,
        })
    }
}
