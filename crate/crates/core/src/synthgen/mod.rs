//! Synthetic scenario generator with planted ground truth.
//!
//! All randomness comes from Xoshiro256++ generators. Each concern (site
//! placement, ordinary antennas, ids, raster, dates, fires, missing hours,
//! visitors, traffic noise, trajectories) draws from its own stream, seeded
//! through SplitMix64 with `seed + tag * 0x9E3779B97F4A7C15`. Changing one
//! part of a config therefore leaves unrelated parts of the output intact.

mod config;
mod layout;
mod manifest;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::Datelike;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

pub use config::{
    default_cities, Behavior, CitySpec, CityTier, SiteLayout, SynthConfig, SynthMode, SynthParams, TrajectorySpec,
    DEFAULT_BBOX,
};
pub use manifest::{EpochTruth, FireCounts, Manifest, SiteTruth, MANIFEST_VERSION};

use crate::epoch::PeakWindows;
use crate::geo::GeoError;
use crate::ingest::{write_antennas, write_fires, write_raster, AntennaId};
use crate::lightclass::SiteClass;
use crate::time::{HourStamp, Window};
use layout::Layout;

pub const ANTENNAS_FILE: &str = "antennas.csv";
pub const TRAFFIC_FILE: &str = "traffic.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const FIRES_FILE: &str = "fires.csv";
pub const RASTER_FILE: &str = "lights.asc";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const RNG_NAME: &str = "xoshiro256++ (splitmix64 seeding)";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn stream_for(seed: u64) -> impl Fn(u64) -> Xoshiro256PlusPlus {
    move |tag| Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Smallest-denominator fraction equal to `r` within 1e-9.
fn rational(r: f64) -> Option<(u32, u32)> {
    (1..=10_000u32).find_map(|den| {
        let num = (r * den as f64).round();
        ((num / den as f64 - r).abs() < 1e-9 && num >= 1.0).then_some((num as u32, den))
    })
}

struct CallModel {
    shape: [f64; 24],
    day_factor: Vec<f64>,
    morning: u32,
    evening: u32,
    windows: PeakWindows,
    inversion: (u32, u32),
    big_factor: f64,
}

impl CallModel {
    fn new(cfg: &SynthConfig) -> Result<Self, SynthError> {
        let b = &cfg.params.behavior;
        let windows = PeakWindows::default();
        let inside = |h: u32, (lo, hi): (u32, u32)| (lo..=hi).contains(&h);
        if !inside(b.morning_peak_hour, windows.morning) || !inside(b.evening_peak_hour, windows.evening) {
            return Err(SynthError::Infeasible("peak hours must fall inside the analysis peak windows".into()));
        }
        let inversion = rational(b.inversion_ratio)
            .ok_or_else(|| SynthError::Infeasible(format!("inversion ratio {} is not a simple fraction", b.inversion_ratio)))?;
        let two_w2 = 2.0 * b.peak_width_hours * b.peak_width_hours;
        let g = |h: u32, p: u32| (-((h as f64 - p as f64).powi(2)) / two_w2).exp();
        let mut shape = [0.0; 24];
        for (h, s) in shape.iter_mut().enumerate() {
            let h = h as u32;
            *s = b.night_floor + g(h, b.morning_peak_hour) + b.evening_morning_ratio * g(h, b.evening_peak_hour);
        }
        let day_factor = cfg
            .window
            .dates()
            .map(|d| {
                let mut f = 1.0 - b.monthly_decay * (d.day() - 1) as f64;
                if b.spike_dates.contains(&d) {
                    f *= b.spike_factor;
                }
                if b.dip_dates.contains(&d) {
                    f *= b.dip_factor;
                }
                f
            })
            .collect::<Vec<_>>();
        if day_factor.iter().any(|f| *f <= 0.0) {
            return Err(SynthError::Infeasible("monthly decay drives call volume to zero".into()));
        }
        Ok(Self {
            shape,
            day_factor,
            morning: b.morning_peak_hour,
            evening: b.evening_peak_hour,
            windows,
            inversion,
            big_factor: b.big_city_factor,
        })
    }

    fn day(&self, level: f64, day: usize, effect: Option<SiteClass>) -> Result<[u32; 24], SynthError> {
        let f = self.day_factor[day] * if effect == Some(SiteClass::BigCity) { self.big_factor } else { 1.0 };
        let mut c = [0u32; 24];
        for (h, v) in c.iter_mut().enumerate() {
            *v = (level * f * self.shape[h]).round() as u32;
        }
        if effect == Some(SiteClass::Rural) {
            // Integer peaks in the exact planted proportion; every other hour
            // of each peak window is capped at its peak.
            let (num, den) = self.inversion;
            let q = c[self.evening as usize] / den;
            if q == 0 {
                return Err(SynthError::Infeasible("rural call level too low to plant the inversion".into()));
            }
            let (m, e) = (num * q, den * q);
            for h in self.windows.evening.0..=self.windows.evening.1 {
                c[h as usize] = c[h as usize].min(e);
            }
            c[self.evening as usize] = e;
            for h in self.windows.morning.0..=self.windows.morning.1 {
                c[h as usize] = c[h as usize].min(m);
            }
            c[self.morning as usize] = m;
        }
        Ok(c)
    }
}

fn create(dir: &Path, name: &str) -> Result<(BufWriter<File>, String), SynthError> {
    let path = dir.join(name);
    let shown = path.display().to_string();
    let f = File::create(&path).map_err(|source| SynthError::Io { path: shown.clone(), source })?;
    Ok((BufWriter::with_capacity(1 << 20, f), shown))
}

fn io_at(path: &str) -> impl Fn(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_owned(), source }
}

/// Writes the five input files and `manifest.json` into `dir`, which is
/// created if needed. Output bytes depend only on the config.
pub fn generate(cfg: &SynthConfig, dir: &Path) -> Result<Manifest, SynthError> {
    cfg.validate()?;
    let stream = stream_for(cfg.seed);
    let layout = Layout::build(cfg, &stream)?;
    let model = CallModel::new(cfg)?;
    std::fs::create_dir_all(dir).map_err(io_at(&dir.display().to_string()))?;

    let mut sorted = layout.antennas.clone();
    sorted.sort_by_key(|a| a.id);
    let (mut w, p) = create(dir, ANTENNAS_FILE)?;
    write_antennas(&mut w, &sorted).and_then(|_| w.flush()).map_err(io_at(&p))?;

    let (mut w, p) = create(dir, RASTER_FILE)?;
    write_raster(&mut w, &layout.raster).and_then(|_| w.flush()).map_err(io_at(&p))?;

    let (mut w, p) = create(dir, FIRES_FILE)?;
    write_fires(&mut w, &layout.fires).and_then(|_| w.flush()).map_err(io_at(&p))?;

    let epochs = plan_epochs(cfg, &layout, &stream)?;
    let expected_hourly = write_traffic(cfg, &layout, &model, dir, &stream)?;
    write_trajectories(cfg, &layout, &epochs, dir, &stream)?;

    let n_zero = epochs.iter().filter(|e| e.visitors == 0).count();
    let mut multiplicity = BTreeMap::new();
    for s in &layout.sites {
        *multiplicity.entry(s.dates.len()).or_insert(0) += 1;
    }
    let mut class_sizes = BTreeMap::new();
    for s in &layout.sites {
        *class_sizes.entry(s.class).or_insert(0) += 1;
    }
    let b = &cfg.params.behavior;
    let in_window = |d: &chrono::NaiveDate| cfg.window.contains_date(*d);
    let mut sites: Vec<SiteTruth> = layout
        .sites
        .iter()
        .map(|s| SiteTruth {
            antenna_id: layout.antennas[s.index].id,
            class: s.class,
            fire_dates: s.dates.clone(),
        })
        .collect();
    sites.sort_by_key(|s| s.antenna_id);
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: cfg.seed,
        mode: cfg.params.mode,
        rng: RNG_NAME.to_owned(),
        window: cfg.window,
        n_antennas: cfg.params.n_antennas,
        sites,
        class_sizes,
        zero_visitor_epochs: n_zero,
        zero_visitor_fraction: if epochs.is_empty() { 0.0 } else { n_zero as f64 / epochs.len() as f64 },
        epochs,
        inversion_ratio: model.inversion.0 as f64 / model.inversion.1 as f64,
        big_city_factor: b.big_city_factor,
        monthly_decay: b.monthly_decay,
        spike_dates: b.spike_dates.iter().copied().filter(in_window).collect(),
        dip_dates: b.dip_dates.iter().copied().filter(in_window).collect(),
        missing_hours: layout.missing.iter().map(|h| h.to_string()).collect(),
        fires: FireCounts {
            total: layout.fires.len(),
            planted: layout.n_planted,
            background: layout.fires.len() - layout.n_planted,
            multiplicity,
        },
        expected_hourly,
    };
    let (mut w, p) = create(dir, MANIFEST_FILE)?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_at(&p))?;
    Ok(manifest)
}

/// Epochs in (antenna, date) order with their planted visitor counts.
fn plan_epochs(
    cfg: &SynthConfig,
    layout: &Layout,
    stream: &impl Fn(u64) -> Xoshiro256PlusPlus,
) -> Result<Vec<EpochTruth>, SynthError> {
    let t = &cfg.params.trajectories;
    let mut epochs: Vec<EpochTruth> = layout
        .sites
        .iter()
        .flat_map(|s| {
            s.dates.iter().map(|d| EpochTruth {
                antenna_id: layout.antennas[s.index].id,
                fire_date: *d,
                class: s.class,
                visitors: match s.class {
                    SiteClass::BigCity => t.visitors_big,
                    SiteClass::SmallCity => t.visitors_small,
                    SiteClass::Rural => t.visitors_rural,
                },
            })
        })
        .collect();
    epochs.sort_by_key(|e| (e.antenna_id, e.fire_date));
    let n_zero = (t.zero_visitor_fraction * epochs.len() as f64).round() as usize;
    let rural: Vec<usize> = (0..epochs.len()).filter(|&i| epochs[i].class == SiteClass::Rural).collect();
    if n_zero > rural.len() {
        return Err(SynthError::Infeasible(format!(
            "{n_zero} zero-visitor epochs requested but only {} rural epochs",
            rural.len()
        )));
    }
    for k in index::sample(&mut stream(8), rural.len(), n_zero) {
        epochs[rural[k]].visitors = 0;
    }
    Ok(epochs)
}

fn write_traffic(
    cfg: &SynthConfig,
    layout: &Layout,
    model: &CallModel,
    dir: &Path,
    stream: &impl Fn(u64) -> Xoshiro256PlusPlus,
) -> Result<BTreeMap<AntennaId, Vec<Option<u32>>>, SynthError> {
    let window = cfg.window;
    let n_hours = window.hours();
    let n_days = window.days();
    let effect_days = cfg.params.behavior.effect_days as i64;
    let mut effects: HashMap<(usize, usize), SiteClass> = HashMap::new();
    for s in &layout.sites {
        for d in &s.dates {
            for k in 1..=effect_days {
                if let Some(day) = window.day_index(*d + chrono::Duration::days(k)) {
                    effects.insert((s.index, day), s.class);
                }
            }
        }
    }
    let mut counts: Vec<Vec<u32>> = Vec::with_capacity(layout.antennas.len());
    for (i, level) in layout.levels.iter().enumerate() {
        let mut row = Vec::with_capacity(n_hours);
        for day in 0..n_days {
            row.extend(model.day(*level, day, effects.get(&(i, day)).copied())?);
        }
        counts.push(row);
    }

    let mut order: Vec<usize> = (0..layout.antennas.len()).collect();
    order.sort_by_key(|&i| layout.antennas[i].id);
    let missing: Vec<bool> = (0..n_hours).map(|j| layout.missing.contains(&window.hour_at(j))).collect();
    let secs = cfg.params.behavior.mean_call_seconds;
    let stochastic = cfg.params.mode == SynthMode::Stochastic;
    let mut rng = stream(9);
    let (mut w, p) = create(dir, TRAFFIC_FILE)?;
    let io = io_at(&p);
    for (j, gone) in missing.iter().enumerate() {
        if *gone {
            continue;
        }
        let prefix = window.hour_at(j).to_string();
        for &i in &order {
            let expected = counts[i][j];
            let n = if stochastic && expected > 0 {
                Poisson::new(expected as f64).expect("positive mean").sample(&mut rng) as u32
            } else {
                expected
            };
            if n > 0 {
                let id = layout.antennas[i].id;
                let minutes = (n as f64 * secs / 60.0 * 100.0).round() / 100.0;
                writeln!(w, "{prefix},{id},{id},{n},{minutes}").map_err(&io)?;
            }
        }
    }
    w.flush().map_err(&io)?;

    Ok(layout
        .sites
        .iter()
        .map(|s| {
            let row = counts[s.index]
                .iter()
                .zip(&missing)
                .map(|(c, gone)| (!gone).then_some(*c))
                .collect();
            (layout.antennas[s.index].id, row)
        })
        .collect())
}

fn write_trajectories(
    cfg: &SynthConfig,
    layout: &Layout,
    epochs: &[EpochTruth],
    dir: &Path,
    stream: &impl Fn(u64) -> Xoshiro256PlusPlus,
) -> Result<(), SynthError> {
    let t = &cfg.params.trajectories;
    let window: Window = cfg.window;
    let n_days = window.days();
    let pd = t.period_days as usize;
    let n_periods = n_days.div_ceil(pd);
    let (mut w, p) = create(dir, TRAJECTORIES_FILE)?;
    let io = io_at(&p);
    if t.users_per_period == 0 {
        return w.flush().map_err(&io);
    }
    if layout.ordinary.is_empty() {
        return Err(SynthError::Infeasible("trajectories need at least one ordinary antenna as home".into()));
    }
    let mut rng = stream(10);
    let users: Vec<Vec<(u64, AntennaId)>> = (0..n_periods)
        .map(|_| {
            let mut seen = BTreeSet::new();
            let mut v = Vec::with_capacity(t.users_per_period);
            while v.len() < t.users_per_period {
                let id = rng.random_range(1..10_000_000_000u64);
                if seen.insert(id) {
                    v.push((id, layout.ordinary[rng.random_range(0..layout.ordinary.len())]));
                }
            }
            v
        })
        .collect();

    let mut visits: BTreeMap<usize, Vec<(u32, u64, AntennaId)>> = BTreeMap::new();
    let mut vrng = stream(11);
    for e in epochs.iter().filter(|e| e.visitors > 0) {
        let Some(day) = window.day_index(e.fire_date) else { continue };
        let pool = &users[day / pd];
        for k in index::sample(&mut vrng, pool.len(), e.visitors) {
            let minute = vrng.random_range(0..1440u32);
            visits.entry(day).or_default().push((minute, pool[k].0, e.antenna_id));
        }
    }

    let pings = t.pings_per_user_day as usize;
    let mut day_points: Vec<(u32, u64, AntennaId)> = Vec::new();
    for day in 0..n_days {
        day_points.clear();
        for &(id, home) in &users[day / pd] {
            for _ in 0..pings {
                day_points.push((rng.random_range(0..1440u32), id, home));
            }
        }
        if let Some(v) = visits.get(&day) {
            day_points.extend_from_slice(v);
        }
        day_points.sort_unstable();
        let date = window.day_at(day).format("%Y-%m-%d").to_string();
        for (minute, id, antenna) in &day_points {
            writeln!(w, "{id},{date}T{:02}:{:02}:00,{antenna}", minute / 60, minute % 60).map_err(&io)?;
        }
    }
    w.flush().map_err(&io)
}

/// Hour stamps of a window, for callers that index manifest rows.
pub fn window_hours(window: &Window) -> impl Iterator<Item = HourStamp> + '_ {
    (0..window.hours()).map(|j| window.hour_at(j))
}
