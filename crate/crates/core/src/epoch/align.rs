use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::series::{CallTable, Direction, HourlySeries};
use super::EpochError;
use crate::fusion::FireSitePair;
use crate::ingest::{AntennaId, Timeline};
use crate::lightclass::{ClusterModel, SiteClass};
use crate::time::HourStamp;

/// Days in an epoch window: two before the fire day, the day, two after.
pub const EPOCH_DAYS: usize = 5;
pub const EPOCH_HOURS: usize = EPOCH_DAYS * 24;
/// Offset of the first window hour relative to noon of the fire day.
pub const FIRST_OFFSET: i64 = -60;

/// One (antenna, fire) window scaled by its own maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedEpoch {
    pub antenna_id: AntennaId,
    pub fire_date: NaiveDate,
    pub max_calls: u64,
    /// Index `i` is offset `i - 60` hours from noon of the fire day.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochExclusion {
    /// The five-day window does not overlap the observation window.
    OutsideWindow,
    AllMissing,
    ZeroMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedEpoch {
    pub antenna_id: AntennaId,
    pub fire_date: NaiveDate,
    pub reason: EpochExclusion,
}

fn window_start(fire_day: NaiveDate) -> HourStamp {
    HourStamp(HourStamp::from_date_hour(fire_day, 0).0 - 48)
}

/// Cuts `[fire_day - 2, fire_day + 2]` out of `series` and divides every
/// present hour by the maximum over present hours of that window. Hours
/// outside the observation window or missing stay `None`.
pub fn normalize_window(series: &HourlySeries, fire_day: NaiveDate) -> Result<NormalizedEpoch, EpochExclusion> {
    let start = window_start(fire_day);
    let raw: Vec<Option<u64>> = (0..EPOCH_HOURS).map(|i| series.at(HourStamp(start.0 + i as i64))).collect();
    let overlaps = (0..EPOCH_HOURS).any(|i| series.window.contains_hour(HourStamp(start.0 + i as i64)));
    if !overlaps {
        return Err(EpochExclusion::OutsideWindow);
    }
    let max = raw.iter().flatten().copied().max().ok_or(EpochExclusion::AllMissing)?;
    if max == 0 {
        return Err(EpochExclusion::ZeroMax);
    }
    let scale = max as f64;
    Ok(NormalizedEpoch {
        antenna_id: series.antenna_id,
        fire_date: fire_day,
        max_calls: max,
        values: raw.into_iter().map(|v| v.map(|c| c as f64 / scale)).collect(),
    })
}

/// Mean normalized activity of one site class on the fire-relative axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedProfile {
    pub class: SiteClass,
    pub direction: Direction,
    /// `None` where no epoch contributed (`n == 0`).
    pub mean: Vec<Option<f64>>,
    pub n: Vec<usize>,
    /// Epochs that passed normalization.
    pub epochs: usize,
    pub excluded: usize,
}

impl AlignedProfile {
    pub fn offsets() -> impl Iterator<Item = i64> {
        (0..EPOCH_HOURS as i64).map(|i| i + FIRST_OFFSET)
    }

    /// True when every epoch of the class was excluded (or there were none).
    pub fn is_empty(&self) -> bool {
        self.epochs == 0
    }

    pub fn at(&self, day: i64, hour: u32) -> Option<f64> {
        self.mean[index_of(day, hour)]
    }

    pub fn n_at(&self, day: i64, hour: u32) -> usize {
        self.n[index_of(day, hour)]
    }

    /// Mean of the defined hourly means of a day.
    pub fn day_mean(&self, day: i64) -> Option<f64> {
        let vals: Vec<f64> = (0..24).filter_map(|h| self.at(day, h)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn index_of(day: i64, hour: u32) -> usize {
    assert!((-2..=2).contains(&day) && hour < 24, "day {day} hour {hour} outside epoch");
    ((day + 2) * 24 + hour as i64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    /// One profile per class, rural first.
    pub profiles: Vec<AlignedProfile>,
    pub excluded: Vec<ExcludedEpoch>,
    pub epochs: Vec<(SiteClass, NormalizedEpoch)>,
}

impl AlignmentReport {
    pub fn profile(&self, class: SiteClass) -> &AlignedProfile {
        self.profiles.iter().find(|p| p.class == class).expect("one profile per class")
    }

    /// Classes whose profile is empty because every epoch was excluded.
    pub fn flagged(&self) -> Vec<SiteClass> {
        self.profiles.iter().filter(|p| p.is_empty()).map(|p| p.class).collect()
    }
}

/// Normalizes every pair's window and averages per class, offset by offset.
///
/// Pairs are processed in canonical order so the floating-point sums, and
/// therefore the result, do not depend on input order.
pub fn align_and_average(
    pairs: &[FireSitePair],
    model: &ClusterModel,
    table: &CallTable,
    timeline: &Timeline,
    direction: Direction,
) -> Result<AlignmentReport, EpochError> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(FireSitePair::canonical_cmp);

    let mut sums: HashMap<SiteClass, (Vec<f64>, Vec<usize>, usize, usize)> = SiteClass::ALL
        .iter()
        .map(|c| (*c, (vec![0.0; EPOCH_HOURS], vec![0; EPOCH_HOURS], 0, 0)))
        .collect();
    let mut series_cache: HashMap<AntennaId, HourlySeries> = HashMap::new();
    let mut excluded = Vec::new();
    let mut epochs = Vec::new();

    for pair in &sorted {
        let class = model.label_of(pair.antenna_id).ok_or(EpochError::Unlabeled(pair.antenna_id))?;
        let series = series_cache
            .entry(pair.antenna_id)
            .or_insert_with(|| table.series(pair.antenna_id, direction, timeline));
        let acc = sums.get_mut(&class).unwrap();
        match normalize_window(series, pair.fire.date) {
            Ok(epoch) => {
                for (i, v) in epoch.values.iter().enumerate() {
                    if let Some(v) = v {
                        acc.0[i] += v;
                        acc.1[i] += 1;
                    }
                }
                acc.2 += 1;
                epochs.push((class, epoch));
            }
            Err(reason) => {
                acc.3 += 1;
                excluded.push(ExcludedEpoch {
                    antenna_id: pair.antenna_id,
                    fire_date: pair.fire.date,
                    reason,
                });
            }
        }
    }

    let profiles = SiteClass::ALL
        .iter()
        .map(|class| {
            let (s, n, ok, bad) = &sums[class];
            AlignedProfile {
                class: *class,
                direction,
                mean: s.iter().zip(n).map(|(s, n)| (*n > 0).then(|| s / *n as f64)).collect(),
                n: n.clone(),
                epochs: *ok,
                excluded: *bad,
            }
        })
        .collect();
    Ok(AlignmentReport {
        profiles,
        excluded,
        epochs,
    })
}

/// Inclusive local-hour ranges where the morning and evening peaks are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakWindows {
    pub morning: (u32, u32),
    pub evening: (u32, u32),
}

impl Default for PeakWindows {
    fn default() -> Self {
        Self {
            morning: (6, 12),
            evening: (16, 22),
        }
    }
}

impl PeakWindows {
    pub fn validate(&self) -> Result<(), EpochError> {
        for w in [self.morning, self.evening] {
            if w.0 > w.1 || w.1 > 23 {
                return Err(EpochError::PeakWindow(w));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRatio {
    pub day: i64,
    pub morning: Option<f64>,
    pub evening: Option<f64>,
    /// morning / evening; absent when either peak is undefined.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub class: SiteClass,
    pub days: Vec<PeakRatio>,
    /// Evening-dominant the day before the fire and morning-dominant the day after.
    pub inversion: bool,
}

impl PeakReport {
    pub fn ratio(&self, day: i64) -> Option<f64> {
        self.days.iter().find(|d| d.day == day).and_then(|d| d.ratio)
    }
}

pub fn peak_ratios(profile: &AlignedProfile, windows: &PeakWindows) -> PeakReport {
    let peak = |day: i64, (lo, hi): (u32, u32)| {
        (lo..=hi)
            .filter_map(|h| profile.at(day, h))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    };
    let days: Vec<PeakRatio> = (-2..=2)
        .map(|day| {
            let morning = peak(day, windows.morning);
            let evening = peak(day, windows.evening);
            let ratio = match (morning, evening) {
                (Some(m), Some(e)) if e > 0.0 => Some(m / e),
                _ => None,
            };
            PeakRatio {
                day,
                morning,
                evening,
                ratio,
            }
        })
        .collect();
    let r = |d: i64| days.iter().find(|x| x.day == d).and_then(|x| x.ratio);
    let inversion = matches!((r(-1), r(1)), (Some(before), Some(after)) if before < 1.0 && after > 1.0);
    PeakReport {
        class: profile.class,
        days,
        inversion,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::ingest::{FireEvent, TrafficRecord};
    use crate::time::Window;
    use std::collections::BTreeMap;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 1, d).unwrap()
    }

    fn series_from(f: impl Fn(HourStamp) -> Option<u64>) -> HourlySeries {
        let w = Window::default();
        HourlySeries {
            antenna_id: 1,
            direction: Direction::Both,
            window: w,
            values: (0..w.hours()).map(|i| f(w.hour_at(i))).collect(),
        }
    }

    fn pair(antenna: AntennaId, date: NaiveDate) -> FireSitePair {
        FireSitePair {
            antenna_id: antenna,
            fire: FireEvent { position: GeoPoint::new(5.0, -4.0).unwrap(), date, acq_time: None, confidence: None },
            distance_km: 0.1,
        }
    }

    fn model(labels: &[(AntennaId, SiteClass)]) -> ClusterModel {
        ClusterModel {
            centroids: vec![1.0, 2.0, 3.0],
            assignment: labels.iter().map(|(a, c)| (*a, SiteClass::ALL.iter().position(|x| x == c).unwrap())).collect(),
            labels: Some(SiteClass::ALL.to_vec()),
        }
    }

    fn table_from(recs: &[TrafficRecord]) -> (CallTable, Timeline) {
        let w = Window::default();
        let mut t = CallTable::new(w, None);
        let mut tl = Timeline::empty(w);
        for r in recs {
            t.push(r);
            tl.mark(r.hour);
        }
        (t, tl)
    }

    fn constant_traffic(antenna: AntennaId, n: u32) -> Vec<TrafficRecord> {
        let w = Window::default();
        (0..w.hours())
            .map(|i| TrafficRecord { hour: w.hour_at(i), origin: antenna, dest: antenna, n_calls: n, duration: 0.0 })
            .collect()
    }

    #[test]
    fn constant_series_normalizes_to_ones() {
        let e = normalize_window(&series_from(|_| Some(5)), day(10)).unwrap();
        assert_eq!(e.values.len(), 120);
        assert!(e.values.iter().all(|v| *v == Some(1.0)));
    }

    #[test]
    fn zero_max_and_all_missing_excluded() {
        assert_eq!(normalize_window(&series_from(|_| Some(0)), day(10)), Err(EpochExclusion::ZeroMax));
        assert_eq!(normalize_window(&series_from(|_| None), day(10)), Err(EpochExclusion::AllMissing));
        let far = NaiveDate::from_ymd_opt(2013, 6, 1).unwrap();
        assert_eq!(normalize_window(&series_from(|_| Some(3)), far), Err(EpochExclusion::OutsideWindow));
    }

    #[test]
    fn known_max_of_forty() {
        let peak = HourStamp::from_date_hour(day(11), 9);
        let s = series_from(|h| Some(if h == peak { 40 } else { (h.0 % 30) as u64 }));
        let e = normalize_window(&s, day(10)).unwrap();
        let at_peak = (peak.0 - window_start(day(10)).0) as usize;
        assert_eq!(e.values[at_peak], Some(1.0));
        for (i, v) in e.values.iter().enumerate() {
            if i != at_peak {
                let h = window_start(day(10)).0 + i as i64;
                assert_eq!(*v, Some((h % 30) as f64 / 40.0));
            }
        }
    }

    #[test]
    fn offset_zero_is_noon_of_fire_day() {
        let noon = HourStamp::from_date_hour(day(10), 12);
        let s = series_from(|h| Some(if h == noon { 9 } else { 1 }));
        let e = normalize_window(&s, day(10)).unwrap();
        assert_eq!(e.values[(0 - FIRST_OFFSET) as usize], Some(1.0));
    }

    #[test]
    fn window_truncated_at_observation_start() {
        let first = Window::default().first_day;
        let e = normalize_window(&series_from(|_| Some(2)), first).unwrap();
        assert!(e.values[..48].iter().all(Option::is_none));
        assert!(e.values[48..].iter().all(|v| *v == Some(1.0)));
    }

    #[test]
    fn single_constant_pair_profile() {
        let (t, tl) = table_from(&constant_traffic(1, 4));
        let m = model(&[(1, SiteClass::Rural)]);
        let r = align_and_average(&[pair(1, day(10))], &m, &t, &tl, Direction::Both).unwrap();
        let p = r.profile(SiteClass::Rural);
        assert!(p.mean.iter().all(|v| *v == Some(1.0)));
        assert!(p.n.iter().all(|n| *n == 1));
        assert_eq!(r.flagged(), vec![SiteClass::SmallCity, SiteClass::BigCity]);
    }

    #[test]
    fn duplicate_pair_is_idempotent_for_the_mean() {
        let mut recs = constant_traffic(1, 4);
        for r in recs.iter_mut() {
            r.n_calls = (r.hour.0 % 17) as u32 + 1;
        }
        let (t, tl) = table_from(&recs);
        let m = model(&[(1, SiteClass::Rural)]);
        let one = align_and_average(&[pair(1, day(10))], &m, &t, &tl, Direction::Both).unwrap();
        let two = align_and_average(&[pair(1, day(10)), pair(1, day(10))], &m, &t, &tl, Direction::Both).unwrap();
        assert_eq!(one.profile(SiteClass::Rural).mean, two.profile(SiteClass::Rural).mean);
    }

    #[test]
    fn unlabeled_antenna_is_an_error() {
        let (t, tl) = table_from(&constant_traffic(1, 4));
        let m = model(&[]);
        assert_eq!(
            align_and_average(&[pair(1, day(10))], &m, &t, &tl, Direction::Both),
            Err(EpochError::Unlabeled(1))
        );
    }

    #[test]
    fn permutation_invariant() {
        let w = Window::default();
        let mut recs = Vec::new();
        for a in 1..=6u32 {
            for i in 0..w.hours() {
                recs.push(TrafficRecord {
                    hour: w.hour_at(i),
                    origin: a,
                    dest: a,
                    n_calls: ((i as u32 * 7 + a * 13) % 23) + a,
                    duration: 0.0,
                });
            }
        }
        let (t, tl) = table_from(&recs);
        let m = model(&[(1, SiteClass::Rural), (2, SiteClass::Rural), (3, SiteClass::SmallCity), (4, SiteClass::Rural), (5, SiteClass::BigCity), (6, SiteClass::Rural)]);
        let pairs: Vec<_> = (1..=6).map(|a| pair(a, day(3 + a * 3))).collect();
        let forward = align_and_average(&pairs, &m, &t, &tl, Direction::Both).unwrap();
        let mut rev = pairs.clone();
        rev.reverse();
        rev.swap(0, 3);
        let backward = align_and_average(&rev, &m, &t, &tl, Direction::Both).unwrap();
        assert_eq!(forward.profiles, backward.profiles);
    }

    fn profile_from(f: impl Fn(i64, u32) -> Option<f64>) -> AlignedProfile {
        let mut mean = vec![None; EPOCH_HOURS];
        for d in -2..=2 {
            for h in 0..24 {
                mean[index_of(d, h)] = f(d, h);
            }
        }
        AlignedProfile {
            class: SiteClass::Rural,
            direction: Direction::Both,
            n: mean.iter().map(|m| m.is_some() as usize).collect(),
            mean,
            epochs: 1,
            excluded: 0,
        }
    }

    #[test]
    fn flat_profile_has_unit_ratios() {
        let r = peak_ratios(&profile_from(|_, _| Some(0.5)), &PeakWindows::default());
        assert!(r.days.iter().all(|d| d.ratio == Some(1.0)));
        assert!(!r.inversion);
    }

    #[test]
    fn inversion_detected() {
        let p = profile_from(|d, h| {
            let (m, e) = if d == 1 { (0.9, 0.6) } else { (0.6, 0.8) };
            Some(match h {
                9 => m,
                19 => e,
                _ => 0.1,
            })
        });
        let r = peak_ratios(&p, &PeakWindows::default());
        assert!(r.inversion);
        assert_eq!(r.ratio(1), Some(0.9 / 0.6));
        assert_eq!(r.ratio(-1), Some(0.6 / 0.8));
    }

    #[test]
    fn undefined_peak_gives_absent_ratio() {
        let p = profile_from(|d, h| (d != 0 || h < 12).then_some(0.5));
        let r = peak_ratios(&p, &PeakWindows::default());
        assert_eq!(r.ratio(0), None);
        assert_eq!(r.ratio(1), Some(1.0));
    }

    #[test]
    fn peak_window_validation() {
        assert!(PeakWindows { morning: (12, 6), evening: (16, 22) }.validate().is_err());
        assert!(PeakWindows { morning: (6, 12), evening: (16, 24) }.validate().is_err());
        assert!(PeakWindows::default().validate().is_ok());
    }

    #[test]
    fn contribution_bounded_by_one_over_n() {
        let w = Window::default();
        let mut recs = Vec::new();
        for a in 1..=4u32 {
            let scale = 10u32.pow(a);
            for i in 0..w.hours() {
                recs.push(TrafficRecord { hour: w.hour_at(i), origin: a, dest: a, n_calls: scale * ((i as u32 % 5) + 1), duration: 0.0 });
            }
        }
        let (t, tl) = table_from(&recs);
        let m = model(&[(1, SiteClass::Rural), (2, SiteClass::Rural), (3, SiteClass::Rural), (4, SiteClass::Rural)]);
        let pairs: Vec<_> = (1..=4).map(|a| pair(a, day(10))).collect();
        let r = align_and_average(&pairs, &m, &t, &tl, Direction::Both).unwrap();
        let by_antenna: BTreeMap<_, _> = r.epochs.iter().map(|(_, e)| (e.antenna_id, e)).collect();
        let p = r.profile(SiteClass::Rural);
        for i in 0..EPOCH_HOURS {
            for e in by_antenna.values() {
                let contribution = e.values[i].unwrap() / p.n[i] as f64;
                assert!(contribution <= 1.0 / p.n[i] as f64);
            }
        }
    }
}
