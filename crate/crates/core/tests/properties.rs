use std::collections::{BTreeSet, HashMap};

use chrono::NaiveDate;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use firecdr::epoch::{align_and_average, normalize_window, AlignmentReport, CallTable, Direction};
use firecdr::exporter::{build_scene, Scene, SceneInputs};
use firecdr::fusion::{join, FireSitePair};
use firecdr::geo::{haversine_km, integrate_disk, GeoPoint, LightRaster};
use firecdr::ingest::{Antenna, AntennaId, FireEvent, Timeline, TrafficRecord, TrajectoryPoint, VisitorKey};
use firecdr::lightclass::{ClusterModel, SiteClass};
use firecdr::time::{HourStamp, MinuteStamp, Window};
use firecdr::trajflow::{visitors_for_pairs, VisitIndex};

fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 1, d).unwrap()
}

fn short_window() -> Window {
    Window::new(day(1), day(20))
}

fn fire_at(date: NaiveDate) -> FireEvent {
    FireEvent {
        position: pt(6.0, -5.0),
        date,
        acq_time: None,
        confidence: None,
    }
}

fn pair(antenna_id: AntennaId, date: NaiveDate) -> FireSitePair {
    FireSitePair {
        antenna_id,
        fire: fire_at(date),
        distance_km: 0.2,
    }
}

/// Random traffic for a few antennas over the short window, with random
/// missing hours and one to three fire days per antenna.
struct Case {
    counts: HashMap<AntennaId, Vec<u32>>,
    missing: BTreeSet<usize>,
    pairs: Vec<FireSitePair>,
    model: ClusterModel,
}

fn case(seed: u64) -> Case {
    let mut r = Xoshiro256PlusPlus::seed_from_u64(seed);
    let w = short_window();
    let n_ant = r.random_range(1..8u32);
    let counts = (1..=n_ant)
        .map(|id| (id, (0..w.hours()).map(|_| r.random_range(0..50)).collect()))
        .collect();
    let missing = (0..r.random_range(0..40)).map(|_| r.random_range(0..w.hours())).collect();
    let pairs = (1..=n_ant)
        .flat_map(|id| {
            let k = r.random_range(1..4);
            (0..k).map(|_| pair(id, w.day_at(r.random_range(0..w.days())))).collect::<Vec<_>>()
        })
        .collect();
    let model = ClusterModel {
        centroids: vec![1.0, 2.0, 3.0],
        assignment: (1..=n_ant).map(|id| (id, (id % 3) as usize)).collect(),
        labels: Some(vec![SiteClass::Rural, SiteClass::SmallCity, SiteClass::BigCity]),
    };
    Case {
        counts,
        missing,
        pairs,
        model,
    }
}

fn tables(c: &Case) -> (CallTable, Timeline) {
    let w = short_window();
    let mut table = CallTable::new(w, None);
    let mut timeline = Timeline::empty(w);
    for i in 0..w.hours() {
        if c.missing.contains(&i) {
            continue;
        }
        timeline.mark(w.hour_at(i));
        for (&id, v) in &c.counts {
            table.push(&TrafficRecord {
                hour: w.hour_at(i),
                origin: id,
                dest: id,
                n_calls: v[i],
                duration: 0.0,
            });
        }
    }
    (table, timeline)
}

fn align(c: &Case, pairs: &[FireSitePair]) -> AlignmentReport {
    let (t, tl) = tables(c);
    align_and_average(pairs, &c.model, &t, &tl, Direction::Both).unwrap()
}

fn window_start(date: NaiveDate) -> i64 {
    HourStamp::from_date_hour(date, 0).0 - 48
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disk_sum_grows_with_radius(seed in any::<u64>(), r1 in 0.1f64..20.0, extra in 0.0f64..20.0) {
        let mut r = Xoshiro256PlusPlus::seed_from_u64(seed);
        let values: Vec<f64> = (0..40 * 40).map(|_| r.random::<f64>() * 10.0).collect();
        let raster = LightRaster::new(40, 40, pt(6.0, -5.0), 0.01, -9999.0, values).unwrap();
        let c = pt(6.0 + r.random::<f64>() * 0.4, -5.0 + r.random::<f64>() * 0.4);
        prop_assert!(integrate_disk(&raster, c, r1) <= integrate_disk(&raster, c, r1 + extra));
    }

    #[test]
    fn indexed_join_matches_exhaustive_scan(seed in any::<u64>()) {
        let mut r = Xoshiro256PlusPlus::seed_from_u64(seed);
        let antennas: Vec<Antenna> = (1..=60)
            .map(|id| Antenna { id, position: pt(6.0 + r.random::<f64>() * 0.1, -5.0 + r.random::<f64>() * 0.1) })
            .collect();
        let fires: Vec<FireEvent> = (0..200)
            .map(|_| FireEvent { position: pt(6.0 + r.random::<f64>() * 0.1, -5.0 + r.random::<f64>() * 0.1), ..fire_at(day(3)) })
            .collect();
        for t in [0.5, 1.0, 2.0] {
            let got: BTreeSet<(AntennaId, u64, u64)> = join(&fires, &antennas, t)
                .pairs
                .iter()
                .map(|p| (p.antenna_id, p.fire.position.lat().to_bits(), p.fire.position.lon().to_bits()))
                .collect();
            let mut want = BTreeSet::new();
            for f in &fires {
                for a in &antennas {
                    if haversine_km(a.position, f.position) < t {
                        want.insert((a.id, f.position.lat().to_bits(), f.position.lon().to_bits()));
                    }
                }
            }
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn normalized_values_are_bounded_with_a_peak(seed in any::<u64>()) {
        let c = case(seed);
        for (_, e) in &align(&c, &c.pairs).epochs {
            let vals: Vec<f64> = e.values.iter().flatten().copied().collect();
            prop_assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(vals.contains(&1.0));
        }
    }

    #[test]
    fn dropping_a_non_peak_hour_leaves_other_hours_alone(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let mut c = case(seed);
        let w = short_window();
        let p = c.pairs[0].clone();
        let (t, tl) = tables(&c);
        let Ok(before) = normalize_window(&t.series(p.antenna_id, Direction::Both, &tl), p.fire.date) else {
            return Ok(());
        };
        let candidates: Vec<usize> = before
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some_and(|v| v < 1.0))
            .map(|(k, _)| k)
            .collect();
        if candidates.is_empty() {
            return Ok(());
        }
        let k = candidates[pick.index(candidates.len())];
        c.missing.insert(w.hour_index(HourStamp(window_start(p.fire.date) + k as i64)).unwrap());
        let (t, tl) = tables(&c);
        let after = normalize_window(&t.series(p.antenna_id, Direction::Both, &tl), p.fire.date).unwrap();
        for (j, (a, b)) in before.values.iter().zip(&after.values).enumerate() {
            if j == k {
                prop_assert!(b.is_none());
            } else {
                prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn alignment_ignores_pair_order(seed in any::<u64>()) {
        let c = case(seed);
        let mut shuffled = c.pairs.clone();
        shuffled.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed ^ 1));
        let (a, b) = (align(&c, &c.pairs), align(&c, &shuffled));
        for (pa, pb) in a.profiles.iter().zip(&b.profiles) {
            prop_assert_eq!(&pa.n, &pb.n);
            let bits = |m: &[Option<f64>]| m.iter().map(|v| v.map(f64::to_bits)).collect::<Vec<_>>();
            prop_assert_eq!(bits(&pa.mean), bits(&pb.mean));
        }
    }

    #[test]
    fn one_loud_antenna_moves_a_mean_by_at_most_one_over_n(seed in any::<u64>(), gain in 2u32..1000) {
        let c = case(seed);
        let base = align(&c, &c.pairs);
        let mut loud = case(seed);
        for v in loud.counts.get_mut(&1).unwrap() {
            *v = v.saturating_mul(gain).saturating_add(gain * (*v % 3));
        }
        let after = align(&loud, &loud.pairs);
        let epochs_of_1 = c.pairs.iter().filter(|p| p.antenna_id == 1).count() as f64;
        for (p, q) in base.profiles.iter().zip(&after.profiles) {
            for k in 0..p.mean.len() {
                if let (Some(a), Some(b)) = (p.mean[k], q.mean[k]) {
                    prop_assert!((a - b).abs() <= epochs_of_1 / p.n[k] as f64 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn profile_means_match_recomputation_from_counts(seed in any::<u64>()) {
        let c = case(seed);
        let w = short_window();
        let report = align(&c, &c.pairs);
        let mut sorted = c.pairs.clone();
        sorted.sort_by(FireSitePair::canonical_cmp);
        for class in SiteClass::ALL {
            let mut sum = vec![0.0; 120];
            let mut n = vec![0usize; 120];
            for p in sorted.iter().filter(|p| c.model.label_of(p.antenna_id) == Some(class)) {
                let cells: Vec<Option<u32>> = (0..120)
                    .map(|k| {
                        let i = w.hour_index(HourStamp(window_start(p.fire.date) + k))?;
                        (!c.missing.contains(&i)).then(|| c.counts[&p.antenna_id][i])
                    })
                    .collect();
                let max = cells.iter().flatten().copied().max().unwrap_or(0);
                if max == 0 {
                    continue;
                }
                for (k, v) in cells.iter().enumerate() {
                    if let Some(v) = v {
                        sum[k] += *v as f64 / max as f64;
                        n[k] += 1;
                    }
                }
            }
            let prof = report.profile(class);
            prop_assert_eq!(&prof.n, &n);
            for k in 0..120 {
                let want = (n[k] > 0).then(|| sum[k] / n[k] as f64);
                prop_assert_eq!(prof.mean[k].map(f64::to_bits), want.map(f64::to_bits));
            }
        }
    }

    #[test]
    fn visitor_filter_matches_scan_and_keeps_periods_apart(seed in any::<u64>()) {
        let mut r = Xoshiro256PlusPlus::seed_from_u64(seed);
        let w = Window::default();
        let points: Vec<TrajectoryPoint> = (0..2000)
            .map(|_| TrajectoryPoint {
                user_id: r.random_range(1..40),
                timestamp: MinuteStamp::from_date_minute(w.day_at(r.random_range(0..w.days())), r.random_range(0..1440)),
                antenna_id: r.random_range(1..6),
            })
            .collect();
        let mut pairs: Vec<FireSitePair> = (0..30)
            .map(|_| pair(r.random_range(1..6), w.day_at(r.random_range(0..w.days()))))
            .collect();
        let idx = VisitIndex::build(points.iter().copied(), &pairs, w, 14);
        let got = visitors_for_pairs(&idx, &pairs);
        pairs.sort_by(FireSitePair::canonical_cmp);
        for (p, ev) in pairs.iter().zip(&got) {
            let want: BTreeSet<VisitorKey> = points
                .iter()
                .filter(|q| q.antenna_id == p.antenna_id && q.date() == p.fire.date)
                .map(|q| q.owner(&w, 14))
                .collect();
            prop_assert_eq!(&ev.visitors, &want);
            let period = (p.fire.date - w.first_day).num_days() / 14;
            prop_assert!(ev.visitors.iter().all(|v| v.period == period));
        }
    }

    #[test]
    fn scene_json_round_trips(seed in any::<u64>()) {
        let mut r = Xoshiro256PlusPlus::seed_from_u64(seed);
        let antennas: Vec<Antenna> = (1..=r.random_range(1..20))
            .map(|id| Antenna { id, position: pt(r.random_range(-60.0..60.0), r.random_range(-170.0..170.0)) })
            .collect();
        let fires: Vec<FireEvent> = (0..r.random_range(0..20))
            .map(|_| FireEvent {
                position: pt(r.random_range(-60.0..60.0), r.random::<f64>() * 1e-3),
                date: day(r.random_range(1..20)),
                acq_time: Some(r.random_range(0..1440)),
                confidence: Some(r.random_range(0..=100)),
            })
            .collect();
        let mut inputs = SceneInputs::empty(short_window());
        inputs.antennas = &antennas;
        inputs.fires = &fires;
        let text = build_scene(&inputs).unwrap().to_canonical_json();
        let again = Scene::from_json(&text).unwrap().to_canonical_json();
        prop_assert_eq!(text, again);
    }
}
