//! Versioned JSON scene bundling the pipeline outputs, and a read-only server for it.

mod server;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use server::{router, serve, ServeError, ServedScene};

use crate::epoch::{AlignedProfile, Direction, PeakRatio, PeakReport, EPOCH_HOURS, FIRST_OFFSET};
use crate::ingest::{Antenna, AntennaId, FireEvent, TrajectoryPoint};
use crate::lightclass::{ClusterModel, LuminosityTable, SiteClass};
use crate::time::{HourStamp, Window};
use crate::trajflow::{DayTrajectories, EpochVisitors};

pub const SCENE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_POINT_BUDGET: usize = 250_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExportError {
    #[error("{context} references unknown antenna {id}")]
    Dangling { context: String, id: AntennaId },
    #[error("scene schema version {found}, expected {SCENE_SCHEMA_VERSION}")]
    Version { found: u32 },
    #[error("malformed scene: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneWindow {
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub hours: usize,
    pub missing_hours: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneAntenna {
    pub id: AntennaId,
    pub lat: f64,
    pub lon: f64,
    pub label: Option<SiteClass>,
    pub luminosity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFire {
    pub lat: f64,
    pub lon: f64,
    pub date: NaiveDate,
    /// Minutes after midnight.
    pub acq_time: Option<u16>,
    pub confidence: Option<u8>,
}

impl From<&FireEvent> for SceneFire {
    fn from(f: &FireEvent) -> Self {
        Self {
            lat: f.position.lat(),
            lon: f.position.lon(),
            date: f.date,
            acq_time: f.acq_time,
            confidence: f.confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneProfile {
    pub label: SiteClass,
    pub direction: Direction,
    pub epochs: usize,
    pub excluded: usize,
    pub first_offset: i64,
    pub mean: Vec<Option<f64>>,
    pub n: Vec<usize>,
    pub peaks: Vec<PeakRatio>,
    pub inversion: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePoint {
    /// `YYYY-MM-DDTHH:MM:00`
    pub t: String,
    pub antenna_id: AntennaId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneTrajectory {
    pub period: i64,
    /// Decimal string; raw ids may exceed what a JSON number holds exactly.
    pub user_id: String,
    pub points: Vec<ScenePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEpochFire {
    pub lat: f64,
    pub lon: f64,
    pub distance_km: f64,
}

/// One (antenna, fire day). Several fires near the same antenna on the same
/// day share an entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEpoch {
    pub antenna_id: AntennaId,
    pub fire_date: NaiveDate,
    pub label: Option<SiteClass>,
    pub fires: Vec<SceneEpochFire>,
    pub n_visitors: usize,
    pub trajectories: Vec<SceneTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Downsampling {
    pub point_budget: usize,
    pub total_points: usize,
    pub kept_points: usize,
    /// Every `stride`-th point of each trajectory is kept; 1 when not applied.
    pub stride: usize,
    pub applied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub schema_version: u32,
    pub window: SceneWindow,
    pub antennas: Vec<SceneAntenna>,
    pub fires: Vec<SceneFire>,
    pub profiles: Vec<SceneProfile>,
    pub epochs: Vec<SceneEpoch>,
    pub downsampling: Downsampling,
}

/// Everything a scene is assembled from. Absent stages leave their part empty.
pub struct SceneInputs<'a> {
    pub window: Window,
    pub missing_hours: Vec<HourStamp>,
    pub antennas: &'a [Antenna],
    pub luminosity: Option<&'a LuminosityTable>,
    pub model: Option<&'a ClusterModel>,
    pub fires: &'a [FireEvent],
    pub profiles: &'a [(AlignedProfile, PeakReport)],
    pub epochs: &'a [EpochVisitors],
    pub trajectories: Option<&'a DayTrajectories>,
    pub point_budget: usize,
}

impl<'a> SceneInputs<'a> {
    pub fn empty(window: Window) -> Self {
        Self {
            window,
            missing_hours: Vec::new(),
            antennas: &[],
            luminosity: None,
            model: None,
            fires: &[],
            profiles: &[],
            epochs: &[],
            trajectories: None,
            point_budget: DEFAULT_POINT_BUDGET,
        }
    }
}

fn dangling(context: impl Into<String>, id: AntennaId) -> ExportError {
    ExportError::Dangling {
        context: context.into(),
        id,
    }
}

pub fn build_scene(inp: &SceneInputs) -> Result<Scene, ExportError> {
    let known: HashSet<AntennaId> = inp.antennas.iter().map(|a| a.id).collect();
    let lum: BTreeMap<AntennaId, f64> = inp
        .luminosity
        .map(|t| t.sites.iter().map(|s| (s.antenna_id, s.luminosity)).collect())
        .unwrap_or_default();
    if let Some(id) = lum.keys().find(|id| !known.contains(id)) {
        return Err(dangling("luminosity table", *id));
    }
    if let Some(m) = inp.model {
        if let Some(id) = m.assignment.keys().find(|id| !known.contains(id)) {
            return Err(dangling("cluster model", *id));
        }
    }
    let label = |id: AntennaId| inp.model.and_then(|m| m.label_of(id));

    let mut antennas: Vec<SceneAntenna> = inp
        .antennas
        .iter()
        .map(|a| SceneAntenna {
            id: a.id,
            lat: a.position.lat(),
            lon: a.position.lon(),
            label: label(a.id),
            luminosity: lum.get(&a.id).copied(),
        })
        .collect();
    antennas.sort_by_key(|a| a.id);

    let profiles = inp
        .profiles
        .iter()
        .map(|(p, peaks)| SceneProfile {
            label: p.class,
            direction: p.direction,
            epochs: p.epochs,
            excluded: p.excluded,
            first_offset: FIRST_OFFSET,
            mean: p.mean.clone(),
            n: p.n.clone(),
            peaks: peaks.days.clone(),
            inversion: peaks.inversion,
        })
        .collect();

    // Group pairs by (antenna, day); visitor sets of such pairs coincide.
    let mut grouped: BTreeMap<(AntennaId, NaiveDate), (Vec<SceneEpochFire>, &EpochVisitors)> = BTreeMap::new();
    for e in inp.epochs {
        let id = e.pair.antenna_id;
        if !known.contains(&id) {
            return Err(dangling(format!("epoch on {}", e.pair.fire.date), id));
        }
        let fire = SceneEpochFire {
            lat: e.pair.fire.position.lat(),
            lon: e.pair.fire.position.lon(),
            distance_km: e.pair.distance_km,
        };
        grouped.entry((id, e.pair.fire.date)).or_insert_with(|| (Vec::new(), e)).0.push(fire);
    }

    let mut epochs = Vec::with_capacity(grouped.len());
    let mut total_points = 0;
    for ((antenna_id, date), (fires, e)) in grouped {
        let mut trajectories = Vec::with_capacity(e.visitors.len());
        for v in &e.visitors {
            // Without full-day trajectories fall back to the visit points.
            // All points of one day share a period, so the raw id suffices.
            let pts: Vec<&TrajectoryPoint> = match inp.trajectories {
                Some(t) => t.get(date, v).iter().collect(),
                None => e.points.iter().filter(|p| p.user_id == v.user_id).collect(),
            };
            let points: Vec<ScenePoint> = pts
                .into_iter()
                .map(|p| ScenePoint {
                    t: p.timestamp.to_string(),
                    antenna_id: p.antenna_id,
                })
                .collect();
            for p in &points {
                if !known.contains(&p.antenna_id) {
                    return Err(dangling(format!("trajectory of user {} on {date}", v.user_id), p.antenna_id));
                }
            }
            total_points += points.len();
            trajectories.push(SceneTrajectory {
                period: v.period,
                user_id: v.user_id.to_string(),
                points,
            });
        }
        epochs.push(SceneEpoch {
            antenna_id,
            fire_date: date,
            label: label(antenna_id),
            fires,
            n_visitors: e.visitors.len(),
            trajectories,
        });
    }

    let budget = inp.point_budget.max(1);
    let stride = if total_points > budget { total_points.div_ceil(budget) } else { 1 };
    let mut kept = total_points;
    if stride > 1 {
        kept = 0;
        for t in epochs.iter_mut().flat_map(|e| e.trajectories.iter_mut()) {
            t.points = t.points.iter().step_by(stride).cloned().collect();
            kept += t.points.len();
        }
    }

    Ok(Scene {
        schema_version: SCENE_SCHEMA_VERSION,
        window: SceneWindow {
            first_day: inp.window.first_day,
            last_day: inp.window.last_day,
            hours: inp.window.hours(),
            missing_hours: inp.missing_hours.iter().map(|h| h.to_string()).collect(),
        },
        antennas,
        fires: inp.fires.iter().map(SceneFire::from).collect(),
        profiles,
        epochs,
        downsampling: Downsampling {
            point_budget: inp.point_budget,
            total_points,
            kept_points: kept,
            stride,
            applied: stride > 1,
        },
    })
}

impl Scene {
    /// Version and reference checks run before a scene is served.
    pub fn validate(&self) -> Result<(), ExportError> {
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(ExportError::Version {
                found: self.schema_version,
            });
        }
        let known: HashSet<AntennaId> = self.antennas.iter().map(|a| a.id).collect();
        if known.len() != self.antennas.len() {
            return Err(ExportError::Malformed("repeated antenna id".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &self.epochs {
            if !known.contains(&e.antenna_id) {
                return Err(dangling(format!("epoch on {}", e.fire_date), e.antenna_id));
            }
            if !seen.insert((e.antenna_id, e.fire_date)) {
                return Err(ExportError::Malformed(format!("repeated epoch {}/{}", e.antenna_id, e.fire_date)));
            }
            for p in e.trajectories.iter().flat_map(|t| &t.points) {
                if !known.contains(&p.antenna_id) {
                    return Err(dangling(format!("trajectory point on {}", e.fire_date), p.antenna_id));
                }
            }
        }
        for p in &self.profiles {
            if p.mean.len() != EPOCH_HOURS || p.n.len() != EPOCH_HOURS {
                return Err(ExportError::Malformed(format!("profile {} has wrong length", p.label)));
            }
        }
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("scene serializes")
    }

    /// Sorted keys, no insignificant whitespace, shortest round-trip floats.
    pub fn to_canonical_json(&self) -> String {
        canonical_string(&self.to_value())
    }

    pub fn from_json(text: &str) -> Result<Self, ExportError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| ExportError::Malformed(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }
}

pub fn canonical_string(v: &Value) -> String {
    // serde_json's map is ordered by key unless `preserve_order` is enabled.
    serde_json::to_string(v).expect("value serializes")
}

/// Re-renders arbitrary JSON text canonically.
pub fn canonicalize(text: &str) -> Result<String, serde_json::Error> {
    Ok(canonical_string(&serde_json::from_str::<Value>(text)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FireSitePair;
    use crate::geo::GeoPoint;
    use crate::time::MinuteStamp;
    use crate::trajflow::{visitors_for_pairs, VisitIndex};

    fn antenna(id: AntennaId) -> Antenna {
        Antenna { id, position: GeoPoint::new(6.0 + id as f64 * 0.01, -5.0).unwrap() }
    }

    fn one_epoch(point_antenna: AntennaId) -> (Vec<Antenna>, Vec<EpochVisitors>, DayTrajectories) {
        let w = Window::default();
        let date = NaiveDate::from_ymd_opt(2012, 1, 10).unwrap();
        let pair = FireSitePair {
            antenna_id: 1,
            fire: FireEvent { position: GeoPoint::new(6.01, -5.001).unwrap(), date, acq_time: Some(75), confidence: None },
            distance_km: 0.11,
        };
        let pts = vec![
            TrajectoryPoint { user_id: 5, timestamp: MinuteStamp::from_date_minute(date, 600), antenna_id: 1 },
            TrajectoryPoint { user_id: 5, timestamp: MinuteStamp::from_date_minute(date, 60), antenna_id: point_antenna },
        ];
        let idx = VisitIndex::build(pts.clone(), &[pair.clone()], w, 14);
        let epochs = visitors_for_pairs(&idx, &[pair]);
        let mut days = DayTrajectories::for_epochs(&epochs, w, 14);
        for p in pts {
            days.push(p);
        }
        (vec![antenna(1), antenna(2)], epochs, days.finish())
    }

    #[test]
    fn empty_scene_is_valid() {
        let s = build_scene(&SceneInputs::empty(Window::default())).unwrap();
        s.validate().unwrap();
        assert!(s.epochs.is_empty() && s.antennas.is_empty());
        assert!(!s.downsampling.applied);
    }

    #[test]
    fn one_visitor_one_polyline() {
        let (antennas, epochs, days) = one_epoch(2);
        let mut inp = SceneInputs::empty(Window::default());
        inp.antennas = &antennas;
        inp.epochs = &epochs;
        inp.trajectories = Some(&days);
        let s = build_scene(&inp).unwrap();
        assert_eq!(s.epochs.len(), 1);
        let t = &s.epochs[0].trajectories;
        assert_eq!(t.len(), 1);
        let ids: Vec<_> = t[0].points.iter().map(|p| p.antenna_id).collect();
        assert_eq!(ids, vec![2, 1]);
        assert_eq!(t[0].points[0].t, "2012-01-10T01:00:00");
    }

    #[test]
    fn dangling_reference_names_the_id() {
        let (antennas, epochs, days) = one_epoch(77);
        let mut inp = SceneInputs::empty(Window::default());
        inp.antennas = &antennas;
        inp.epochs = &epochs;
        inp.trajectories = Some(&days);
        let err = build_scene(&inp).unwrap_err();
        assert!(matches!(err, ExportError::Dangling { id: 77, .. }), "{err}");
    }

    #[test]
    fn budget_thins_points() {
        let (antennas, epochs, days) = one_epoch(2);
        let mut inp = SceneInputs::empty(Window::default());
        inp.antennas = &antennas;
        inp.epochs = &epochs;
        inp.trajectories = Some(&days);
        inp.point_budget = 1;
        let s = build_scene(&inp).unwrap();
        assert!(s.downsampling.applied);
        assert_eq!((s.downsampling.total_points, s.downsampling.kept_points, s.downsampling.stride), (2, 1, 2));
    }

    #[test]
    fn canonical_round_trip() {
        let (antennas, epochs, days) = one_epoch(2);
        let mut inp = SceneInputs::empty(Window::default());
        inp.antennas = &antennas;
        inp.epochs = &epochs;
        inp.trajectories = Some(&days);
        let text = build_scene(&inp).unwrap().to_canonical_json();
        assert_eq!(canonicalize(&text).unwrap(), text);
        assert_eq!(Scene::from_json(&text).unwrap().to_canonical_json(), text);
        assert!(!text.contains(": ") && !text.contains('\n'));
    }

    #[test]
    fn wrong_version_rejected() {
        let mut s = build_scene(&SceneInputs::empty(Window::default())).unwrap();
        s.schema_version = 2;
        assert_eq!(Scene::from_json(&s.to_canonical_json()), Err(ExportError::Version { found: 2 }));
    }
}
