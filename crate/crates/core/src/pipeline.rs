//! Stage runners shared by the command line and the examples.
//!
//! Every stage reads the input files it needs from a data directory and
//! recomputes its prerequisites in memory, so stages can run in any order.
//! Outputs go to fixed file names in an output directory.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::Config;
use crate::epoch::{
    align_and_average, peak_ratios, AlignedProfile, AlignmentReport, CallTable, DailyAccumulator, DailyReport,
    PeakReport, AntennaSet,
};
use crate::exporter::{build_scene, Scene, SceneInputs};
use crate::fusion::{join, JoinResult};
use crate::geo::LightRaster;
use crate::ingest::{
    parse_antennas, parse_fires, parse_raster, parse_traffic, parse_trajectories, Antenna, AntennaId, FireParse,
    RowCounts, Timeline,
};
use crate::lightclass::{fit_sites, label_clusters, site_luminosities, ClusterModel, LuminosityTable, SiteClass};
use crate::synthgen::{ANTENNAS_FILE, FIRES_FILE, RASTER_FILE, TRAFFIC_FILE, TRAJECTORIES_FILE};
use crate::trajflow::{
    visitors_by_cluster, visitors_for_pairs, zero_visitor_summary, ClusterVisitors, DayTrajectories, EpochVisitors,
    VisitIndex, ZeroVisitorSummary,
};

pub const INGEST_SUMMARY_FILE: &str = "ingest_summary.txt";
pub const PAIRS_FILE: &str = "pairs.csv";
pub const JOIN_SUMMARY_FILE: &str = "join_summary.json";
pub const CLASSES_FILE: &str = "classes.csv";
pub const CENTROIDS_FILE: &str = "centroids.json";
pub const RATIOS_FILE: &str = "ratios.json";
pub const VISITORS_FILE: &str = "visitors.csv";
pub const VISITORS_SUMMARY_FILE: &str = "visitors_summary.json";
pub const DAILY_FILE: &str = "daily.csv";
pub const DAILY_TREND_FILE: &str = "daily_trend.json";
pub const SCENE_FILE: &str = "scene.json";

pub fn profile_file(class: SiteClass) -> String {
    format!("profile_{}.csv", class.as_str())
}

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Bad or missing input; names the file and, when known, the line.
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("{path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Invariant(_) => 2,
            _ => 1,
        }
    }

    fn input(path: &Path, message: impl ToString) -> Self {
        PipelineError::Input {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|e| PipelineError::input(path, e))
}

fn check_counts(path: &Path, c: &RowCounts) -> Result<()> {
    if c.is_consistent() {
        Ok(())
    } else {
        Err(PipelineError::Invariant(format!("{}: row counts do not add up: {c:?}", path.display())))
    }
}

/// The fixed input file names inside a data directory.
#[derive(Debug, Clone)]
pub struct DataDir(pub PathBuf);

impl DataDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self(dir.into())
    }
    pub fn antennas(&self) -> PathBuf {
        self.0.join(ANTENNAS_FILE)
    }
    pub fn traffic(&self) -> PathBuf {
        self.0.join(TRAFFIC_FILE)
    }
    pub fn trajectories(&self) -> PathBuf {
        self.0.join(TRAJECTORIES_FILE)
    }
    pub fn fires(&self) -> PathBuf {
        self.0.join(FIRES_FILE)
    }
    pub fn raster(&self) -> PathBuf {
        self.0.join(RASTER_FILE)
    }
}

pub fn load_antennas(data: &DataDir) -> Result<Vec<Antenna>> {
    let path = data.antennas();
    parse_antennas(open(&path)?).map_err(|e| PipelineError::input(&path, e))
}

pub fn load_fires(data: &DataDir, cfg: &Config) -> Result<FireParse> {
    let path = data.fires();
    let parsed = parse_fires(open(&path)?, &cfg.bbox, Some(&cfg.window), cfg.analysis.parse_mode)
        .map_err(|e| PipelineError::input(&path, e))?;
    check_counts(&path, &parsed.counts)?;
    Ok(parsed)
}

pub fn load_raster(data: &DataDir) -> Result<LightRaster> {
    let path = data.raster();
    parse_raster(open(&path)?).map_err(|e| PipelineError::input(&path, e))
}

pub fn join_stage(antennas: &[Antenna], fires: &FireParse, cfg: &Config) -> Result<JoinResult> {
    let r = join(&fires.fires, antennas, cfg.analysis.join_threshold_km);
    if !r.summary.is_consistent() {
        return Err(PipelineError::Invariant(format!("join summary inconsistent: {:?}", r.summary)));
    }
    Ok(r)
}

/// Luminosity and labeled clusters for the antennas that have a nearby fire.
pub fn classify_stage(
    antennas: &[Antenna],
    joined: &JoinResult,
    raster: &LightRaster,
    cfg: &Config,
    raster_path: &Path,
) -> Result<(LuminosityTable, ClusterModel)> {
    let with_fire: HashSet<AntennaId> = joined.pairs.iter().map(|p| p.antenna_id).collect();
    let sites: Vec<Antenna> = antennas.iter().filter(|a| with_fire.contains(&a.id)).cloned().collect();
    let table = site_luminosities(&sites, raster, cfg.analysis.light_radius_km);
    let model = fit_sites(&table.sites, cfg.analysis.k, cfg.seed)
        .and_then(label_clusters)
        .map_err(|e| PipelineError::input(raster_path, format!("classification failed: {e}")))?;
    Ok((table, model))
}

/// One pass over the traffic file.
pub struct TrafficScan {
    pub table: CallTable,
    pub timeline: Timeline,
    pub daily: DailyAccumulator,
    pub counts: RowCounts,
}

pub fn scan_traffic(data: &DataDir, cfg: &Config, tracked: Option<HashSet<AntennaId>>) -> Result<TrafficScan> {
    let path = data.traffic();
    let mut table = CallTable::new(cfg.window, tracked);
    let mut daily = DailyAccumulator::new(cfg.window, AntennaSet::All);
    let mut rdr = parse_traffic(open(&path)?, cfg.window, cfg.analysis.parse_mode);
    for rec in rdr.by_ref() {
        let rec = rec.map_err(|e| PipelineError::input(&path, e))?;
        table.push(&rec);
        daily.push(&rec);
    }
    let (timeline, counts) = rdr.finish();
    check_counts(&path, &counts)?;
    Ok(TrafficScan {
        table,
        timeline,
        daily,
        counts,
    })
}

pub struct Alignment {
    pub report: AlignmentReport,
    pub peaks: Vec<PeakReport>,
}

impl Alignment {
    pub fn profiles_with_peaks(&self) -> Vec<(AlignedProfile, PeakReport)> {
        self.report.profiles.iter().cloned().zip(self.peaks.iter().cloned()).collect()
    }
}

pub fn align_stage(joined: &JoinResult, model: &ClusterModel, scan: &TrafficScan, cfg: &Config) -> Result<Alignment> {
    let report = align_and_average(&joined.pairs, model, &scan.table, &scan.timeline, cfg.analysis.direction)
        .map_err(|e| PipelineError::Invariant(e.to_string()))?;
    let peaks = report
        .profiles
        .iter()
        .map(|p| peak_ratios(p, &cfg.analysis.peak_windows))
        .collect();
    Ok(Alignment { report, peaks })
}

pub fn scan_visits(data: &DataDir, cfg: &Config, joined: &JoinResult) -> Result<(VisitIndex, RowCounts)> {
    let path = data.trajectories();
    let mut idx = VisitIndex::for_pairs(&joined.pairs, cfg.window, cfg.analysis.period_days);
    let mut rdr = parse_trajectories(open(&path)?, cfg.analysis.parse_mode);
    for p in rdr.by_ref() {
        idx.push(p.map_err(|e| PipelineError::input(&path, e))?);
    }
    let counts = rdr.counts();
    check_counts(&path, &counts)?;
    Ok((idx, counts))
}

pub fn scan_day_trajectories(data: &DataDir, cfg: &Config, epochs: &[EpochVisitors]) -> Result<DayTrajectories> {
    let path = data.trajectories();
    let mut days = DayTrajectories::for_epochs(epochs, cfg.window, cfg.analysis.period_days);
    for p in parse_trajectories(open(&path)?, cfg.analysis.parse_mode) {
        days.push(p.map_err(|e| PipelineError::input(&path, e))?);
    }
    Ok(days.finish())
}

#[derive(Debug, Clone, Serialize)]
pub struct VisitorSummary {
    pub zero_visitors: Option<ZeroVisitorSummary>,
    pub by_class: BTreeMap<SiteClass, ClusterVisitors>,
}

pub fn visitors_stage(
    idx: &VisitIndex,
    joined: &JoinResult,
    model: &ClusterModel,
) -> Result<(Vec<EpochVisitors>, VisitorSummary)> {
    let epochs = visitors_for_pairs(idx, &joined.pairs);
    let zero_visitors = zero_visitor_summary(&epochs).ok();
    let by_class = visitors_by_cluster(&epochs, model).map_err(|e| PipelineError::Invariant(e.to_string()))?;
    Ok((
        epochs,
        VisitorSummary {
            zero_visitors,
            by_class,
        },
    ))
}

pub fn daily_stage(scan: &TrafficScan, cfg: &Config) -> DailyReport {
    DailyReport::build(scan.daily.clone().finish(&scan.timeline), &cfg.analysis.anomaly)
}

/// Writes stage outputs into one directory.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| PipelineError::Output {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_with(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let path = self.path(name);
        let err = |source| PipelineError::Output {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(err)?);
        f(&mut w).and_then(|_| w.flush()).map_err(err)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")
        })
    }

    pub fn ingest_summary(&self, lines: &[(String, RowCounts, usize)]) -> Result<()> {
        self.write_with(INGEST_SUMMARY_FILE, |w| {
            for (file, c, missing) in lines {
                writeln!(w, "{file} {}", c.summary_line(*missing))?;
            }
            Ok(())
        })
    }

    pub fn join(&self, r: &JoinResult) -> Result<()> {
        self.write_with(PAIRS_FILE, |w| {
            writeln!(w, "antenna_id,fire_lat,fire_lon,fire_date,distance_km")?;
            for p in &r.pairs {
                let f = &p.fire;
                writeln!(w, "{},{},{},{},{}", p.antenna_id, f.position.lat(), f.position.lon(), f.date, p.distance_km)?;
            }
            Ok(())
        })?;
        self.json(JOIN_SUMMARY_FILE, &r.summary)
    }

    pub fn classes(&self, table: &LuminosityTable, model: &ClusterModel) -> Result<()> {
        let mut rows: Vec<_> = table.sites.clone();
        rows.sort_by_key(|s| s.antenna_id);
        self.write_with(CLASSES_FILE, |w| {
            writeln!(w, "antenna_id,luminosity,cluster,label")?;
            for s in &rows {
                let cluster = model.assignment[&s.antenna_id];
                let label = model.label_of(s.antenna_id).map_or("", SiteClass::as_str);
                writeln!(w, "{},{},{cluster},{label}", s.antenna_id, s.luminosity)?;
            }
            Ok(())
        })?;
        #[derive(Serialize)]
        struct Centroids<'a> {
            centroids: &'a [f64],
            labels: &'a Option<Vec<SiteClass>>,
            sizes: Vec<usize>,
            outside_extent: usize,
        }
        let mut sizes = vec![0; model.k()];
        for c in model.assignment.values() {
            sizes[*c] += 1;
        }
        self.json(
            CENTROIDS_FILE,
            &Centroids {
                centroids: &model.centroids,
                labels: &model.labels,
                sizes,
                outside_extent: table.outside_extent,
            },
        )
    }

    pub fn alignment(&self, a: &Alignment, cfg: &Config) -> Result<()> {
        for p in &a.report.profiles {
            self.write_with(&profile_file(p.class), |w| {
                writeln!(w, "offset_hour,mean,n")?;
                for ((offset, mean), n) in AlignedProfile::offsets().zip(&p.mean).zip(&p.n) {
                    match mean {
                        Some(m) => writeln!(w, "{offset},{m},{n}")?,
                        None => writeln!(w, "{offset},,{n}")?,
                    }
                }
                Ok(())
            })?;
        }
        #[derive(Serialize)]
        struct ClassRatios<'a> {
            epochs: usize,
            excluded: usize,
            empty: bool,
            days: &'a [crate::epoch::PeakRatio],
            inversion: bool,
        }
        #[derive(Serialize)]
        struct Ratios<'a> {
            direction: crate::epoch::Direction,
            peak_windows: crate::epoch::PeakWindows,
            classes: BTreeMap<SiteClass, ClassRatios<'a>>,
            excluded: &'a [crate::epoch::ExcludedEpoch],
        }
        let classes = a
            .report
            .profiles
            .iter()
            .zip(&a.peaks)
            .map(|(p, r)| {
                (
                    p.class,
                    ClassRatios {
                        epochs: p.epochs,
                        excluded: p.excluded,
                        empty: p.is_empty(),
                        days: &r.days,
                        inversion: r.inversion,
                    },
                )
            })
            .collect();
        self.json(
            RATIOS_FILE,
            &Ratios {
                direction: cfg.analysis.direction,
                peak_windows: cfg.analysis.peak_windows,
                classes,
                excluded: &a.report.excluded,
            },
        )
    }

    pub fn visitors(&self, epochs: &[EpochVisitors], summary: &VisitorSummary) -> Result<()> {
        self.write_with(VISITORS_FILE, |w| {
            writeln!(w, "antenna_id,fire_date,n_visitors")?;
            for e in epochs {
                writeln!(w, "{},{},{}", e.pair.antenna_id, e.pair.fire.date, e.n_visitors())?;
            }
            Ok(())
        })?;
        self.json(VISITORS_SUMMARY_FILE, summary)
    }

    pub fn daily(&self, r: &DailyReport) -> Result<()> {
        self.write_with(DAILY_FILE, |w| {
            writeln!(w, "date,calls,missing_hours")?;
            for t in &r.totals {
                writeln!(w, "{},{},{}", t.date, t.calls, t.missing_hours)?;
            }
            Ok(())
        })?;
        #[derive(Serialize)]
        struct Trend<'a> {
            anomalies: &'a [crate::epoch::DayAnomaly],
            trends: &'a [crate::epoch::MonthTrend],
        }
        self.json(
            DAILY_TREND_FILE,
            &Trend {
                anomalies: &r.anomalies,
                trends: &r.trends,
            },
        )
    }

    pub fn scene(&self, scene: &Scene) -> Result<()> {
        let text = scene.to_canonical_json();
        self.write_with(SCENE_FILE, |w| w.write_all(text.as_bytes()))
    }
}

/// Everything the full pipeline computes.
pub struct Outputs {
    pub antennas: Vec<Antenna>,
    pub fires: FireParse,
    pub joined: JoinResult,
    pub luminosity: LuminosityTable,
    pub model: ClusterModel,
    pub scan: TrafficScan,
    pub alignment: Alignment,
    pub epochs: Vec<EpochVisitors>,
    pub visitor_summary: VisitorSummary,
    pub trajectory_counts: RowCounts,
    pub raster_rows: usize,
    pub daily: DailyReport,
    pub scene: Scene,
}

/// One `(file, counts, missing_hours)` line per input file. Antenna and
/// raster files are all-or-nothing, so every row counts as kept.
pub fn ingest_lines(
    antennas: usize,
    traffic: &TrafficScan,
    trajectories: RowCounts,
    fires: &FireParse,
    raster_rows: usize,
) -> Vec<(String, RowCounts, usize)> {
    let whole = |n: usize| RowCounts {
        rows: n as u64,
        kept: n as u64,
        ..Default::default()
    };
    vec![
        (ANTENNAS_FILE.into(), whole(antennas), 0),
        (TRAFFIC_FILE.into(), traffic.counts, traffic.timeline.missing_hours()),
        (TRAJECTORIES_FILE.into(), trajectories, 0),
        (FIRES_FILE.into(), fires.counts, 0),
        (RASTER_FILE.into(), whole(raster_rows), 0),
    ]
}

/// Runs every analysis stage on `data`.
pub fn analyze(data: &DataDir, cfg: &Config) -> Result<Outputs> {
    let antennas = load_antennas(data)?;
    let fires = load_fires(data, cfg)?;
    let raster = load_raster(data)?;
    let joined = join_stage(&antennas, &fires, cfg)?;
    let (luminosity, model) = classify_stage(&antennas, &joined, &raster, cfg, &data.raster())?;
    let tracked: HashSet<AntennaId> = joined.pairs.iter().map(|p| p.antenna_id).collect();
    let scan = scan_traffic(data, cfg, Some(tracked))?;
    let alignment = align_stage(&joined, &model, &scan, cfg)?;
    let (idx, trajectory_counts) = scan_visits(data, cfg, &joined)?;
    let (epochs, visitor_summary) = visitors_stage(&idx, &joined, &model)?;
    drop(idx);
    let days = scan_day_trajectories(data, cfg, &epochs)?;
    let daily = daily_stage(&scan, cfg);
    let profiles = alignment.profiles_with_peaks();
    let scene = build_scene(&SceneInputs {
        window: cfg.window,
        missing_hours: scan.timeline.missing().collect(),
        antennas: &antennas,
        luminosity: Some(&luminosity),
        model: Some(&model),
        fires: &fires.fires,
        profiles: &profiles,
        epochs: &epochs,
        trajectories: Some(&days),
        point_budget: cfg.analysis.point_budget,
    })
    .map_err(|e| PipelineError::Invariant(e.to_string()))?;
    Ok(Outputs {
        antennas,
        fires,
        joined,
        luminosity,
        model,
        scan,
        alignment,
        epochs,
        visitor_summary,
        trajectory_counts,
        raster_rows: raster.nrows(),
        daily,
        scene,
    })
}

impl Outputs {
    pub fn write_all(&self, out: &OutDir, cfg: &Config) -> Result<()> {
        out.ingest_summary(&ingest_lines(
            self.antennas.len(),
            &self.scan,
            self.trajectory_counts,
            &self.fires,
            self.raster_rows,
        ))?;
        out.join(&self.joined)?;
        out.classes(&self.luminosity, &self.model)?;
        out.alignment(&self.alignment, cfg)?;
        out.visitors(&self.epochs, &self.visitor_summary)?;
        out.daily(&self.daily)?;
        out.scene(&self.scene)
    }
}
