//! The `firecdr` command line.
//!
//! Exit codes: 0 success, 1 input or usage error (the message names the file
//! and, when known, the line), 2 internal invariant violation.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::exporter;
use crate::ingest::parse_trajectories;
use crate::pipeline::{self as pl, DataDir, OutDir, PipelineError};
use crate::synthgen::{self, SynthError};

#[derive(Debug, Parser)]
#[command(name = "firecdr", version, about = "Fire, night-light and phone-activity fusion pipeline")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding antennas.csv, traffic.csv, trajectories.csv, fires.csv, lights.asc.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scenario with a ground-truth manifest.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory to write the input files and manifest.json into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse every input file and report row counts.
    Ingest(Common),
    /// Pair fires with antennas closer than the threshold.
    Join(Common),
    /// Cluster fire antennas by night-light luminosity.
    Classify(Common),
    /// Fire-aligned, per-class activity profiles and peak ratios.
    Align(Common),
    /// Visitors of fire antennas on fire days.
    Visitors(Common),
    /// Daily call totals, holiday anomalies and monthly trends.
    Daily(Common),
    /// Bundle all outputs into scene.json.
    Export(Common),
    /// Serve a scene read-only over HTTP.
    Serve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// All stages in order; synthesizes the data first when --data is omitted.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn input_failure(e: impl ToString) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

type Outcome = Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    match path {
        Some(p) => Config::load(p).map_err(input_failure),
        None => Ok(Config::default()),
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // Only the first call in a process can size the global pool.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Synth { config, seed, out } => synth(config.as_deref(), seed, &out),
        Command::Ingest(c) => ingest(&c),
        Command::Join(c) => join(&c),
        Command::Classify(c) => classify(&c),
        Command::Align(c) => align(&c),
        Command::Visitors(c) => visitors(&c),
        Command::Daily(c) => daily(&c),
        Command::Export(c) => export(&c),
        Command::Serve { scene, addr } => exporter::serve(&scene, &addr).map_err(input_failure),
        Command::Pipeline { config, data, out } => pipeline(config.as_deref(), data, &out),
    }
}

fn synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Outcome {
    let mut cfg = load_config(config)?.synth_config();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let m = synthgen::generate(&cfg, out)?;
    eprintln!(
        "synth: antennas={} sites={} epochs={} fires={} missing_hours={} -> {}",
        m.n_antennas,
        m.sites.len(),
        m.epochs.len(),
        m.fires.total,
        m.missing_hours.len(),
        out.display()
    );
    Ok(())
}

fn setup(c: &Common) -> Result<(Config, DataDir, OutDir), Failure> {
    let cfg = load_config(c.config.as_deref())?;
    let out = OutDir::create(&c.out)?;
    Ok((cfg, DataDir::new(&c.data), out))
}

fn ingest(c: &Common) -> Outcome {
    let (cfg, data, out) = setup(c)?;
    let antennas = pl::load_antennas(&data)?;
    let fires = pl::load_fires(&data, &cfg)?;
    let raster = pl::load_raster(&data)?;
    let scan = pl::scan_traffic(&data, &cfg, Some(HashSet::new()))?;
    let path = data.trajectories();
    let file = std::fs::File::open(&path).map_err(|e| input_failure(format!("{}: {e}", path.display())))?;
    let mut rdr = parse_trajectories(std::io::BufReader::with_capacity(1 << 20, file), cfg.analysis.parse_mode);
    for p in rdr.by_ref() {
        p.map_err(|e| input_failure(format!("{}: {e}", path.display())))?;
    }
    let lines = pl::ingest_lines(antennas.len(), &scan, rdr.counts(), &fires, raster.nrows());
    for (f, counts, missing) in &lines {
        eprintln!("{f} {}", counts.summary_line(*missing));
    }
    out.ingest_summary(&lines)?;
    Ok(())
}

fn join(c: &Common) -> Outcome {
    let (cfg, data, out) = setup(c)?;
    let antennas = pl::load_antennas(&data)?;
    let fires = pl::load_fires(&data, &cfg)?;
    let r = pl::join_stage(&antennas, &fires, &cfg)?;
    eprintln!(
        "join: pairs={} antennas_with_fire={} fires={} duplicates_collapsed={}",
        r.summary.n_pairs, r.summary.n_antennas_with_fire, r.summary.n_fires, r.summary.n_duplicates_collapsed
    );
    out.join(&r)?;
    Ok(())
}

fn classify(c: &Common) -> Outcome {
    let (cfg, data, out) = setup(c)?;
    let antennas = pl::load_antennas(&data)?;
    let fires = pl::load_fires(&data, &cfg)?;
    let raster = pl::load_raster(&data)?;
    let joined = pl::join_stage(&antennas, &fires, &cfg)?;
    let (table, model) = pl::classify_stage(&antennas, &joined, &raster, &cfg, &data.raster())?;
    let sizes: Vec<String> = crate::lightclass::SiteClass::ALL
        .iter()
        .map(|cl| format!("{}={}", cl.as_str(), model.members(*cl).len()))
        .collect();
    eprintln!("classify: sites={} {}", table.sites.len(), sizes.join(" "));
    out.classes(&table, &model)?;
    Ok(())
}

fn align(c: &Common) -> Outcome {
    let (cfg, data, out) = setup(c)?;
    let antennas = pl::load_antennas(&data)?;
    let fires = pl::load_fires(&data, &cfg)?;
    let raster = pl::load_raster(&data)?;
    let joined = pl::join_stage(&antennas, &fires, &cfg)?;
    let (_, model) = pl::classify_stage(&antennas, &joined, &raster, &cfg, &data.raster())?;
    let tracked = joined.pairs.iter().map(|p| p.antenna_id).collect();
    let scan = pl::scan_traffic(&data, &cfg, Some(tracked))?;
    let a = pl::align_stage(&joined, &model, &scan, &cfg)?;
    for r in &a.peaks {
        let fmt = |d| r.ratio(d).map_or("-".to_owned(), |x| format!("{x:.4}"));
        eprintln!("align: {} ratio(-1)={} ratio(+1)={} inversion={}", r.class, fmt(-1), fmt(1), r.inversion);
    }
    out.alignment(&a, &cfg)?;
    Ok(())
}

fn visitors(c: &Common) -> Outcome {
    let (cfg, data, out) = setup(c)?;
    let antennas = pl::load_antennas(&data)?;
    let fires = pl::load_fires(&data, &cfg)?;
    let raster = pl::load_raster(&data)?;
    let joined = pl::join_stage(&antennas, &fires, &cfg)?;
    let (_, model) = pl::classify_stage(&antennas, &joined, &raster, &cfg, &data.raster())?;
    let (idx, _) = pl::scan_visits(&data, &cfg, &joined)?;
    let (epochs, summary) = pl::visitors_stage(&idx, &joined, &model)?;
    if let Some(z) = &summary.zero_visitors {
        eprintln!(
            "visitors: epochs={} zero_fraction_epochs={:.4} zero_fraction_antennas={:.4}",
            z.n_epochs, z.epoch_fraction, z.antenna_fraction
        );
    }
    out.visitors(&epochs, &summary)?;
    Ok(())
}

fn daily(c: &Common) -> Outcome {
    let (cfg, data, out) = setup(c)?;
    let scan = pl::scan_traffic(&data, &cfg, Some(HashSet::new()))?;
    let r = pl::daily_stage(&scan, &cfg);
    eprintln!("daily: days={} anomalies={} months={}", r.totals.len(), r.anomalies.len(), r.trends.len());
    out.daily(&r)?;
    Ok(())
}

fn export(c: &Common) -> Outcome {
    let (cfg, data, out) = setup(c)?;
    let o = pl::analyze(&data, &cfg)?;
    eprintln!(
        "export: antennas={} epochs={} points={} downsampled={}",
        o.scene.antennas.len(),
        o.scene.epochs.len(),
        o.scene.downsampling.kept_points,
        o.scene.downsampling.applied
    );
    out.scene(&o.scene)?;
    Ok(())
}

fn pipeline(config: Option<&Path>, data: Option<PathBuf>, out: &Path) -> Outcome {
    let cfg = load_config(config)?;
    let out_dir = OutDir::create(out)?;
    let data = match data {
        Some(d) => d,
        None => {
            let d = out.join("data");
            let m = synthgen::generate(&cfg.synth_config(), &d)?;
            eprintln!("synth: antennas={} epochs={} fires={}", m.n_antennas, m.epochs.len(), m.fires.total);
            d
        }
    };
    let o = pl::analyze(&DataDir::new(&data), &cfg)?;
    eprintln!(
        "pipeline: pairs={} epochs={} excluded={} anomalies={}",
        o.joined.summary.n_pairs,
        o.epochs.len(),
        o.alignment.report.excluded.len(),
        o.daily.anomalies.len()
    );
    o.write_all(&out_dir, &cfg)?;
    Ok(())
}
