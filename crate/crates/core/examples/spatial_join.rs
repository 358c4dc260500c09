//! Pair fires with nearby antennas at a few thresholds.
//!
//! cargo run --example spatial_join -- [DATA_DIR]

mod common;

use std::time::Instant;

use firecdr::fusion::join;
use firecdr::pipeline::{load_antennas, load_fires};

fn main() -> anyhow::Result<()> {
    let (data, cfg) = common::data_dir()?;
    let antennas = load_antennas(&data)?;
    let fires = load_fires(&data, &cfg)?;
    println!("{} antennas, {} fires ({} rows skipped)", antennas.len(), fires.fires.len(), fires.counts.skipped);

    for t in [0.5, 1.0, 2.0] {
        let start = Instant::now();
        let r = join(&fires.fires, &antennas, t);
        let s = &r.summary;
        println!(
            "{t:>4} km  pairs {:>5}  antennas {:>4}  fires {:>5}  {:.1} ms  per-antenna histogram {:?}",
            s.n_pairs,
            s.n_antennas_with_fire,
            s.n_fires,
            start.elapsed().as_secs_f64() * 1e3,
            s.histogram
        );
    }

    let r = join(&fires.fires, &antennas, cfg.analysis.join_threshold_km);
    println!("closest pairs at the default {} km:", cfg.analysis.join_threshold_km);
    let mut pairs = r.pairs.clone();
    pairs.sort_by(|a, b| a.distance_km.total_cmp(&b.distance_km));
    for p in pairs.iter().take(5) {
        println!("  antenna {:>5}  {}  {:.3} km", p.antenna_id, p.fire.date, p.distance_km);
    }
    Ok(())
}
