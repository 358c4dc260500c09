//! Who logged at a fire antenna on the fire day, per site class.
//!
//! cargo run --example fire_visitors -- [DATA_DIR]

mod common;

use firecdr::pipeline::{classify_stage, join_stage, load_antennas, load_fires, load_raster, scan_visits, visitors_stage};

fn main() -> anyhow::Result<()> {
    let (data, cfg) = common::data_dir()?;
    let antennas = load_antennas(&data)?;
    let fires = load_fires(&data, &cfg)?;
    let raster = load_raster(&data)?;
    let joined = join_stage(&antennas, &fires, &cfg)?;
    let (_, model) = classify_stage(&antennas, &joined, &raster, &cfg, &data.raster())?;
    let (index, counts) = scan_visits(&data, &cfg, &joined)?;
    let (epochs, summary) = visitors_stage(&index, &joined, &model)?;

    println!("{} trajectory rows scanned, {} epochs", counts.rows, epochs.len());
    if let Some(z) = &summary.zero_visitors {
        println!(
            "no visitors: {}/{} epochs ({:.4}), {}/{} antennas ({:.4})",
            z.n_empty_epochs, z.n_epochs, z.epoch_fraction, z.n_empty_antennas, z.n_antennas, z.antenna_fraction
        );
    }
    for (class, v) in &summary.by_class {
        println!("{:<10} epochs {:>3}  visitors {:>5}  mean {:.2}", class.as_str(), v.epochs, v.total_visitors, v.mean_visitors);
    }
    if let Some(busiest) = epochs.iter().max_by_key(|e| e.n_visitors()) {
        println!(
            "busiest: antenna {} on {} with {} visitors, first ping {}",
            busiest.pair.antenna_id,
            busiest.pair.fire.date,
            busiest.n_visitors(),
            busiest.points.first().map(|p| p.timestamp.to_string()).unwrap_or_default()
        );
    }
    Ok(())
}
