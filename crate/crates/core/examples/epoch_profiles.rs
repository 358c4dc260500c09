//! Fire-aligned, normalized call profiles per site class and the
//! morning/evening peak ratio of each day around the fire.
//!
//! cargo run --example epoch_profiles -- [DATA_DIR]

mod common;

use std::collections::HashSet;

use firecdr::ingest::AntennaId;
use firecdr::pipeline::{align_stage, classify_stage, join_stage, load_antennas, load_fires, load_raster, scan_traffic};

fn bar(v: Option<f64>) -> String {
    match v {
        Some(v) => "#".repeat((v * 40.0).round() as usize),
        None => "(missing)".into(),
    }
}

fn main() -> anyhow::Result<()> {
    let (data, cfg) = common::data_dir()?;
    let antennas = load_antennas(&data)?;
    let fires = load_fires(&data, &cfg)?;
    let raster = load_raster(&data)?;
    let joined = join_stage(&antennas, &fires, &cfg)?;
    let (_, model) = classify_stage(&antennas, &joined, &raster, &cfg, &data.raster())?;
    let tracked: HashSet<AntennaId> = joined.pairs.iter().map(|p| p.antenna_id).collect();
    let scan = scan_traffic(&data, &cfg, Some(tracked))?;
    let a = align_stage(&joined, &model, &scan, &cfg)?;

    println!("{} missing hours in the traffic file", scan.timeline.missing_hours());
    for (profile, peaks) in a.profiles_with_peaks() {
        println!(
            "\n{}  epochs {}  excluded {}  inversion {}",
            profile.class, profile.epochs, profile.excluded, peaks.inversion
        );
        for d in &peaks.days {
            let f = |x: Option<f64>| x.map_or("-".to_owned(), |x| format!("{x:.4}"));
            println!(
                "  day {:+}  morning {}  evening {}  ratio {}",
                d.day,
                f(d.morning),
                f(d.evening),
                f(d.ratio)
            );
        }
    }

    let rural = a.report.profile(firecdr::lightclass::SiteClass::Rural);
    if !rural.is_empty() {
        println!("\nRURAL, day after the fire (hour: mean normalized calls)");
        for h in 0..24 {
            println!("  {h:02}h {:<40} n={}", bar(rural.at(1, h)), rural.n_at(1, h));
        }
    }
    Ok(())
}
