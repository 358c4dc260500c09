//! Integrate night lights around fire antennas and split them into
//! RURAL / SMALL_CITY / BIG_CITY with 1-D k-means.
//!
//! cargo run --example classify_sites -- [DATA_DIR]

mod common;

use firecdr::lightclass::{kmeans_1d, SiteClass};
use firecdr::pipeline::{classify_stage, join_stage, load_antennas, load_fires, load_raster};

fn main() -> anyhow::Result<()> {
    let (data, cfg) = common::data_dir()?;
    let antennas = load_antennas(&data)?;
    let fires = load_fires(&data, &cfg)?;
    let raster = load_raster(&data)?;
    let joined = join_stage(&antennas, &fires, &cfg)?;
    let (table, model) = classify_stage(&antennas, &joined, &raster, &cfg, &data.raster())?;

    println!("{} fire antennas, light radius {} km", table.sites.len(), cfg.analysis.light_radius_km);
    for class in SiteClass::ALL {
        let members = model.members(class);
        let lum: Vec<f64> = table
            .sites
            .iter()
            .filter(|s| model.label_of(s.antenna_id) == Some(class))
            .map(|s| s.luminosity)
            .collect();
        let (lo, hi) = lum.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        println!(
            "{:<10} {:>3} sites  centroid {:>10.1}  range [{lo:.1}, {hi:.1}]",
            class.as_str(),
            members.len(),
            model.centroid_of(class).unwrap_or(f64::NAN)
        );
    }

    let values: Vec<f64> = table.sites.iter().map(|s| s.luminosity).collect();
    let fit = kmeans_1d(&values, cfg.analysis.k, cfg.seed)?;
    println!("k-means: {} iterations, converged {}", fit.iterations, fit.converged);
    for (i, w) in fit.wcss_history.iter().enumerate() {
        println!("  wcss[{i}] = {w:.3}");
    }
    Ok(())
}
