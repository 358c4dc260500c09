//! Run every stage, write scene.json, and optionally serve it.
//!
//! cargo run --example export_scene -- [DATA_DIR] [OUT_DIR] [--serve ADDR]

mod common;

use std::path::PathBuf;

use firecdr::exporter::serve;
use firecdr::pipeline::{analyze, OutDir, SCENE_FILE};

fn main() -> anyhow::Result<()> {
    let (data, cfg) = common::data_dir()?;
    let args: Vec<String> = std::env::args().collect();
    let out = PathBuf::from(args.get(2).filter(|a| !a.starts_with("--")).cloned().unwrap_or_else(|| "scene-out".into()));
    let addr = args.iter().position(|a| a == "--serve").and_then(|i| args.get(i + 1)).cloned();

    let outputs = analyze(&data, &cfg)?;
    let dir = OutDir::create(&out)?;
    dir.scene(&outputs.scene)?;
    let s = &outputs.scene;
    println!(
        "{}: {} antennas, {} fires, {} profiles, {} epochs, {} trajectory points (stride {})",
        dir.path(SCENE_FILE).display(),
        s.antennas.len(),
        s.fires.len(),
        s.profiles.len(),
        s.epochs.len(),
        s.downsampling.kept_points,
        s.downsampling.stride
    );
    if let Some(e) = s.epochs.iter().find(|e| !e.trajectories.is_empty()) {
        println!("try GET /scene/epochs/{}/{}", e.antenna_id, e.fire_date);
    }
    if let Some(addr) = addr {
        serve(&dir.path(SCENE_FILE), &addr)?;
    }
    Ok(())
}
