//! Generate the default synthetic scenario and print what was planted.
//!
//! cargo run --example synth -- [OUT_DIR] [SEED]

use std::path::PathBuf;

use firecdr::synthgen::{generate, SynthConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synth-data".into()));
    let mut cfg = SynthConfig::default();
    if let Some(seed) = args.next() {
        cfg.seed = seed.parse()?;
    }
    let m = generate(&cfg, &out)?;
    println!("wrote {}", out.display());
    println!("antennas {}  fire sites {}  epochs {}", m.n_antennas, m.sites.len(), m.epochs.len());
    for (class, n) in &m.class_sizes {
        println!("  {class:<10} {n}");
    }
    println!(
        "fires {} (planted {}, background {})  multiplicity {:?}",
        m.fires.total, m.fires.planted, m.fires.background, m.fires.multiplicity
    );
    println!("missing hours {}", m.missing_hours.len());
    println!(
        "zero-visitor epochs {} ({:.4})  inversion ratio {}",
        m.zero_visitor_epochs, m.zero_visitor_fraction, m.inversion_ratio
    );
    Ok(())
}
