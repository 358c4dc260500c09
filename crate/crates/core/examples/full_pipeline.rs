//! All stages from one config, outputs written with their fixed names.
//!
//! cargo run --example full_pipeline -- [CONFIG.toml] [OUT_DIR]
//!
//! Without a config the defaults apply; the scenario is synthesized into
//! OUT_DIR/data first.

use std::path::PathBuf;
use std::time::Instant;

use firecdr::config::Config;
use firecdr::pipeline::{analyze, DataDir, OutDir};
use firecdr::synthgen::generate;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match args.first() {
        Some(p) if p.ends_with(".toml") => Config::load(p.as_ref())?,
        _ => Config::default(),
    };
    let out = PathBuf::from(args.iter().find(|a| !a.ends_with(".toml")).cloned().unwrap_or_else(|| "pipeline-out".into()));

    let start = Instant::now();
    let data = out.join("data");
    let m = generate(&cfg.synth_config(), &data)?;
    println!("synth   {:>6.2}s  {} antennas, {} fires", start.elapsed().as_secs_f64(), m.n_antennas, m.fires.total);

    let t = Instant::now();
    let o = analyze(&DataDir::new(&data), &cfg)?;
    println!("analyze {:>6.2}s", t.elapsed().as_secs_f64());
    let dir = OutDir::create(&out)?;
    o.write_all(&dir, &cfg)?;

    println!("pairs {}  sites {}", o.joined.summary.n_pairs, o.luminosity.sites.len());
    for r in &o.alignment.peaks {
        println!("{:<10} ratio(+1) {:?}  inversion {}", r.class, r.ratio(1), r.inversion);
    }
    if let Some(z) = &o.visitor_summary.zero_visitors {
        println!("zero-visitor epochs {:.4}", z.epoch_fraction);
    }
    println!("spikes {:?}  dips {:?}", o.daily.spikes().collect::<Vec<_>>(), o.daily.dips().collect::<Vec<_>>());
    println!("wrote {} in {:.2}s", out.display(), start.elapsed().as_secs_f64());
    Ok(())
}
