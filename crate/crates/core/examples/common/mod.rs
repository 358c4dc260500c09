use std::path::{Path, PathBuf};

use firecdr::config::Config;
use firecdr::pipeline::DataDir;
use firecdr::synthgen::{generate, Manifest, MANIFEST_FILE};

/// First CLI argument as the data directory (default `synth-data`); the
/// default scenario is generated there when it holds no manifest yet. The
/// analysis window follows the manifest.
pub fn data_dir() -> anyhow::Result<(DataDir, Config)> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth-data".into()));
    let mut cfg = Config::default();
    let manifest = Path::new(&dir).join(MANIFEST_FILE);
    if manifest.exists() {
        let m: Manifest = serde_json::from_slice(&std::fs::read(&manifest)?)?;
        cfg.window = m.window;
    } else {
        eprintln!("generating the default scenario into {}", dir.display());
        generate(&cfg.synth_config(), &dir)?;
    }
    Ok((DataDir::new(dir), cfg))
}
