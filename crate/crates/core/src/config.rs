//! TOML run configuration shared by every command.
//!
//! ```toml
//! seed = 1
//!
//! [window]
//! first_day = "2011-12-01"
//! last_day = "2012-04-28"
//!
//! [bbox]
//! lat_min = 4.3
//! lat_max = 10.8
//! lon_min = -8.7
//! lon_max = -2.4
//!
//! [synth]          # generator parameters, see `SynthParams`
//! n_antennas = 1231
//!
//! [analysis]       # see `AnalysisConfig`
//! join_threshold_km = 1.0
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epoch::{AnomalyThresholds, Direction, PeakWindows};
use crate::exporter::DEFAULT_POINT_BUDGET;
use crate::fusion::DEFAULT_THRESHOLD_KM;
use crate::geo::BoundingBox;
use crate::ingest::{ParseMode, DEFAULT_PERIOD_DAYS};
use crate::lightclass::{DEFAULT_K, DEFAULT_RADIUS_KM};
use crate::synthgen::{SynthConfig, SynthParams, DEFAULT_BBOX};
use crate::time::Window;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub parse_mode: ParseMode,
    pub join_threshold_km: f64,
    pub light_radius_km: f64,
    pub k: usize,
    pub direction: Direction,
    pub peak_windows: PeakWindows,
    pub anomaly: AnomalyThresholds,
    pub period_days: u32,
    pub point_budget: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            parse_mode: ParseMode::Lenient,
            join_threshold_km: DEFAULT_THRESHOLD_KM,
            light_radius_km: DEFAULT_RADIUS_KM,
            k: DEFAULT_K,
            direction: Direction::Both,
            peak_windows: PeakWindows::default(),
            anomaly: AnomalyThresholds::default(),
            period_days: DEFAULT_PERIOD_DAYS,
            point_budget: DEFAULT_POINT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub window: Window,
    pub bbox: BoundingBox,
    pub synth: SynthParams,
    pub analysis: AnalysisConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            window: Window::default(),
            bbox: DEFAULT_BBOX,
            synth: SynthParams::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.message().to_owned(),
        })?;
        cfg.check(path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: shown.clone(),
            source,
        })?;
        Self::from_toml(&text, &shown)
    }

    fn check(&self, path: &str) -> Result<(), ConfigError> {
        let invalid = |message: String| ConfigError::Invalid {
            path: path.to_owned(),
            message,
        };
        let a = &self.analysis;
        if self.window.last_day < self.window.first_day {
            return Err(invalid("window.last_day precedes window.first_day".into()));
        }
        if !(a.join_threshold_km > 0.0 && a.light_radius_km > 0.0) {
            return Err(invalid("join_threshold_km and light_radius_km must be positive".into()));
        }
        if a.k == 0 || a.period_days == 0 {
            return Err(invalid("k and period_days must be positive".into()));
        }
        a.peak_windows.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.seed,
            window: self.window,
            bbox: self.bbox,
            params: self.synth.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::from_toml("", "c.toml").unwrap(), Config::default());
    }

    #[test]
    fn nested_overrides() {
        let c = Config::from_toml(
            "seed = 9\n[window]\nfirst_day = \"2012-01-01\"\nlast_day = \"2012-01-31\"\n[analysis]\ndirection = \"originating\"\n[analysis.peak_windows]\nmorning = [5, 11]\nevening = [17, 21]\n",
            "c.toml",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.window.days(), 31);
        assert_eq!(c.analysis.direction, Direction::Originating);
        assert_eq!(c.analysis.peak_windows.morning, (5, 11));
        assert_eq!(c.synth_config().seed, 9);
    }

    #[test]
    fn errors_name_the_file() {
        let e = Config::from_toml("nope = 1", "run.toml").unwrap_err();
        assert!(e.to_string().starts_with("run.toml"), "{e}");
        let e = Config::from_toml("[analysis.peak_windows]\nmorning = [12, 6]\nevening = [16, 22]", "run.toml").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid { .. }));
    }
}
