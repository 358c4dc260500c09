//! Superposed-epoch analysis of hourly call activity around fires.
//!
//! Per-antenna hourly series are cut into five-day windows centered on each
//! fire day, normalized by the window maximum, re-indexed so that noon of the
//! fire day is offset 0, and averaged per site class. Missing hours stay
//! masked throughout; they never become zeros.

mod align;
mod daily;
mod series;

pub use align::{
    align_and_average, normalize_window, peak_ratios, AlignedProfile, AlignmentReport, EpochExclusion, ExcludedEpoch,
    NormalizedEpoch, PeakRatio, PeakReport, PeakWindows, EPOCH_DAYS, EPOCH_HOURS, FIRST_OFFSET,
};
pub use daily::{
    daily_totals, detect_anomalies, monthly_trends, AnomalyKind, AnomalyThresholds, AntennaSet, DailyAccumulator,
    DailyReport, DailyTotal, DayAnomaly, MonthTrend,
};
pub use series::{build_series, CallTable, Direction, HourlySeries};

use thiserror::Error;

use crate::ingest::AntennaId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpochError {
    #[error("antenna {0} has no cluster label")]
    Unlabeled(AntennaId),
    #[error("invalid peak window {0:?}")]
    PeakWindow((u32, u32)),
}
