use std::collections::HashSet;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::ingest::{AntennaId, Timeline, TrafficRecord};
use crate::time::Window;

/// Antennas whose traffic is summed into the daily totals.
#[derive(Debug, Clone, Default)]
pub enum AntennaSet {
    #[default]
    All,
    Only(HashSet<AntennaId>),
}

impl AntennaSet {
    pub fn contains(&self, id: AntennaId) -> bool {
        match self {
            AntennaSet::All => true,
            AntennaSet::Only(s) => s.contains(&id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyTotal {
    pub date: NaiveDate,
    pub calls: u64,
    pub missing_hours: u32,
}

impl DailyTotal {
    pub fn is_complete(&self) -> bool {
        self.missing_hours == 0
    }
}

/// Streaming per-day call totals. A record counts once if either endpoint is
/// in the set.
#[derive(Debug, Clone)]
pub struct DailyAccumulator {
    window: Window,
    set: AntennaSet,
    calls: Vec<u64>,
}

impl DailyAccumulator {
    pub fn new(window: Window, set: AntennaSet) -> Self {
        Self {
            calls: vec![0; window.days()],
            window,
            set,
        }
    }

    pub fn push(&mut self, rec: &TrafficRecord) {
        if !(self.set.contains(rec.origin) || self.set.contains(rec.dest)) {
            return;
        }
        if let Some(i) = self.window.day_index(rec.hour.date()) {
            self.calls[i] += rec.n_calls as u64;
        }
    }

    pub fn finish(self, timeline: &Timeline) -> Vec<DailyTotal> {
        let mut missing = vec![0u32; self.window.days()];
        for h in timeline.missing() {
            if let Some(i) = self.window.day_index(h.date()) {
                missing[i] += 1;
            }
        }
        self.calls
            .iter()
            .zip(missing)
            .enumerate()
            .map(|(i, (c, m))| DailyTotal {
                date: self.window.day_at(i),
                calls: *c,
                missing_hours: m,
            })
            .collect()
    }
}

pub fn daily_totals<'a>(
    records: impl IntoIterator<Item = &'a TrafficRecord>,
    timeline: &Timeline,
    set: AntennaSet,
) -> Vec<DailyTotal> {
    let mut acc = DailyAccumulator::new(*timeline.window(), set);
    for r in records {
        acc.push(r);
    }
    acc.finish(timeline)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    Spike,
    Dip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalyThresholds {
    /// Neighbors considered on each side, same month only.
    pub half_width: u32,
    pub spike_ratio: f64,
    pub dip_ratio: f64,
}

impl Default for AnomalyThresholds {
    fn default() -> Self {
        Self {
            half_width: 3,
            spike_ratio: 1.25,
            dip_ratio: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayAnomaly {
    pub date: NaiveDate,
    pub kind: AnomalyKind,
    pub calls: u64,
    pub baseline: f64,
    pub ratio: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Flags complete days whose total departs from the median of complete
/// same-month neighbors. Days with fewer than two such neighbors are not
/// judged. A second pass drops neighbors flagged by the first, so a run of
/// holidays does not drag down the baseline of the day next to it.
pub fn detect_anomalies(totals: &[DailyTotal], th: &AnomalyThresholds) -> Vec<DayAnomaly> {
    let first: HashSet<usize> = (0..totals.len())
        .filter(|&i| judge(totals, i, th, &HashSet::new()).is_some())
        .collect();
    (0..totals.len()).filter_map(|i| judge(totals, i, th, &first)).collect()
}

/// Neighbors in `skip` are left out of the baseline unless fewer than two
/// would remain.
fn judge(totals: &[DailyTotal], i: usize, th: &AnomalyThresholds, skip: &HashSet<usize>) -> Option<DayAnomaly> {
    let day = &totals[i];
    if !day.is_complete() {
        return None;
    }
    let lo = i.saturating_sub(th.half_width as usize);
    let hi = (i + th.half_width as usize).min(totals.len() - 1);
    let usable: Vec<usize> = (lo..=hi)
        .filter(|&j| j != i)
        .filter(|&j| {
            let t = &totals[j];
            t.is_complete() && t.date.month() == day.date.month() && t.date.year() == day.date.year()
        })
        .collect();
    let clean: Vec<usize> = usable.iter().copied().filter(|j| !skip.contains(j)).collect();
    let chosen = if clean.len() >= 2 { clean } else { usable };
    if chosen.len() < 2 {
        return None;
    }
    let mut neighbors: Vec<f64> = chosen.iter().map(|&j| totals[j].calls as f64).collect();
    let baseline = median(&mut neighbors);
    if baseline <= 0.0 {
        return None;
    }
    let ratio = day.calls as f64 / baseline;
    let kind = if ratio >= th.spike_ratio {
        AnomalyKind::Spike
    } else if ratio <= th.dip_ratio {
        AnomalyKind::Dip
    } else {
        return None;
    };
    Some(DayAnomaly {
        date: day.date,
        kind,
        calls: day.calls,
        baseline,
        ratio,
    })
}

/// Least-squares line through a month's clean days, `calls = a + b * (day - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthTrend {
    pub year: i32,
    pub month: u32,
    pub n_days: usize,
    pub intercept: Option<f64>,
    pub slope: Option<f64>,
    /// `b / a`: fractional change per day relative to the start of the month.
    pub relative_slope: Option<f64>,
}

/// Clean days are complete and not flagged as anomalies. Months with fewer
/// than three clean days get no fit.
pub fn monthly_trends(totals: &[DailyTotal], anomalies: &[DayAnomaly]) -> Vec<MonthTrend> {
    let flagged: HashSet<NaiveDate> = anomalies.iter().map(|a| a.date).collect();
    let mut months: Vec<(i32, u32)> = totals.iter().map(|t| (t.date.year(), t.date.month())).collect();
    months.dedup();
    months
        .into_iter()
        .map(|(year, month)| {
            let pts: Vec<(f64, f64)> = totals
                .iter()
                .filter(|t| t.date.year() == year && t.date.month() == month)
                .filter(|t| t.is_complete() && !flagged.contains(&t.date))
                .map(|t| ((t.date.day() - 1) as f64, t.calls as f64))
                .collect();
            let n = pts.len();
            let fit = (n >= 3).then(|| ols(&pts)).flatten();
            MonthTrend {
                year,
                month,
                n_days: n,
                intercept: fit.map(|f| f.0),
                slope: fit.map(|f| f.1),
                relative_slope: fit.and_then(|(a, b)| (a != 0.0).then(|| b / a)),
            }
        })
        .collect()
}

fn ols(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyReport {
    pub totals: Vec<DailyTotal>,
    pub anomalies: Vec<DayAnomaly>,
    pub trends: Vec<MonthTrend>,
}

impl DailyReport {
    pub fn build(totals: Vec<DailyTotal>, th: &AnomalyThresholds) -> Self {
        let anomalies = detect_anomalies(&totals, th);
        let trends = monthly_trends(&totals, &anomalies);
        Self {
            totals,
            anomalies,
            trends,
        }
    }

    pub fn spikes(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.anomalies.iter().filter(|a| a.kind == AnomalyKind::Spike).map(|a| a.date)
    }

    pub fn dips(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.anomalies.iter().filter(|a| a.kind == AnomalyKind::Dip).map(|a| a.date)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::HourStamp;

    fn date(m: u32, d: u32) -> NaiveDate {
        let y = if m == 12 { 2011 } else { 2012 };
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn synthetic(f: impl Fn(NaiveDate) -> u64) -> Vec<DailyTotal> {
        Window::default()
            .dates()
            .map(|d| DailyTotal { date: d, calls: f(d), missing_hours: 0 })
            .collect()
    }

    fn trend(d: NaiveDate) -> u64 {
        (10_000.0 * (1.0 - 0.02 * (d.day() - 1) as f64)).round() as u64
    }

    #[test]
    fn either_endpoint_counts_once() {
        let w = Window::default();
        let mut tl = Timeline::empty(w);
        let h = HourStamp::from_date_hour(w.first_day, 3);
        tl.mark(h);
        let recs = [
            TrafficRecord { hour: h, origin: 1, dest: 2, n_calls: 5, duration: 0.0 },
            TrafficRecord { hour: h, origin: 3, dest: 1, n_calls: 7, duration: 0.0 },
            TrafficRecord { hour: h, origin: 1, dest: 1, n_calls: 11, duration: 0.0 },
            TrafficRecord { hour: h, origin: 8, dest: 9, n_calls: 100, duration: 0.0 },
        ];
        let only = AntennaSet::Only([1].into_iter().collect());
        let t = daily_totals(&recs, &tl, only);
        assert_eq!(t[0].calls, 23);
        assert_eq!(t[0].missing_hours, 23);
        assert_eq!(t.len(), 150);
        assert_eq!(daily_totals(&recs, &tl, AntennaSet::All)[0].calls, 123);
    }

    #[test]
    fn linear_decline_recovered_per_month() {
        let r = DailyReport::build(synthetic(trend), &AnomalyThresholds::default());
        assert!(r.anomalies.is_empty(), "{:?}", r.anomalies);
        for t in &r.trends {
            assert!((t.relative_slope.unwrap() + 0.02).abs() < 1e-4, "{t:?}");
        }
    }

    #[test]
    fn planted_spikes_and_dips_found() {
        let spikes = [date(1, 1), date(3, 1)];
        let dips = [date(12, 24), date(12, 25), date(12, 26)];
        let totals = synthetic(|d| {
            let base = trend(d) as f64;
            let f = if spikes.contains(&d) {
                1.6
            } else if dips.contains(&d) {
                0.7
            } else {
                1.0
            };
            (base * f).round() as u64
        });
        let r = DailyReport::build(totals, &AnomalyThresholds::default());
        assert_eq!(r.spikes().collect::<Vec<_>>(), spikes);
        assert_eq!(r.dips().collect::<Vec<_>>(), dips);
        for t in &r.trends {
            assert!((t.relative_slope.unwrap() + 0.02).abs() < 1e-3, "{t:?}");
        }
    }

    #[test]
    fn incomplete_days_are_not_judged() {
        let mut totals = synthetic(trend);
        totals[40].calls /= 2;
        totals[40].missing_hours = 12;
        let r = DailyReport::build(totals, &AnomalyThresholds::default());
        assert!(r.anomalies.is_empty());
    }

    #[test]
    fn short_month_has_no_fit() {
        let totals: Vec<_> = (1..=2).map(|d| DailyTotal { date: date(1, d), calls: 5, missing_hours: 0 }).collect();
        let t = monthly_trends(&totals, &[]);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].slope, None);
        assert_eq!(t[0].relative_slope, None);
    }
}
