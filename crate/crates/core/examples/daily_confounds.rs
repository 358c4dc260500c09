//! Daily call totals: holiday spikes and dips, and the within-month drift.
//!
//! cargo run --example daily_confounds -- [DATA_DIR]

mod common;

use std::collections::HashSet;

use firecdr::pipeline::{daily_stage, scan_traffic};

fn main() -> anyhow::Result<()> {
    let (data, cfg) = common::data_dir()?;
    let scan = scan_traffic(&data, &cfg, Some(HashSet::new()))?;
    let report = daily_stage(&scan, &cfg);

    let incomplete = report.totals.iter().filter(|t| !t.is_complete()).count();
    println!("{} days, {incomplete} with missing hours", report.totals.len());
    println!("anomalies (baseline = median of same-month neighbors):");
    for a in &report.anomalies {
        println!("  {}  {:?}  {} calls vs {:.0}  ratio {:.3}", a.date, a.kind, a.calls, a.baseline, a.ratio);
    }
    println!("monthly trend, calls = a + b * (day - 1):");
    for t in &report.trends {
        match (t.intercept, t.slope, t.relative_slope) {
            (Some(a), Some(b), Some(r)) => {
                println!("  {}-{:02}  n={:>2}  a={a:.0}  b={b:.0}  b/a={r:+.4}", t.year, t.month, t.n_days)
            }
            _ => println!("  {}-{:02}  n={:>2}  too few clean days", t.year, t.month, t.n_days),
        }
    }
    Ok(())
}
