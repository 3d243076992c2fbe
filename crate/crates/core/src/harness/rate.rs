//! Horizon sweep behind `wcxopt rate`: runs each (T, seed), aggregates the
//! mean stationarity at the output iterate per horizon, and fits the
//! log-log slope against the acceptance window.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use super::run::run_all_seeds;
use crate::analysis::{rate_fit, RateFit};
use crate::error::{Error, Result};
use crate::optimizers::FaultInjection;

/// Slope window accepted for the squared stationarity measure; the
/// idealized decay is t^{-1/2} with log-factor contamination toward the
/// shallow end.
pub const SLOPE_WINDOW: (f64, f64) = (-1.0, -0.3);

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub horizon: usize,
    pub mean_moreau_grad_sq: f64,
    pub seeds_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub rows: Vec<RateRow>,
    pub fit: RateFit,
    pub slope_window: (f64, f64),
    pub pass: bool,
    pub synthetic: bool,
}

fn validate_horizons(horizons: &[usize]) -> Result<()> {
    if horizons.len() < 4 {
        return Err(Error::invalid("rate sweep needs at least 4 horizons"));
    }
    let mut sorted = horizons.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != horizons.len() {
        return Err(Error::invalid("horizons must be distinct"));
    }
    Ok(())
}

/// Plumbing self-test: bypasses the optimizer and feeds the exact curve
/// y = c T^{-1/2} through the same aggregation and fitting path.
pub fn synthetic_sweep(horizons: &[usize]) -> Result<RateSummary> {
    validate_horizons(horizons)?;
    let rows: Vec<RateRow> = horizons
        .iter()
        .map(|&t| RateRow {
            horizon: t,
            mean_moreau_grad_sq: 3.0 / (t as f64).sqrt(),
            seeds_used: 1,
        })
        .collect();
    summarize(rows, true)
}

/// Real sweep: each horizon reruns every seed of `base` to completion and
/// contributes the seed-mean of moreau_grad_sq at x_{t*}.
pub fn sweep(base: &RunConfig, horizons: &[usize], workers: Option<usize>) -> Result<RateSummary> {
    validate_horizons(horizons)?;
    let mut rows = Vec::with_capacity(horizons.len());
    for &t in horizons {
        let mut cfg = base.clone();
        cfg.horizon = t;
        cfg.checkpoints = vec![1]; // reports only at t=1 and t*
        let outputs = run_all_seeds(&cfg, workers, true, FaultInjection::None)?;
        let vals: Vec<f64> = outputs
            .iter()
            .filter_map(|(_, o)| o.star_report.as_ref().map(|r| r.moreau_grad_sq))
            .collect();
        if vals.is_empty() {
            return Err(Error::invalid(format!("no valid seed at horizon {t}")));
        }
        rows.push(RateRow {
            horizon: t,
            mean_moreau_grad_sq: vals.iter().sum::<f64>() / vals.len() as f64,
            seeds_used: vals.len(),
        });
    }
    summarize(rows, false)
}

fn summarize(mut rows: Vec<RateRow>, synthetic: bool) -> Result<RateSummary> {
    rows.sort_by_key(|r| r.horizon);
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.horizon as f64, r.mean_moreau_grad_sq))
        .collect();
    let fit = rate_fit(&points, 4)?;
    let pass = fit.slope >= SLOPE_WINDOW.0 && fit.slope <= SLOPE_WINDOW.1;
    Ok(RateSummary {
        rows,
        fit,
        slope_window: SLOPE_WINDOW,
        pass,
        synthetic,
    })
}

/// Writes `rate.csv` and `rate_summary.json` under `out_dir`.
pub fn write_artifacts(summary: &RateSummary, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut csv = String::from("T,mean_moreau_grad_sq,seeds_used\n");
    for r in &summary.rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            r.horizon, r.mean_moreau_grad_sq, r.seeds_used
        ));
    }
    fs::write(out_dir.join("rate.csv"), csv)?;
    fs::write(
        out_dir.join("rate_summary.json"),
        format!("{}\n", serde_json::to_string_pretty(summary)?),
    )?;
    Ok(())
}
