//! Per-trial records, box-plot summaries and their CSV encoding.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::EstimatorTag;
use crate::error::{Error, Result};

/// Metrics of one estimator on one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    /// Rho index for double-block runs, beta column (or pair) index otherwise.
    pub block: usize,
    /// Target pointwise correlation (double block), realized correlation of
    /// the beta pair (historical double), empty for single-block runs.
    pub rho: Option<f64>,
    pub estimator: EstimatorTag,
    /// `‖h − b‖`.
    pub l2_error: f64,
    /// `p 𝒯²`.
    pub tracking_p: f64,
    /// `p ℰ²`.
    pub opt_bias_p: f64,
    /// `V²/V̂²`.
    pub forecast_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L2Error,
    TrackingP,
    OptBiasP,
    ForecastRatio,
    /// Per-block mean of `‖h − b‖²`.
    L2ErrorSq,
}

/// Min, quartiles, max and mean of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// One box of a box-and-whisker plot: an estimator's distribution of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub estimator: EstimatorTag,
    pub rho: Option<f64>,
    pub metric: Metric,
    /// Number of values summarized.
    pub count: usize,
    /// Trials dropped because the estimator was degenerate.
    pub degenerate: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxSummary {
    pub fn new(
        estimator: EstimatorTag,
        rho: Option<f64>,
        metric: Metric,
        values: &[f64],
        degenerate: usize,
    ) -> Result<Self> {
        let s = summarize(values)?;
        Ok(Self {
            estimator,
            rho,
            metric,
            count: values.len(),
            degenerate,
            min: s.min,
            q1: s.q1,
            median: s.median,
            q3: s.q3,
            max: s.max,
            mean: s.mean,
        })
    }
}

/// Monte Carlo expectations of one estimator for one beta vector (or pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRecord {
    pub block: usize,
    pub rho: Option<f64>,
    pub estimator: EstimatorTag,
    pub count: usize,
    pub degenerate: usize,
    /// Mean of `‖h − b‖²`.
    pub l2_error_sq: f64,
    pub tracking_p: f64,
    pub opt_bias_p: f64,
    pub forecast_ratio: f64,
}

/// Box-plot statistics. Quartiles use linear interpolation between order
/// statistics at position `(n − 1)·f` (the common "type 7" rule); whiskers are
/// the sample extrema. The input order does not affect the result.
pub fn summarize(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |f: f64| {
        let pos = (sorted.len() - 1) as f64 * f;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(FiveNumber {
        min: sorted[0],
        q1: quantile(0.25),
        median: quantile(0.5),
        q3: quantile(0.75),
        max: sorted[sorted.len() - 1],
        mean,
    })
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
