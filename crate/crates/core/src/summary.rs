//! Plot-ready distribution summaries (box/violin data).

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::records::ScoreScale;
use crate::stats::{dispersion, Estimator, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    /// `None` for a singleton under the sample estimator.
    pub variance: Option<f64>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub histogram: Histogram,
}

/// Quantile of sorted data by linear interpolation between closest ranks:
/// `h = (n − 1)·p`, `x[⌊h⌋] + (h − ⌊h⌋)·(x[⌊h⌋+1] − x[⌊h⌋])`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One bin per integer score when a scale is given, otherwise ten equal
/// bins across the observed range. Values outside the scale are clamped
/// into the end bins so counts always sum to `n`.
fn histogram(sorted: &[f64], scale: Option<ScoreScale>) -> Histogram {
    let (lo, width, bins) = match scale {
        Some(s) => (f64::from(s.min) - 0.5, 1.0, (s.max - s.min + 1) as usize),
        None => {
            let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
            if max > min {
                (min, (max - min) / 10.0, 10)
            } else {
                (min - 0.5, 1.0, 1)
            }
        }
    };
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = alloc::vec![0usize; bins];
    for &x in sorted {
        let idx = libm::floor((x - lo) / width);
        let idx = if idx < 0.0 { 0 } else { (idx as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}

pub fn summarize_distribution(
    values: &[f64],
    scale: Option<ScoreScale>,
    estimator: Estimator,
) -> Result<DistributionSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let variance = match dispersion(values, estimator) {
        Ok(d) => Some(d.variance),
        Err(StatsError::Singleton) => None,
        Err(e) => return Err(e),
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok(DistributionSummary {
        n: values.len(),
        mean: sorted.iter().sum::<f64>() / values.len() as f64,
        variance,
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        histogram: histogram(&sorted, scale),
    })
}
