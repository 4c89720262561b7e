//! Seeded percentile bootstrap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Percentile interval of `stat` over `resamples` resamples drawn with replacement.
/// Resamples where `stat` returns `None` are skipped.
pub fn percentile_ci<T: Clone>(
    items: &[T],
    mut stat: impl FnMut(&[T]) -> Option<f64>,
    resamples: usize,
    level: f64,
    rng_seed: u64,
) -> Result<Interval> {
    if items.is_empty() {
        return Err(Error::validation(
            "items",
            "bootstrap needs at least one item",
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(
            "level",
            format!("must be in (0, 1), got {level}"),
        ));
    }
    let mut rng = seed::rng(rng_seed);
    let mut buf = Vec::with_capacity(items.len());
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        buf.clear();
        for _ in 0..items.len() {
            buf.push(items[rng.random_range(0..items.len())].clone());
        }
        if let Some(v) = stat(&buf).filter(|v| v.is_finite()) {
            stats.push(v);
        }
    }
    if stats.is_empty() {
        return Err(Error::validation(
            "items",
            "statistic undefined on every resample",
        ));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval {
        low: quantile_sorted(&stats, alpha),
        high: quantile_sorted(&stats, 1.0 - alpha),
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
