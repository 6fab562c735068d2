use serde::{Deserialize, Serialize};

use super::{quantile_sorted, std_dev, StatsError};

pub const BANDWIDTH_FLOOR: f64 = 1e-3;
const WINDOW: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Auto,
    Value(f64),
}

/// Silverman's rule of thumb, `0.9 · min(sd, IQR/1.34) · n^{-1/5}`, floored.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let sd = std_dev(&s);
    let iqr = (quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => 0.0,
    };
    (0.9 * spread * (s.len() as f64).powf(-0.2)).max(BANDWIDTH_FLOOR)
}

/// Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    sorted: Vec<f64>,
    pub bandwidth: f64,
}

impl Kde {
    pub fn new(samples: &[f64], bandwidth: Bandwidth) -> Result<Self, StatsError> {
        super::require("kde", 2, samples.len())?;
        super::require_finite(samples)?;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let bandwidth = match bandwidth {
            Bandwidth::Auto => silverman_bandwidth(&sorted),
            Bandwidth::Value(h) if h > 0.0 && h.is_finite() => h,
            Bandwidth::Value(h) => return Err(StatsError::Degenerate(format!("bandwidth {h} must be positive"))),
        };
        Ok(Kde { sorted, bandwidth })
    }

    /// Density at `x`; kernels further than 9 bandwidths away are skipped.
    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.sorted.partition_point(|&s| s < x - WINDOW * h);
        let hi = self.sorted.partition_point(|&s| s <= x + WINDOW * h);
        let norm = 1.0 / (self.sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        self.sorted[lo..hi]
            .iter()
            .map(|&s| {
                let z = (x - s) / h;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            * norm
    }

    pub fn evaluate(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&x| self.density(x)).collect()
    }
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
