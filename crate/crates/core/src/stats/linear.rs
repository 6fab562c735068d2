use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fit_student_t, StatsError, StudentTFit};

pub const WINSOR_LO: f64 = 0.001;
pub const WINSOR_HI: f64 = 0.999;

/// Linear trend with Student-t residuals clipped to fixed quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTModel {
    pub intercept: f64,
    pub slope: f64,
    pub residual: StudentTFit,
    pub winsor_lo: f64,
    pub winsor_hi: f64,
}

/// Ordinary least squares `y ≈ a + b·x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(StatsError::Degenerate("predictor is constant".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

pub fn fit_linear_t(x: &[f64], y: &[f64]) -> Result<LinearTModel, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    super::require("fit_linear_t", 20, x.len())?;
    super::require_finite(x)?;
    super::require_finite(y)?;
    let (intercept, slope) = ols(x, y)?;
    let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let residual = if resid.iter().all(|r| r.abs() <= 1e-12 * scale) {
        StudentTFit::degenerate(0.0)
    } else {
        fit_student_t(&resid)?
    };
    Ok(LinearTModel {
        intercept,
        slope,
        residual,
        winsor_lo: residual.quantile(WINSOR_LO),
        winsor_hi: residual.quantile(WINSOR_HI),
    })
}

impl LinearTModel {
    pub fn trend(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Residual draw clipped to the winsor bounds.
    pub fn sample_residual<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.residual.sample(rng).clamp(self.winsor_lo, self.winsor_hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        self.trend(x) + self.sample_residual(rng)
    }
}
