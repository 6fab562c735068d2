//! Estimation and hypothesis-testing primitives shared by calibration and
//! the noise generator.

mod beta;
mod glm;
mod hypothesis;
mod kde;
mod ks;
mod linear;
mod special;
mod student_t;
mod vonmises;

pub use beta::{fit_beta, BetaFit};
pub use glm::{fit_logistic, fit_poisson, LogisticModel, PoissonModel};
pub use hypothesis::{chi2_permutation, chi2_statistic, circular_uniformity, mantel, CircularUniformity, MantelResult};
pub use kde::{linspace, silverman_bandwidth, Bandwidth, Kde, BANDWIDTH_FLOOR};
pub use ks::{ks_one_sample, ks_statistic, ks_with_location};
pub use linear::{fit_linear_t, ols, LinearTModel, WINSOR_HI, WINSOR_LO};
pub use special::{bessel_i0, bessel_ratio, ln_bessel_i0, trigamma};
pub use student_t::{fit_normal, fit_student_t, NormalFit, StudentTFit, NU_MAX, NU_MIN};
pub use vonmises::{
    fit_vonmises_mixture, sample_vonmises, uniform_circle_loglik, MixtureMode, VonMisesComponent, VonMisesMixture,
    CARDINALS, KAPPA_MAX,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("{what} needs at least {needed} samples, got {got}")]
    InsufficientSamples { what: &'static str, needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in input")]
    NonFinite,
}

pub(crate) fn require(what: &'static str, needed: usize, got: usize) -> Result<(), StatsError> {
    if got < needed {
        Err(StatsError::InsufficientSamples { what, needed, got })
    } else {
        Ok(())
    }
}

pub(crate) fn require_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// Akaike information criterion, `2k − 2·loglik`.
pub fn aic(loglik: f64, k_params: usize) -> f64 {
    2.0 * k_params as f64 - 2.0 * loglik
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}
