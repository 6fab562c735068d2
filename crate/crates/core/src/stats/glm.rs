use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::StatsError;

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;
const COEF_CAP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub slope: f64,
    /// Complete or quasi-complete separation was detected; coefficients are capped.
    #[serde(default)]
    pub separated: bool,
    #[serde(default)]
    pub converged: bool,
}

impl LogisticModel {
    pub fn probability(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-(self.intercept + self.slope * x)).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonModel {
    pub intercept: f64,
    pub slope: f64,
    pub loglik: f64,
    #[serde(default)]
    pub converged: bool,
}

impl PoissonModel {
    pub fn rate(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x).exp()
    }
}

/// Solves the 2×2 system `H·d = g`.
fn solve2(h: [[f64; 2]; 2], g: [f64; 2]) -> Option<[f64; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([(h[1][1] * g[0] - h[0][1] * g[1]) / det, (h[0][0] * g[1] - h[1][0] * g[0]) / det])
}

fn logistic_loglik(x: &[f64], y: &[bool], b: [f64; 2]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let eta = b[0] + b[1] * xi;
            // ln σ(η) = −ln(1 + e^{−η}); computed stably on both signs.
            let log1pexp = |t: f64| if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
            if yi {
                -log1pexp(-eta)
            } else {
                -log1pexp(eta)
            }
        })
        .sum()
}

/// Logistic regression on a scalar predictor by Newton–Raphson (IRLS).
pub fn fit_logistic(x: &[f64], labels: &[bool]) -> Result<LogisticModel, StatsError> {
    if x.len() != labels.len() {
        return Err(StatsError::LengthMismatch(x.len(), labels.len()));
    }
    super::require("fit_logistic", 20, x.len())?;
    super::require_finite(x)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(StatsError::Degenerate("logistic fit needs both label values".into()));
    }
    let max_neg = x.iter().zip(labels).filter(|(_, &l)| !l).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
    let min_neg = x.iter().zip(labels).filter(|(_, &l)| !l).map(|(&v, _)| v).fold(f64::INFINITY, f64::min);
    let max_pos = x.iter().zip(labels).filter(|(_, &l)| l).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
    let min_pos = x.iter().zip(labels).filter(|(_, &l)| l).map(|(&v, _)| v).fold(f64::INFINITY, f64::min);
    let separable = max_neg <= min_pos || max_pos <= min_neg;

    let p0 = positives as f64 / x.len() as f64;
    let mut b = [(p0 / (1.0 - p0)).ln(), 0.0];
    let mut ll = logistic_loglik(x, labels, b);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for (&xi, &yi) in x.iter().zip(labels) {
            let p = 1.0 / (1.0 + (-(b[0] + b[1] * xi)).exp());
            let r = f64::from(u8::from(yi)) - p;
            let w = p * (1.0 - p);
            g[0] += r;
            g[1] += r * xi;
            h[0][0] += w;
            h[0][1] += w * xi;
            h[1][1] += w * xi * xi;
        }
        h[1][0] = h[0][1];
        if g[0].hypot(g[1]) < GRAD_TOL * x.len() as f64 {
            converged = true;
            break;
        }
        let Some(d) = solve2(h, g) else { break };
        if d[0].hypot(d[1]) < 1e-12 {
            converged = true;
            break;
        }
        let mut step = 1.0;
        let mut next = b;
        for _ in 0..30 {
            next = [b[0] + step * d[0], b[1] + step * d[1]];
            let nll = logistic_loglik(x, labels, next);
            if nll >= ll {
                ll = nll;
                break;
            }
            step /= 2.0;
        }
        b = next;
        if b[0].abs() > COEF_CAP || b[1].abs() > COEF_CAP {
            break;
        }
    }
    let capped = b[0].abs() > COEF_CAP || b[1].abs() > COEF_CAP;
    let separated = separable || capped;
    if capped {
        b = [b[0].clamp(-COEF_CAP, COEF_CAP), b[1].clamp(-COEF_CAP, COEF_CAP)];
    }
    Ok(LogisticModel { intercept: b[0], slope: b[1], separated, converged: converged && !separated })
}

fn poisson_loglik(x: &[f64], y: &[u64], b: [f64; 2]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let eta = b[0] + b[1] * xi;
            let k = yi as f64;
            k * eta - eta.exp() - ln_gamma(k + 1.0)
        })
        .sum()
}

/// Poisson regression with log link on a scalar predictor.
pub fn fit_poisson(x: &[f64], counts: &[u64]) -> Result<PoissonModel, StatsError> {
    if x.len() != counts.len() {
        return Err(StatsError::LengthMismatch(x.len(), counts.len()));
    }
    super::require("fit_poisson", 20, x.len())?;
    super::require_finite(x)?;
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(StatsError::Degenerate("poisson fit on all-zero counts".into()));
    }
    let mut b = [(total as f64 / x.len() as f64).ln(), 0.0];
    let mut ll = poisson_loglik(x, counts, b);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for (&xi, &yi) in x.iter().zip(counts) {
            let mu = (b[0] + b[1] * xi).exp();
            let r = yi as f64 - mu;
            g[0] += r;
            g[1] += r * xi;
            h[0][0] += mu;
            h[0][1] += mu * xi;
            h[1][1] += mu * xi * xi;
        }
        h[1][0] = h[0][1];
        if g[0].hypot(g[1]) < GRAD_TOL * (1.0 + total as f64).sqrt() {
            converged = true;
            break;
        }
        let Some(d) = solve2(h, g) else { break };
        let mut step = 1.0;
        let mut next = b;
        let mut accepted = false;
        for _ in 0..40 {
            next = [b[0] + step * d[0], b[1] + step * d[1]];
            let nll = poisson_loglik(x, counts, next);
            if nll.is_finite() && nll >= ll {
                ll = nll;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            converged = true;
            break;
        }
        b = next;
    }
    Ok(PoissonModel { intercept: b[0], slope: b[1], loglik: ll, converged })
}
