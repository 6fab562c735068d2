use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::digamma;

use super::{trigamma, StatsError};

const CLAMP: f64 = 1e-6;
const PARAM_MAX: f64 = 1e6;
const BOUNDARY_RATIO: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub alpha: f64,
    pub beta: f64,
    pub loglik: f64,
    /// Set when the optimum sits against the parameter boundary.
    #[serde(default)]
    pub boundary: bool,
}

impl BetaFit {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Log density with the argument clamped away from 0 and 1.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let x = x.clamp(CLAMP, 1.0 - CLAMP);
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (1.0 - x).ln() - ln_beta(self.alpha, self.beta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Beta::new(self.alpha, self.beta).map(|d| d.sample(rng)).unwrap_or_else(|_| self.mean())
    }
}

fn loglik(a: f64, b: f64, n: f64, sl: f64, sl1: f64) -> f64 {
    (a - 1.0) * sl + (b - 1.0) * sl1 - n * ln_beta(a, b)
}

/// Maximum-likelihood Beta fit by Newton iterations on the log parameters.
pub fn fit_beta(samples: &[f64]) -> Result<BetaFit, StatsError> {
    super::require("fit_beta", 20, samples.len())?;
    super::require_finite(samples)?;
    let xs: Vec<f64> = samples.iter().map(|x| x.clamp(CLAMP, 1.0 - CLAMP)).collect();
    let n = xs.len() as f64;
    let sl: f64 = xs.iter().map(|x| x.ln()).sum();
    let sl1: f64 = xs.iter().map(|x| (-x).ln_1p()).sum();
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    if v <= 0.0 {
        return Err(StatsError::Degenerate("beta fit on constant samples".into()));
    }
    let common = (m * (1.0 - m) / v - 1.0).max(0.1);
    let (mut a, mut b) = ((m * common).max(1e-3), ((1.0 - m) * common).max(1e-3));
    let mut ll = loglik(a, b, n, sl, sl1);
    for _ in 0..200 {
        let dab = digamma(a + b);
        let ga = n * (dab - digamma(a)) + sl;
        let gb = n * (dab - digamma(b)) + sl1;
        let tab = trigamma(a + b);
        let haa = n * (tab - trigamma(a));
        let hbb = n * (tab - trigamma(b));
        let hab = n * tab;
        // Newton in (ln a, ln b) keeps iterates positive.
        let (gu, gv) = (ga * a, gb * b);
        let huu = haa * a * a + ga * a;
        let hvv = hbb * b * b + gb * b;
        let huv = hab * a * b;
        let det = huu * hvv - huv * huv;
        let (mut du, mut dv) = if det > 0.0 && huu < 0.0 {
            (-(hvv * gu - huv * gv) / det, -(huu * gv - huv * gu) / det)
        } else {
            (gu * 1e-3 / (1.0 + gu.abs()), gv * 1e-3 / (1.0 + gv.abs()))
        };
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let na = (a.ln() + step * du).exp().clamp(1e-8, PARAM_MAX);
            let nb = (b.ln() + step * dv).exp().clamp(1e-8, PARAM_MAX);
            let nll = loglik(na, nb, n, sl, sl1);
            if nll >= ll {
                improved = (nll - ll).abs() > 1e-13 * (1.0 + ll.abs()) || (na - a).abs() > 1e-12 * a;
                a = na;
                b = nb;
                ll = nll;
                break;
            }
            step /= 2.0;
        }
        du *= step;
        dv *= step;
        if !improved || (du.abs() < 1e-12 && dv.abs() < 1e-12) {
            break;
        }
    }
    let boundary = a >= PARAM_MAX * 0.999
        || b >= PARAM_MAX * 0.999
        || a / b > BOUNDARY_RATIO
        || b / a > BOUNDARY_RATIO;
    Ok(BetaFit { alpha: a, beta: b, loglik: ll, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn draws(a: f64, b: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = Beta::new(a, b).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn recovers_skewed_beta() {
        let xs = draws(4.53, 0.53, 10_000, 1);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 4.53 / 5.06).abs() < 0.01);
        let fit = fit_beta(&xs).unwrap();
        assert!((fit.alpha / 4.53 - 1.0).abs() < 0.25, "{fit:?}");
        assert!((fit.beta / 0.53 - 1.0).abs() < 0.25, "{fit:?}");
        assert!(!fit.boundary);
    }

    #[test]
    fn symmetric_beta() {
        let fit = fit_beta(&draws(2.0, 2.0, 5000, 2)).unwrap();
        assert!((fit.alpha / fit.beta - 1.0).abs() < 0.1, "{fit:?}");
        assert!((fit.alpha - 2.0).abs() < 0.2);
    }

    #[test]
    fn samples_near_one_hit_the_boundary() {
        let xs: Vec<f64> = (0..50).map(|i| 1.0 - 1e-5 * (1.0 + f64::from(i % 7))).collect();
        let fit = fit_beta(&xs).unwrap();
        assert!(fit.alpha / fit.beta > 100.0, "{fit:?}");
        assert!(fit.boundary, "{fit:?}");
    }
}
