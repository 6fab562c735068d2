use rand::Rng;
use rand_distr::{Distribution, StudentT as TSampler};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::{ks_one_sample, mean, StatsError};

pub const NU_MIN: f64 = 1.0;
pub const NU_MAX: f64 = 200.0;

/// Location-scale Student-t fitted by maximum likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTFit {
    pub nu: f64,
    pub mu: f64,
    pub sigma: f64,
    pub loglik: f64,
    pub ks_gof: f64,
    #[serde(default = "yes")]
    pub converged: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub loglik: f64,
}

fn t_loglik(xs: &[f64], nu: f64, mu: f64, sigma: f64) -> f64 {
    let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln() - sigma.ln();
    xs.iter()
        .map(|&x| {
            let z = (x - mu) / sigma;
            c - (nu + 1.0) / 2.0 * (z * z / nu).ln_1p()
        })
        .sum()
}

/// EM updates of (μ, σ) at fixed ν.
fn em_location_scale(xs: &[f64], nu: f64, mut mu: f64, mut sigma: f64) -> (f64, f64, bool) {
    let n = xs.len() as f64;
    for _ in 0..500 {
        let mut sw = 0.0;
        let mut swx = 0.0;
        for &x in xs {
            let z = (x - mu) / sigma;
            let w = (nu + 1.0) / (nu + z * z);
            sw += w;
            swx += w * x;
        }
        let new_mu = swx / sw;
        let mut ss = 0.0;
        for &x in xs {
            let z = (x - mu) / sigma;
            let w = (nu + 1.0) / (nu + z * z);
            ss += w * (x - new_mu).powi(2);
        }
        let new_sigma = (ss / n).sqrt().max(f64::MIN_POSITIVE);
        let done = (new_mu - mu).abs() <= 1e-12 * (1.0 + mu.abs()) && (new_sigma / sigma - 1.0).abs() <= 1e-10;
        mu = new_mu;
        sigma = new_sigma;
        if done {
            return (mu, sigma, true);
        }
    }
    (mu, sigma, false)
}

/// Maximum-likelihood Student-t fit with ν restricted to `[1, 200]`.
///
/// The scale and location are profiled out by EM for each ν; the profile
/// likelihood is then maximized over `ln ν` by golden-section search.
pub fn fit_student_t(samples: &[f64]) -> Result<StudentTFit, StatsError> {
    super::require("fit_student_t", 20, samples.len())?;
    super::require_finite(samples)?;
    let sd = super::std_dev(samples);
    if sd <= 0.0 || samples.iter().all(|&x| x == samples[0]) {
        return Err(StatsError::Degenerate("student-t fit on constant samples".into()));
    }
    let med = super::median(samples);
    let mad = super::median(&samples.iter().map(|x| (x - med).abs()).collect::<Vec<_>>()) * 1.4826;
    let start_sigma = if mad > 0.0 { mad } else { sd };

    let profile = |ln_nu: f64| {
        let nu = ln_nu.exp();
        let (mu, sigma, conv) = em_location_scale(samples, nu, med, start_sigma);
        (t_loglik(samples, nu, mu, sigma), mu, sigma, conv)
    };

    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (NU_MIN.ln(), NU_MAX.ln());
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = profile(c).0;
    let mut fd = profile(d).0;
    while b - a > 1e-4 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = profile(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = profile(d).0;
        }
    }
    let mut best_ln_nu = (a + b) / 2.0;
    let mut best = profile(best_ln_nu);
    for edge in [NU_MIN.ln(), NU_MAX.ln()] {
        let e = profile(edge);
        if e.0 > best.0 {
            best = e;
            best_ln_nu = edge;
        }
    }
    let (loglik, mu, sigma, converged) = best;
    let nu = best_ln_nu.exp().clamp(NU_MIN, NU_MAX);
    let mut fit = StudentTFit { nu, mu, sigma, loglik, ks_gof: 0.0, converged };
    fit.ks_gof = ks_one_sample(samples, |x| fit.cdf(x));
    Ok(fit)
}

/// Normal maximum-likelihood fit, used as the light-tailed comparison model.
pub fn fit_normal(samples: &[f64]) -> Result<NormalFit, StatsError> {
    super::require("fit_normal", 2, samples.len())?;
    let n = samples.len() as f64;
    let mu = mean(samples);
    let var = samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(StatsError::Degenerate("normal fit on constant samples".into()));
    }
    let loglik = -0.5 * n * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * n;
    Ok(NormalFit { mu, sigma: var.sqrt(), loglik })
}

impl StudentTFit {
    /// Point mass at `mu`, used when residuals are exactly zero.
    pub fn degenerate(mu: f64) -> Self {
        StudentTFit { nu: NU_MAX, mu, sigma: 0.0, loglik: 0.0, ks_gof: 0.0, converged: true }
    }

    fn dist(&self) -> Option<StudentsT> {
        StudentsT::new(self.mu, self.sigma, self.nu).ok()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.dist() {
            Some(d) => d.cdf(x),
            None => f64::from(u8::from(x >= self.mu)),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self.dist() {
            Some(d) => d.inverse_cdf(p),
            None => self.mu,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        t_loglik(&[x], self.nu, self.mu, self.sigma)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma <= 0.0 {
            return self.mu;
        }
        let t = TSampler::new(self.nu).map(|d| d.sample(rng)).unwrap_or(0.0);
        self.mu + self.sigma * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::Normal;

    fn t_samples(nu: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = TSampler::new(nu).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn recovers_t5() {
        let xs = t_samples(5.0, 10_000, 11);
        let fit = fit_student_t(&xs).unwrap();
        assert!((4.0..=6.5).contains(&fit.nu), "{fit:?}");
        assert!(fit.mu.abs() < 0.05, "{fit:?}");
        assert!((fit.sigma - 1.0).abs() < 0.05, "{fit:?}");
        assert!(fit.ks_gof < 0.02);
    }

    #[test]
    fn normal_data_gives_large_nu() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        let fit = fit_student_t(&xs).unwrap();
        assert!(fit.nu > 30.0, "{fit:?}");
    }

    #[test]
    fn heavy_tails_favor_t_over_normal() {
        let xs = t_samples(3.0, 5000, 5);
        let t = fit_student_t(&xs).unwrap();
        let n = fit_normal(&xs).unwrap();
        assert!(t.loglik > n.loglik);
    }

    #[test]
    fn density_integrates_to_one() {
        let fit = StudentTFit { nu: 4.0, mu: 0.3, sigma: 0.7, loglik: 0.0, ks_gof: 0.0, converged: true };
        let h = 0.001;
        let total: f64 = (-200_000..200_000).map(|i| fit.ln_pdf(0.3 + (i as f64 + 0.5) * h).exp() * h).sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn constant_samples_are_degenerate() {
        assert!(matches!(fit_student_t(&[1.0; 30]), Err(StatsError::Degenerate(_))));
        assert!(matches!(fit_student_t(&[1.0; 5]), Err(StatsError::InsufficientSamples { .. })));
    }
}
