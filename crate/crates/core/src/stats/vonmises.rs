use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{aic, bessel_ratio, ln_bessel_i0, StatsError};
use crate::rng::SeedPath;

pub const KAPPA_MAX: f64 = 500.0;
const KAPPA_MIN: f64 = 1e-6;
pub const CARDINALS: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
const RESTARTS: u64 = 5;
const MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureMode {
    /// Four components with means fixed at 0, π/2, π, 3π/2.
    AxisCentered,
    /// One component on the doubled angle, modelling a bidirectional axis.
    UnimodalDoubled,
    /// `k` components with free means.
    FreeK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesComponent {
    pub mu: f64,
    pub kappa: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VonMisesMixture {
    pub mode: MixtureMode,
    pub components: Vec<VonMisesComponent>,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
}

fn ln_vm(theta: f64, mu: f64, kappa: f64) -> f64 {
    kappa * (theta - mu).cos() - (TAU.ln() + ln_bessel_i0(kappa))
}

/// Inverse of the mean resultant length `A(κ)`; Best–Fisher start plus Newton steps.
fn kappa_from_resultant(r: f64) -> f64 {
    if r <= 1e-9 {
        return KAPPA_MIN;
    }
    if r >= 0.999_999 {
        return KAPPA_MAX;
    }
    let mut k = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
    };
    for _ in 0..20 {
        let a = bessel_ratio(k);
        let da = 1.0 - a * a - a / k;
        if da <= 0.0 {
            break;
        }
        let next = (k - (a - r) / da).clamp(KAPPA_MIN, KAPPA_MAX);
        if (next - k).abs() < 1e-12 * k {
            k = next;
            break;
        }
        k = next;
    }
    k.clamp(KAPPA_MIN, KAPPA_MAX)
}

fn wrap(theta: f64) -> f64 {
    theta.rem_euclid(TAU)
}

impl VonMisesMixture {
    pub fn n_params(&self) -> usize {
        match self.mode {
            MixtureMode::AxisCentered => 7,
            MixtureMode::UnimodalDoubled => 2,
            MixtureMode::FreeK(k) => 3 * k - 1,
        }
    }

    pub fn ln_pdf(&self, theta: f64) -> f64 {
        match self.mode {
            MixtureMode::UnimodalDoubled => {
                let c = self.components[0];
                ln_vm(wrap(2.0 * theta), c.mu, c.kappa)
            }
            _ => {
                let terms: Vec<f64> = self
                    .components
                    .iter()
                    .map(|c| c.weight.ln() + ln_vm(theta, c.mu, c.kappa))
                    .collect();
                log_sum_exp(&terms)
            }
        }
    }

    pub fn loglik_of(&self, angles: &[f64]) -> f64 {
        angles.iter().map(|&t| self.ln_pdf(t)).sum()
    }

    /// Draws an angle in `[0, 2π)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.mode {
            MixtureMode::UnimodalDoubled => {
                let c = self.components[0];
                let phi = sample_vonmises(rng, c.mu, c.kappa);
                let flip = if rng.random::<bool>() { PI } else { 0.0 };
                wrap(phi / 2.0 + flip)
            }
            _ => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = self.components[self.components.len() - 1];
                for c in &self.components {
                    acc += c.weight;
                    if u < acc {
                        chosen = *c;
                        break;
                    }
                }
                wrap(sample_vonmises(rng, chosen.mu, chosen.kappa))
            }
        }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Best–Fisher rejection sampler.
pub fn sample_vonmises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return rng.random::<f64>() * TAU;
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return mu + if u3 > 0.5 { theta } else { -theta };
        }
    }
}

/// Log-likelihood of the uniform circular density, `n · ln(1/2π)`.
pub fn uniform_circle_loglik(n: usize) -> f64 {
    -(n as f64) * TAU.ln()
}

fn em(angles: &[f64], mut comps: Vec<VonMisesComponent>, free_means: bool) -> (Vec<VonMisesComponent>, f64, bool) {
    let n = angles.len();
    let k = comps.len();
    let mut resp = vec![0.0; n * k];
    let mut prev = f64::NEG_INFINITY;
    let mut terms = vec![0.0; k];
    for _ in 0..MAX_ITER {
        let mut ll = 0.0;
        for (i, &t) in angles.iter().enumerate() {
            for (j, c) in comps.iter().enumerate() {
                terms[j] = c.weight.max(1e-300).ln() + ln_vm(t, c.mu, c.kappa);
            }
            let lse = log_sum_exp(&terms);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (terms[j] - lse).exp();
            }
        }
        for (j, c) in comps.iter_mut().enumerate() {
            let (mut sw, mut sc, mut ss) = (0.0, 0.0, 0.0);
            for (i, &t) in angles.iter().enumerate() {
                let r = resp[i * k + j];
                sw += r;
                sc += r * t.cos();
                ss += r * t.sin();
            }
            c.weight = (sw / n as f64).max(1e-12);
            if sw <= 1e-12 {
                c.kappa = KAPPA_MIN;
                continue;
            }
            if free_means {
                c.mu = wrap(ss.atan2(sc));
            }
            let rbar = (sc * c.mu.cos() + ss * c.mu.sin()) / sw;
            c.kappa = kappa_from_resultant(rbar.max(0.0));
        }
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in comps.iter_mut() {
            c.weight /= total;
        }
        if (ll - prev).abs() < 1e-9 * (1.0 + ll.abs()) {
            return (comps, ll, true);
        }
        prev = ll;
    }
    let ll = angles
        .iter()
        .map(|&t| {
            let ts: Vec<f64> = comps.iter().map(|c| c.weight.ln() + ln_vm(t, c.mu, c.kappa)).collect();
            log_sum_exp(&ts)
        })
        .sum();
    (comps, ll, false)
}

/// Fits a von Mises mixture by EM, keeping the best of five seeded restarts.
pub fn fit_vonmises_mixture(angles: &[f64], mode: MixtureMode) -> Result<VonMisesMixture, StatsError> {
    super::require("fit_vonmises_mixture", 50, angles.len())?;
    super::require_finite(angles)?;
    let angles: Vec<f64> = angles.iter().map(|&t| wrap(t)).collect();
    let (components, loglik, converged) = match mode {
        MixtureMode::UnimodalDoubled => {
            let n = angles.len() as f64;
            let c = angles.iter().map(|t| (2.0 * t).cos()).sum::<f64>() / n;
            let s = angles.iter().map(|t| (2.0 * t).sin()).sum::<f64>() / n;
            let mu = wrap(s.atan2(c));
            let kappa = kappa_from_resultant(c.hypot(s));
            let comp = VonMisesComponent { mu, kappa, weight: 1.0 };
            let ll = angles.iter().map(|&t| ln_vm(wrap(2.0 * t), mu, kappa)).sum();
            (vec![comp], ll, true)
        }
        MixtureMode::AxisCentered | MixtureMode::FreeK(_) => {
            let k = match mode {
                MixtureMode::FreeK(k) if k >= 1 => k,
                MixtureMode::FreeK(_) => return Err(StatsError::Degenerate("mixture needs at least one component".into())),
                _ => 4,
            };
            let free = matches!(mode, MixtureMode::FreeK(_));
            let mut best: Option<(Vec<VonMisesComponent>, f64, bool)> = None;
            for restart in 0..RESTARTS {
                let mut rng = SeedPath::new(0x5EED).with_u64(restart).rng();
                let init: Vec<VonMisesComponent> = (0..k)
                    .map(|j| {
                        let mu = if free {
                            if restart == 0 {
                                TAU * j as f64 / k as f64
                            } else {
                                angles[rng.random_range(0..angles.len())]
                            }
                        } else {
                            CARDINALS[j]
                        };
                        let kappa = if restart == 0 { 1.0 } else { rng.random_range(0.5..20.0) };
                        let weight = if restart == 0 { 1.0 } else { rng.random_range(0.2..1.0) };
                        VonMisesComponent { mu, kappa, weight }
                    })
                    .collect();
                let total: f64 = init.iter().map(|c| c.weight).sum();
                let init = init.into_iter().map(|c| VonMisesComponent { weight: c.weight / total, ..c }).collect();
                let run = em(&angles, init, free);
                if best.as_ref().is_none_or(|b| run.1 > b.1) {
                    best = Some(run);
                }
            }
            best.expect("at least one restart")
        }
    };
    let mut mix = VonMisesMixture { mode, components, loglik, aic: 0.0, converged };
    mix.aic = aic(loglik, mix.n_params());
    Ok(mix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn draw(mix: &VonMisesMixture, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| mix.sample(&mut rng)).collect()
    }

    fn cardinal(kappa: f64, weights: [f64; 4]) -> VonMisesMixture {
        VonMisesMixture {
            mode: MixtureMode::AxisCentered,
            components: CARDINALS
                .iter()
                .zip(weights)
                .map(|(&mu, weight)| VonMisesComponent { mu, kappa, weight })
                .collect(),
            loglik: 0.0,
            aic: 0.0,
            converged: true,
        }
    }

    #[test]
    fn kappa_inverse_roundtrip() {
        for k in [0.1, 1.0, 5.0, 40.0, 300.0] {
            assert!((kappa_from_resultant(bessel_ratio(k)) - k).abs() < 1e-6 * k.max(1.0), "{k}");
        }
    }

    #[test]
    fn recovers_cardinal_weights() {
        let truth = cardinal(30.0, [0.25; 4]);
        let xs = draw(&truth, 4000, 1);
        let fit = fit_vonmises_mixture(&xs, MixtureMode::AxisCentered).unwrap();
        for c in &fit.components {
            assert!((c.weight - 0.25).abs() < 0.03, "{fit:?}");
            assert!(c.kappa > 20.0);
        }
    }

    #[test]
    fn single_cluster_at_pi() {
        let truth = cardinal(20.0, [0.0, 0.0, 1.0, 0.0]);
        let xs = draw(&truth, 1000, 2);
        let fit = fit_vonmises_mixture(&xs, MixtureMode::AxisCentered).unwrap();
        assert!(fit.components[2].weight > 0.95, "{fit:?}");
    }

    #[test]
    fn uniform_angles_are_flat() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * TAU).collect();
        let fit = fit_vonmises_mixture(&xs, MixtureMode::UnimodalDoubled).unwrap();
        assert!(fit.components[0].kappa < 0.15, "{fit:?}");
        assert!(fit.aic > aic(uniform_circle_loglik(xs.len()), 0));
    }

    #[test]
    fn aic_orders_models() {
        let four = draw(&cardinal(25.0, [0.3, 0.2, 0.3, 0.2]), 2000, 4);
        let axis = fit_vonmises_mixture(&four, MixtureMode::AxisCentered).unwrap();
        let uni = fit_vonmises_mixture(&four, MixtureMode::UnimodalDoubled).unwrap();
        assert!(axis.aic < uni.aic);

        let doubled = VonMisesMixture {
            mode: MixtureMode::UnimodalDoubled,
            components: vec![VonMisesComponent { mu: 1.0, kappa: 8.0, weight: 1.0 }],
            loglik: 0.0,
            aic: 0.0,
            converged: true,
        };
        let two = draw(&doubled, 2000, 5);
        let axis = fit_vonmises_mixture(&two, MixtureMode::AxisCentered).unwrap();
        let uni = fit_vonmises_mixture(&two, MixtureMode::UnimodalDoubled).unwrap();
        assert!(uni.aic < axis.aic);
        assert!((uni.components[0].mu - 1.0).abs() < 0.05);
    }

    #[test]
    fn free_means_find_clusters() {
        let truth = VonMisesMixture {
            mode: MixtureMode::FreeK(2),
            components: vec![
                VonMisesComponent { mu: 1.0, kappa: 30.0, weight: 0.5 },
                VonMisesComponent { mu: 4.0, kappa: 30.0, weight: 0.5 },
            ],
            loglik: 0.0,
            aic: 0.0,
            converged: true,
        };
        let xs = draw(&truth, 2000, 6);
        let fit = fit_vonmises_mixture(&xs, MixtureMode::FreeK(2)).unwrap();
        let mut mus: Vec<f64> = fit.components.iter().map(|c| c.mu).collect();
        mus.sort_by(f64::total_cmp);
        assert!((mus[0] - 1.0).abs() < 0.05 && (mus[1] - 4.0).abs() < 0.05, "{fit:?}");
        assert_eq!(fit.n_params(), 5);
    }
}
