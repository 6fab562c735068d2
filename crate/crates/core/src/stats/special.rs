//! Special functions not provided by statrs.

const SERIES_LIMIT: f64 = 30.0;

/// Power series of `I_ν(x)` for ν ∈ {0, 1}.
fn bessel_series(nu: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let q = half * half;
    let mut term = if nu == 0 { 1.0 } else { half };
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + f64::from(nu)));
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
    }
}

/// Asymptotic expansion of `e^{-x} √(2πx) I_ν(x)` for large x.
fn bessel_asymptotic_scaled(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * f64::from(nu * nu);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    ln_bessel_i0(x).exp()
}

/// `ln I₀(x)`, stable for large arguments.
pub fn ln_bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        bessel_series(0, x).ln()
    } else {
        x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + bessel_asymptotic_scaled(0, x).ln()
    }
}

/// Mean resultant length of a von Mises distribution, `A(κ) = I₁(κ)/I₀(κ)`.
pub fn bessel_ratio(kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    if kappa <= SERIES_LIMIT {
        bessel_series(1, kappa) / bessel_series(0, kappa)
    } else {
        bessel_asymptotic_scaled(1, kappa) / bessel_asymptotic_scaled(0, kappa)
    }
}

/// Derivative of the digamma function.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    acc + 1.0 / x + x2 / 2.0
        + (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 * (1.0 / 30.0))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun table 9.8.
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_45).abs() < 1e-11);
        let i0_50: f64 = 2.932_553_783_849_336e20;
        assert!((ln_bessel_i0(50.0) - i0_50.ln()).abs() < 1e-12);
        // Continuity across the series/asymptotic switch.
        let below = ln_bessel_i0(SERIES_LIMIT);
        let above = SERIES_LIMIT - 0.5 * (2.0 * std::f64::consts::PI * SERIES_LIMIT).ln()
            + bessel_asymptotic_scaled(0, SERIES_LIMIT).ln();
        assert!((below - above).abs() < 1e-12);
        assert!((bessel_ratio(1.0) - 0.446_389_965_896_535).abs() < 1e-12);
        assert!((bessel_ratio(100.0) - 0.994_987_373_005_169).abs() < 1e-10);
    }

    #[test]
    fn trigamma_reference_values() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((trigamma(1.0) - pi2_6).abs() < 1e-12);
        assert!((trigamma(0.5) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-11);
        assert!((trigamma(10.0) - 0.105_166_335_681_685_2).abs() < 1e-13);
    }
}
