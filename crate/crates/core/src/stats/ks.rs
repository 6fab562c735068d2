use super::StatsError;

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Exact two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    ks_with_location(a, b).map(|(d, _)| d)
}

/// KS statistic together with the pooled point where the supremum is first reached.
pub fn ks_with_location(a: &[f64], b: &[f64]) -> Result<(f64, f64), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::InsufficientSamples { what: "ks_statistic", needed: 1, got: 0 });
    }
    super::require_finite(a)?;
    super::require_finite(b)?;
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = (0.0, sa[0].min(sb[0]));
    while i < sa.len() || j < sb.len() {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        let d = (i as f64 / na - j as f64 / nb).abs();
        if d > best.0 {
            best = (d, x);
        }
    }
    Ok(best)
}

/// One-sample KS distance of `samples` against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_examples() {
        assert!((ks_statistic(&[0.1, 0.2, 0.3], &[0.2, 0.3, 0.4]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ks_statistic(&[0.1, 0.2], &[0.5, 0.6]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[0.3, 0.1, 0.2], &[0.2, 0.1, 0.3]).unwrap(), 0.0);
        assert!(ks_statistic(&[], &[0.1]).is_err());
    }

    #[test]
    fn one_sample_against_uniform() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_one_sample(&xs, |x| x) - 0.005).abs() < 1e-12);
    }
}
