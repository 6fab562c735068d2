use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::rng::SeedPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularUniformity {
    pub rayleigh_r: f64,
    pub rayleigh_p: f64,
    pub kuiper_v: f64,
    pub kuiper_p: f64,
}

/// Rayleigh and Kuiper tests of circular uniformity.
pub fn circular_uniformity(angles: &[f64]) -> Result<CircularUniformity, StatsError> {
    super::require("circular_uniformity", 10, angles.len())?;
    super::require_finite(angles)?;
    let n = angles.len() as f64;
    let c: f64 = angles.iter().map(|t| t.cos()).sum();
    let s: f64 = angles.iter().map(|t| t.sin()).sum();
    let rn = c.hypot(s);
    let rayleigh_r = rn / n;
    // Zar's approximation to the Rayleigh p-value.
    let rayleigh_p = ((1.0 + 4.0 * n + 4.0 * (n * n - rn * rn)).sqrt() - (1.0 + 2.0 * n)).exp().clamp(0.0, 1.0);

    let mut u: Vec<f64> = angles.iter().map(|t| t.rem_euclid(TAU) / TAU).collect();
    u.sort_by(f64::total_cmp);
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    for (i, &ui) in u.iter().enumerate() {
        d_plus = d_plus.max((i + 1) as f64 / n - ui);
        d_minus = d_minus.max(ui - i as f64 / n);
    }
    let kuiper_v = d_plus + d_minus;
    Ok(CircularUniformity { rayleigh_r, rayleigh_p, kuiper_v, kuiper_p: kuiper_p_value(kuiper_v, n) })
}

/// Asymptotic Kuiper tail probability with Stephens' small-sample correction.
fn kuiper_p_value(v: f64, n: f64) -> f64 {
    let lambda = (n.sqrt() + 0.155 + 0.24 / n.sqrt()) * v;
    if lambda < 0.4 {
        return 1.0;
    }
    let mut p = 0.0;
    for j in 1..100 {
        let j2l2 = (j * j) as f64 * lambda * lambda;
        let term = 2.0 * (4.0 * j2l2 - 1.0) * (-2.0 * j2l2).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Pearson χ² statistic of a contingency table.
pub fn chi2_statistic(table: &[Vec<u64>]) -> f64 {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let ncol = table.iter().map(Vec::len).max().unwrap_or(0);
    let cols: Vec<f64> = (0..ncol)
        .map(|j| table.iter().map(|r| r.get(j).copied().unwrap_or(0)).sum::<u64>() as f64)
        .collect();
    let total: f64 = rows.iter().sum();
    let mut stat = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let e = rows[i] * c / total;
            if e > 0.0 {
                let o = r.get(j).copied().unwrap_or(0) as f64;
                stat += (o - e).powi(2) / e;
            }
        }
    }
    stat
}

/// χ² permutation test: the column labels of the expanded table are shuffled
/// and `p` is the fraction of permuted statistics at least as large.
pub fn chi2_permutation(confusion: &[Vec<u64>], n_perms: usize, seed: u64) -> Result<f64, StatsError> {
    super::require("chi2_permutation rows", 2, confusion.len())?;
    let total: u64 = confusion.iter().flatten().sum();
    super::require("chi2_permutation total", 20, total as usize)?;
    super::require("chi2_permutation permutations", 1, n_perms)?;
    let ncol = confusion.iter().map(Vec::len).max().unwrap_or(0);
    let mut row_lab = Vec::with_capacity(total as usize);
    let mut col_lab = Vec::with_capacity(total as usize);
    for (i, r) in confusion.iter().enumerate() {
        for (j, &k) in r.iter().enumerate() {
            for _ in 0..k {
                row_lab.push(i);
                col_lab.push(j);
            }
        }
    }
    let observed = chi2_statistic(confusion);
    let nrow = confusion.len();
    let exceed: usize = (0..n_perms)
        .into_par_iter()
        .map(|p| {
            let mut rng = SeedPath::new(seed).with_u64(p as u64).rng();
            let mut cols = col_lab.clone();
            cols.shuffle(&mut rng);
            let mut t = vec![vec![0u64; ncol]; nrow];
            for (&i, &j) in row_lab.iter().zip(&cols) {
                t[i][j] += 1;
            }
            usize::from(chi2_statistic(&t) >= observed - 1e-12 * observed.abs())
        })
        .sum();
    Ok(exceed as f64 / n_perms as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MantelResult {
    pub r: f64,
    pub p: f64,
}

fn upper(m: &[Vec<f64>], perm: &[usize]) -> Vec<f64> {
    let n = perm.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(m[perm[i]][perm[j]]);
        }
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Mantel test on two square symmetric matrices; two-sided on `|r|`.
pub fn mantel(a: &[Vec<f64>], b: &[Vec<f64>], n_perms: usize, seed: u64) -> Result<MantelResult, StatsError> {
    let n = a.len();
    if b.len() != n || a.iter().chain(b).any(|r| r.len() != n) {
        return Err(StatsError::LengthMismatch(n, b.len()));
    }
    super::require("mantel dimension", 3, n)?;
    let ident: Vec<usize> = (0..n).collect();
    let ua = upper(a, &ident);
    let ub = upper(b, &ident);
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(&ua) || constant(&ub) {
        return Err(StatsError::Degenerate("mantel test on constant off-diagonal".into()));
    }
    let r = pearson(&ua, &ub);
    let exceed: usize = (0..n_perms)
        .into_par_iter()
        .map(|p| {
            let mut rng = SeedPath::new(seed).with_u64(p as u64).rng();
            let mut perm = ident.clone();
            perm.shuffle(&mut rng);
            let rp = pearson(&ua, &upper(b, &perm));
            usize::from(rp.abs() >= r.abs() - 1e-12)
        })
        .sum();
    let p = if n_perms == 0 { f64::NAN } else { exceed as f64 / n_perms as f64 };
    Ok(MantelResult { r, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rayleigh_and_kuiper() {
        let same = circular_uniformity(&[1.0; 20]).unwrap();
        assert!((same.rayleigh_r - 1.0).abs() < 1e-12);
        assert!(same.rayleigh_p < 1e-6);

        let grid: Vec<f64> = (0..100).map(|i| TAU * f64::from(i) / 100.0).collect();
        let u = circular_uniformity(&grid).unwrap();
        assert!(u.rayleigh_r < 1e-12);
        assert!(u.kuiper_p > 0.5);

        // Four tight cardinal clusters cancel as vectors but are far from uniform.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let card: Vec<f64> = (0..400)
            .map(|i| f64::from(i % 4) * TAU / 4.0 + rng.random_range(-0.05..0.05))
            .collect();
        let c = circular_uniformity(&card).unwrap();
        assert!(c.rayleigh_p > 0.05, "{c:?}");
        assert!(c.kuiper_p < 1e-3, "{c:?}");
    }

    #[test]
    fn chi2_permutation_behaviour() {
        let diag = vec![vec![20, 0, 0], vec![0, 20, 0], vec![0, 0, 20]];
        assert!(chi2_permutation(&diag, 500, 1).unwrap() < 0.01);
        let indep = vec![vec![10, 20], vec![20, 40]];
        assert!(chi2_permutation(&indep, 500, 1).unwrap() > 0.05);
        assert_eq!(chi2_permutation(&indep, 200, 9).unwrap(), chi2_permutation(&indep, 200, 9).unwrap());
    }

    #[test]
    fn mantel_behaviour() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 12;
        let mut a = vec![vec![0.0; n]; n];
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                a[i][j] = rng.random();
                a[j][i] = a[i][j];
                c[i][j] = rng.random();
                c[j][i] = c[i][j];
            }
        }
        let same = mantel(&a, &a, 999, 1).unwrap();
        assert!((same.r - 1.0).abs() < 1e-12 && same.p < 0.01);
        let neg: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| 3.0 - 2.0 * v).collect()).collect();
        assert!((mantel(&a, &neg, 10, 1).unwrap().r + 1.0).abs() < 1e-12);
        assert!(mantel(&a, &c, 999, 1).unwrap().p > 0.01);
    }
}
