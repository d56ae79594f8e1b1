//! Reference values computed without the crate's own numerics.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::distribution::{ContinuousCDF, Normal};

/// Gauss–Hermite rule for the standard normal law via the eigen-decomposition
/// of the Jacobi matrix of the probabilists' Hermite polynomials.
pub fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1 / total).collect())
}

/// `E f(mean + sd·Z)` with an 80-point rule.
pub fn gaussian_mean(f: impl Fn(f64) -> f64, mean: f64, sd: f64) -> f64 {
    let (x, w) = golub_welsch(80);
    x.iter().zip(&w).map(|(z, w)| w * f(mean + sd * z)).sum()
}

pub fn phi(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Heat flow of the unit bump: `E exp(−(x + √t Z)²/2)`.
pub fn heat_bump(x: f64, t: f64) -> f64 {
    gaussian_mean(|y| (-y * y / 2.0).exp(), x, t.sqrt())
}

/// `E tanh(x + t + √t Z)`: the value under the constant drift `+1`.
pub fn tanh_with_top_drift(x: f64, t: f64) -> f64 {
    gaussian_mean(f64::tanh, x + t, t.sqrt())
}

/// `P(x − t + √t Z ≤ 0) = Φ((t − x)/√t)`: the indicator of `{x ≤ 0}` under
/// the constant drift `−1`.
pub fn halfspace_with_bottom_drift(x: f64, t: f64) -> f64 {
    phi((t - x) / t.sqrt())
}

/// `sup_{x ∈ [lo, hi − δ]} |f(x + δ) − f(x)|` on a fine sampling.
pub fn window_modulus(f: impl Fn(f64) -> f64, lo: f64, hi: f64, delta: f64) -> f64 {
    let n = 20_000;
    (0..=n)
        .map(|i| {
            let x = lo + (hi - delta - lo) * i as f64 / n as f64;
            (f(x + delta) - f(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// `E|1 − Z|` for `Z = exp(−bW_t − b²t/2)` under the drifted law, by
/// quadrature over `W_t`.
pub fn lognormal_abs_deviation(b: f64, t: f64) -> f64 {
    gaussian_mean(|w| (1.0 - (-b * w - 0.5 * b * b * t).exp()).abs(), 0.0, t.sqrt())
}

/// Evenly spaced points of `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
