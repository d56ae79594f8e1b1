//! Scalar helpers shared by the solvers.
//!
//! Transcendental functions go through `libm` in every build so that `std`
//! and `no_std` builds produce identical bits.

use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample mean and standard error of the mean.
///
/// Deviations are taken from the first sample, so a constant sample returns
/// that constant with a standard error of exactly zero.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let shift = samples[0];
    let mut s1 = CompensatedSum::default();
    let mut s2 = CompensatedSum::default();
    for &v in samples {
        let d = v - shift;
        s1.add(d);
        s2.add(d * d);
    }
    let nf = n as f64;
    let m = s1.value() / nf;
    let mean = shift + m;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((s2.value() - nf * m * m) / (nf - 1.0)).max(0.0);
    (mean, sqrt(var / nf))
}

/// `out = L⁻¹ b` for a lower-triangular row-major `d×d` matrix.
pub fn lower_solve(l: &[f64], d: usize, b: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for j in 0..i {
            s -= l[i * d + j] * out[j];
        }
        out[i] = s / l[i * d + i];
    }
}

/// Evaluates `f(0..n)` into a vector, in parallel when the `parallel`
/// feature is enabled. Output order never depends on scheduling.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
