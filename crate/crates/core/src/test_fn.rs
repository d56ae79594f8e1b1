//! Bounded initial data `ψ`.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;

/// Slack used when sampling closed sets, so that a node lying on the
/// boundary up to rounding is counted inside.
pub const CLOSED_SET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize), serde(rename_all = "lowercase"))]
pub enum Regularity {
    Continuous,
    #[cfg_attr(feature = "serde", serde(rename = "usc"))]
    UpperSemicontinuous,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// `amp · tanh(⟨w, x⟩ + c)`
    TanhAffine { w: Vec<f64>, c: f64, amp: f64 },
    /// `height · exp(−‖x − center‖² / (2 width²))`
    GaussianBump { center: Vec<f64>, width: f64, height: f64 },
    /// Indicator of the closed half-space `{⟨w, x⟩ ≤ c}`.
    IndicatorHalfspace { w: Vec<f64>, c: f64 },
    /// Indicator of the closed ball `{‖x − center‖ ≤ radius}`.
    IndicatorBall { center: Vec<f64>, radius: f64 },
    /// `clamp(⟨w, x⟩ + c, −cap, cap)`
    PiecewiseLinearCapped { w: Vec<f64>, c: f64, cap: f64 },
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl TestFunction {
    /// `tanh(x₁)`
    pub fn tanh(d: usize) -> Self {
        let mut w = alloc::vec![0.0; d];
        w[0] = 1.0;
        TestFunction::TanhAffine { w, c: 0.0, amp: 1.0 }
    }

    /// Unit-height bump of unit width at the origin.
    pub fn bump(d: usize) -> Self {
        TestFunction::GaussianBump { center: alloc::vec![0.0; d], width: 1.0, height: 1.0 }
    }

    /// `1{x₁ ≤ 0}`
    pub fn halfspace(d: usize) -> Self {
        let mut w = alloc::vec![0.0; d];
        w[0] = 1.0;
        TestFunction::IndicatorHalfspace { w, c: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant(c) => *c,
            TestFunction::TanhAffine { w, c, amp } => amp * math::tanh(dot(w, x) + c),
            TestFunction::GaussianBump { center, width, height } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                height * math::exp(-r2 / (2.0 * width * width))
            }
            TestFunction::IndicatorHalfspace { w, c } => {
                if dot(w, x) <= c + CLOSED_SET_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::IndicatorBall { center, radius } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                if math::sqrt(r2) <= radius + CLOSED_SET_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::PiecewiseLinearCapped { w, c, cap } => (dot(w, x) + c).clamp(-cap, *cap),
        }
    }

    pub fn regularity(&self) -> Regularity {
        match self {
            TestFunction::IndicatorHalfspace { .. } | TestFunction::IndicatorBall { .. } => {
                Regularity::UpperSemicontinuous
            }
            _ => Regularity::Continuous,
        }
    }

    /// `sup |ψ|`
    pub fn sup_abs(&self) -> f64 {
        match self {
            TestFunction::Constant(c) => c.abs(),
            TestFunction::TanhAffine { amp, .. } => amp.abs(),
            TestFunction::GaussianBump { height, .. } => height.abs(),
            TestFunction::IndicatorHalfspace { .. } | TestFunction::IndicatorBall { .. } => 1.0,
            TestFunction::PiecewiseLinearCapped { cap, .. } => cap.abs(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TestFunction::Constant(_) => "constant",
            TestFunction::TanhAffine { .. } => "tanh-affine",
            TestFunction::GaussianBump { .. } => "gaussian-bump",
            TestFunction::IndicatorHalfspace { .. } => "indicator-halfspace",
            TestFunction::IndicatorBall { .. } => "indicator-ball",
            TestFunction::PiecewiseLinearCapped { .. } => "piecewise-linear-capped",
        }
    }

    /// Checks that every vector parameter has dimension `d` and the scalar
    /// parameters are finite and sensible.
    pub fn validate(&self, d: usize) -> Result<()> {
        let vec_ok = |v: &[f64]| v.len() == d && v.iter().all(|x| x.is_finite());
        let ok = match self {
            TestFunction::Constant(c) => c.is_finite(),
            TestFunction::TanhAffine { w, c, amp } => vec_ok(w) && c.is_finite() && amp.is_finite(),
            TestFunction::GaussianBump { center, width, height } => {
                vec_ok(center) && *width > 0.0 && width.is_finite() && height.is_finite()
            }
            TestFunction::IndicatorHalfspace { w, c } => vec_ok(w) && c.is_finite(),
            TestFunction::IndicatorBall { center, radius } => {
                vec_ok(center) && *radius >= 0.0 && radius.is_finite()
            }
            TestFunction::PiecewiseLinearCapped { w, c, cap } => {
                vec_ok(w) && c.is_finite() && *cap >= 0.0 && cap.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!("malformed {} test function for d = {d}", self.kind())))
        }
    }

    /// Random member of one of the built-in families with parameters of
    /// order one.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let vec = |rng: &mut R, s: f64| (0..d).map(|_| rng.gen_range(-s..=s)).collect::<Vec<_>>();
        match rng.gen_range(0..6u8) {
            0 => TestFunction::Constant(rng.gen_range(-1.0..=1.0)),
            1 => TestFunction::TanhAffine {
                w: vec(rng, 2.0),
                c: rng.gen_range(-1.0..=1.0),
                amp: rng.gen_range(-1.5..=1.5),
            },
            2 => TestFunction::GaussianBump {
                center: vec(rng, 1.5),
                width: rng.gen_range(0.3..=1.5),
                height: rng.gen_range(-1.5..=1.5),
            },
            3 => TestFunction::IndicatorHalfspace { w: vec(rng, 1.0), c: rng.gen_range(-1.0..=1.0) },
            4 => TestFunction::IndicatorBall { center: vec(rng, 1.0), radius: rng.gen_range(0.2..=1.5) },
            _ => TestFunction::PiecewiseLinearCapped {
                w: vec(rng, 1.5),
                c: rng.gen_range(-0.5..=0.5),
                cap: rng.gen_range(0.2..=1.0),
            },
        }
    }

    pub fn random_pool(d: usize, n: usize, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Self::random(d, &mut rng)).collect()
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Constant(c) => write!(f, "constant({c})"),
            TestFunction::TanhAffine { w, c, amp } => write!(f, "tanh-affine(w={w:?}, c={c}, amp={amp})"),
            TestFunction::GaussianBump { center, width, height } => {
                write!(f, "gaussian-bump(center={center:?}, width={width}, height={height})")
            }
            TestFunction::IndicatorHalfspace { w, c } => write!(f, "indicator-halfspace(w={w:?}, c={c})"),
            TestFunction::IndicatorBall { center, radius } => {
                write!(f, "indicator-ball(center={center:?}, radius={radius})")
            }
            TestFunction::PiecewiseLinearCapped { w, c, cap } => {
                write!(f, "piecewise-linear-capped(w={w:?}, c={c}, cap={cap})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicators_use_closed_sets() {
        let h = TestFunction::halfspace(1);
        assert_eq!(h.eval(&[0.0]), 1.0);
        assert_eq!(h.eval(&[1e-12]), 1.0);
        assert_eq!(h.eval(&[1e-6]), 0.0);
        let b = TestFunction::IndicatorBall { center: alloc::vec![0.0, 0.0], radius: 1.0 };
        assert_eq!(b.eval(&[0.6, 0.8]), 1.0);
        assert_eq!(b.regularity(), Regularity::UpperSemicontinuous);
        assert_eq!(TestFunction::tanh(1).regularity(), Regularity::Continuous);
    }

    #[test]
    fn random_pool_is_bounded_and_reproducible() {
        let a = TestFunction::random_pool(2, 40, 9);
        assert_eq!(a, TestFunction::random_pool(2, 40, 9));
        for f in &a {
            f.validate(2).unwrap();
            let s = f.sup_abs();
            for x in [[0.0, 0.0], [3.0, -1.0], [-0.5, 0.25]] {
                assert!(f.eval(&x).abs() <= s + 1e-15);
            }
        }
    }

    #[test]
    fn validate_rejects_wrong_dimension() {
        assert!(TestFunction::tanh(2).validate(1).is_err());
    }
}
