//! Rectangular spatial lattices and node-valued grids with multilinear
//! interpolation.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::test_fn::TestFunction;

/// Axis-aligned box `∏ [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidGrid(format!(
                "domain bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(Error::InvalidGrid("domain needs finite lo < hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(alloc::vec![lo; d], alloc::vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l)
    }

    /// Central sub-box with half the width on every axis.
    pub fn middle_half(&self) -> BoxDomain {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let q = 0.25 * (h - l);
                (l + q, h - q)
            })
            .unzip();
        BoxDomain { lo, hi }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= l - 1e-12 && *v <= h + 1e-12)
    }
}

/// Uniform node lattice over a [`BoxDomain`]; axis 0 varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    domain: BoxDomain,
    dx: Vec<f64>,
    counts: Vec<usize>,
}

impl Lattice {
    pub fn new(domain: BoxDomain, dx: &[f64]) -> Result<Self> {
        let d = domain.dim();
        if !(1..=2).contains(&d) {
            return Err(Error::Dimension { got: d, max: 2 });
        }
        if dx.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: dx.len() });
        }
        let mut counts = Vec::with_capacity(d);
        let mut steps = Vec::with_capacity(d);
        for (axis, (w, h)) in domain.widths().zip(dx).enumerate() {
            if !(h.is_finite() && *h > 0.0) {
                return Err(Error::InvalidGrid(format!("dx[{axis}] = {h} must be positive")));
            }
            let cells_f = w / h;
            let cells = math::round(cells_f);
            if (cells_f - cells).abs() > 1e-6 * cells_f.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "dx[{axis}] = {h} does not divide the domain width {w}"
                )));
            }
            let n = cells as usize + 1;
            if n < 2 {
                return Err(Error::GridTooCoarse { axis, nodes: n });
            }
            counts.push(n);
            steps.push(w / cells);
        }
        Ok(Self { domain, dx: steps, counts })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of index `i` along `axis`; the last index is exactly `hi`.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let n = self.counts[axis];
        let (lo, hi) = (self.domain.lo[axis], self.domain.hi[axis]);
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * (i as f64 / (n - 1) as f64)
        }
    }

    /// Per-axis indices of a flat node index.
    #[inline]
    pub fn multi_index(&self, node: usize) -> [usize; 2] {
        let n0 = self.counts[0];
        [node % n0, node / n0]
    }

    #[inline]
    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        idx[0] + self.counts[0] * idx[1]
    }

    /// Writes the coordinates of `node` into `out[..d]`.
    #[inline]
    pub fn node_into(&self, node: usize, out: &mut [f64]) {
        let idx = self.multi_index(node);
        for (axis, o) in out.iter_mut().take(self.dim()).enumerate() {
            *o = self.coord(axis, idx[axis]);
        }
    }

    pub fn node(&self, node: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim()];
        self.node_into(node, &mut out);
        out
    }

    /// Flat indices of the nodes inside `region`, in storage order.
    pub fn nodes_in(&self, region: &BoxDomain) -> Vec<usize> {
        let mut x = [0.0; 2];
        (0..self.len())
            .filter(|&n| {
                self.node_into(n, &mut x);
                region.contains(&x[..self.dim()])
            })
            .collect()
    }

    /// Index of the node closest to `x` (coordinates clamped to the domain).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut idx = [0usize; 2];
        for axis in 0..self.dim() {
            let s = (x[axis] - self.domain.lo[axis]) / self.dx[axis];
            let max = (self.counts[axis] - 1) as f64;
            idx[axis] = math::round(s.clamp(0.0, max)) as usize;
        }
        self.flat_index(idx)
    }

    /// Same domain with every spacing halved.
    pub fn refined(&self) -> Result<Self> {
        let dx: Vec<f64> = self.dx.iter().map(|h| h / 2.0).collect();
        Self::new(self.domain.clone(), &dx)
    }

    /// Position of `x` along `axis`: cell index and offset in `[0, 1]`, with
    /// constant extension outside the domain.
    #[inline]
    pub(crate) fn locate(&self, axis: usize, x: f64) -> (usize, f64) {
        let n = self.counts[axis];
        let s = ((x - self.domain.lo[axis]) / self.dx[axis]).clamp(0.0, (n - 1) as f64);
        let i = (s as usize).min(n - 2);
        (i, s - i as f64)
    }
}

/// Spatial lattice plus time stepping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lattice: Lattice,
    dt: f64,
    t_end: f64,
}

impl GridSpec {
    pub fn new(domain: BoxDomain, dx: &[f64], dt: f64, t_end: f64) -> Result<Self> {
        let lattice = Lattice::new(domain, dx)?;
        Self::from_lattice(lattice, dt, t_end)
    }

    pub fn from_lattice(lattice: Lattice, dt: f64, t_end: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::InvalidGrid(format!("t_end = {t_end} must be non-negative")));
        }
        Ok(Self { lattice, dt, t_end })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::from_lattice(self.lattice.clone(), dt, self.t_end)
    }

    /// Halved spacing with the time step divided by four.
    pub fn refined(&self) -> Result<Self> {
        Self::from_lattice(self.lattice.refined()?, self.dt / 4.0, self.t_end)
    }
}

/// Values of `u(t, ·)` on the nodes of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    lattice: Lattice,
    values: Vec<f64>,
    time: f64,
}

impl ValueGrid {
    pub fn new(lattice: Lattice, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a lattice of {} nodes",
                values.len(),
                lattice.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at node {i}")));
        }
        Ok(Self { lattice, values, time })
    }

    pub(crate) fn from_parts(lattice: Lattice, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), lattice.len());
        Self { lattice, values, time }
    }

    pub fn from_fn(lattice: &Lattice, time: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = lattice.dim();
        let mut x = [0.0; 2];
        let values = (0..lattice.len())
            .map(|n| {
                lattice.node_into(n, &mut x);
                f(&x[..d])
            })
            .collect();
        Self { lattice: lattice.clone(), values, time }
    }

    /// `ψ` sampled on the nodes at time 0.
    pub fn sample(lattice: &Lattice, psi: &TestFunction) -> Self {
        Self::from_fn(lattice, 0.0, |x| psi.eval(x))
    }

    pub fn constant(lattice: &Lattice, c: f64) -> Self {
        Self { lattice: lattice.clone(), values: alloc::vec![c; lattice.len()], time: 0.0 }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolant, constant-extended outside the domain.
    /// Written in `a + θ(b − a)` form so constants are reproduced exactly.
    #[inline]
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let l = &self.lattice;
        let v = &self.values;
        match l.dim() {
            1 => {
                let (i, t) = l.locate(0, x[0]);
                let a = v[i];
                a + t * (v[i + 1] - a)
            }
            _ => {
                let (i, s) = l.locate(0, x[0]);
                let (j, t) = l.locate(1, x[1]);
                let n0 = l.counts[0];
                let r0 = j * n0 + i;
                let r1 = r0 + n0;
                let lo = v[r0] + s * (v[r0 + 1] - v[r0]);
                let hi = v[r1] + s * (v[r1 + 1] - v[r1]);
                lo + t * (hi - lo)
            }
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            lattice: self.lattice.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
            time: self.time,
        }
    }

    /// Node-wise combination; panics if the lattices differ.
    pub fn zip_with(&self, other: &ValueGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.lattice, other.lattice, "grids live on different lattices");
        Self {
            lattice: self.lattice.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            time: self.time,
        }
    }

    /// `max |self − other|` over the nodes inside `region`.
    pub fn max_abs_diff_on(&self, other: &ValueGrid, region: &BoxDomain) -> f64 {
        assert_eq!(self.lattice, other.lattice, "grids live on different lattices");
        self.lattice
            .nodes_in(region)
            .into_iter()
            .fold(0.0_f64, |m, n| m.max((self.values[n] - other.values[n]).abs()))
    }

    /// `max |self − f|` over the nodes inside `region`.
    pub fn max_abs_error_on(&self, region: &BoxDomain, f: impl Fn(&[f64]) -> f64) -> f64 {
        let d = self.lattice.dim();
        let mut x = [0.0; 2];
        self.lattice.nodes_in(region).into_iter().fold(0.0_f64, |m, n| {
            self.lattice.node_into(n, &mut x);
            m.max((self.values[n] - f(&x[..d])).abs())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lattice_1d() -> Lattice {
        Lattice::new(BoxDomain::cube(1, -1.0, 1.0).unwrap(), &[0.25]).unwrap()
    }

    #[test]
    fn lattice_counts_and_endpoints() {
        let l = lattice_1d();
        assert_eq!(l.counts(), &[9]);
        assert_eq!(l.coord(0, 0), -1.0);
        assert_eq!(l.coord(0, 4), 0.0);
        assert_eq!(l.coord(0, 8), 1.0);
    }

    #[test]
    fn spacing_must_divide_domain() {
        assert!(Lattice::new(BoxDomain::cube(1, 0.0, 1.0).unwrap(), &[0.3]).is_err());
        assert_eq!(
            Lattice::new(BoxDomain::cube(1, 0.0, 1.0).unwrap(), &[5.0]),
            Err(Error::InvalidGrid("dx[0] = 5 does not divide the domain width 1".into()))
        );
        assert!(Lattice::new(BoxDomain::cube(3, 0.0, 1.0).unwrap(), &[0.5; 3]).is_err());
    }

    #[test]
    fn middle_half_of_symmetric_box() {
        let b = BoxDomain::cube(2, -8.0, 8.0).unwrap().middle_half();
        assert_eq!(b.lo(), &[-4.0, -4.0]);
        assert_eq!(b.hi(), &[4.0, 4.0]);
    }

    #[test]
    fn interpolation_is_exact_for_affine_data_in_2d() {
        let l = Lattice::new(BoxDomain::cube(2, -1.0, 1.0).unwrap(), &[0.5, 0.25]).unwrap();
        let g = ValueGrid::from_fn(&l, 0.0, |x| 2.0 * x[0] - x[1] + 0.5);
        for p in [[0.1, 0.3], [-0.9, 0.77], [0.5, -0.5]] {
            let v = g.interpolate(&p);
            assert!((v - (2.0 * p[0] - p[1] + 0.5)).abs() < 1e-14);
        }
        // constant extension
        assert!((g.interpolate(&[5.0, 0.0]) - g.interpolate(&[1.0, 0.0])).abs() < 1e-15);
    }

    #[test]
    fn nearest_node_clamps() {
        let l = lattice_1d();
        assert_eq!(l.nearest_node(&[0.1]), 4);
        assert_eq!(l.nearest_node(&[0.13]), 5);
        assert_eq!(l.nearest_node(&[-7.0]), 0);
    }

    proptest! {
        #[test]
        fn constants_interpolate_exactly(c in -1e3f64..1e3, x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let l = Lattice::new(BoxDomain::cube(2, -2.0, 3.0).unwrap(), &[0.5, 0.25]).unwrap();
            let g = ValueGrid::constant(&l, c);
            prop_assert_eq!(g.interpolate(&[x, y]), c);
        }

        #[test]
        fn interpolant_stays_within_node_range(vals in proptest::collection::vec(-1.0f64..1.0, 9), x in -2.0f64..2.0) {
            let g = ValueGrid::new(lattice_1d(), vals, 0.0).unwrap();
            let v = g.interpolate(&[x]);
            prop_assert!(v >= g.min() - 1e-15 && v <= g.max() + 1e-15);
        }
    }
}
