//! Uniform cell-centered grids over `[-L, L]^n` and the sampled functions that
//! live on them.
//!
//! Sample `j` along an axis sits at the cell center `-L + (j + 1/2) * dx`, so a
//! grid never samples a coordinate hyperplane through a dyadic corner. All
//! integrals in the crate are midpoint sums over these cells, which is the
//! same as integrating the piecewise-constant interpolant exactly. That is
//! what [`IntegralTable`] does in O(1) per box.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form evaluator attached to a [`GridFunction`].
pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Geometry of a uniform grid: dimension, half-width `L` and samples per axis `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub halfwidth: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(dim: usize, halfwidth: f64, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if !(halfwidth.is_finite() && halfwidth > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width {halfwidth} must be positive")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "resolution {n} must be a power of two >= 2"
            )));
        }
        Ok(Grid { dim, halfwidth, n })
    }

    /// One-dimensional grid; panics on invalid input. Convenience for tests and fixtures.
    pub fn line(halfwidth: f64, n: usize) -> Self {
        Self::new(1, halfwidth, n).expect("valid 1-d grid")
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.halfwidth / self.n as f64
    }

    /// Volume of a single cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell-center coordinate of sample `j` along any axis.
    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        -self.halfwidth + (j as f64 + 0.5) * self.spacing()
    }

    /// Per-axis sample indices of a flat index (axis 0 is the slow axis).
    #[inline]
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.n, flat % self.n]
        }
    }

    #[inline]
    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.n + idx[1]
        }
    }

    /// Cell-center point of a flat index, padded to two coordinates.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(flat);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    /// Continuous cell coordinate `(x + L) / dx`, in `[0, N]` on the domain.
    #[inline]
    pub fn cell_position(&self, x: f64) -> f64 {
        (x + self.halfwidth) / self.spacing()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&c| c.abs() <= self.halfwidth)
    }

    /// Same geometry with a different resolution.
    pub fn with_resolution(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, self.halfwidth, n)
    }

    pub fn with_halfwidth(&self, halfwidth: f64) -> Result<Self> {
        Self::new(self.dim, halfwidth, self.n)
    }
}

/// A real function sampled at the cell centers of a [`Grid`].
#[derive(Clone)]
pub struct GridFunction {
    grid: Grid,
    samples: Vec<f64>,
    evaluator: Option<Evaluator>,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("grid", &self.grid)
            .field("len", &self.samples.len())
            .field("closed_form", &self.evaluator.is_some())
            .finish()
    }
}

impl GridFunction {
    pub fn from_samples(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("sample {bad} is not finite")));
        }
        Ok(GridFunction {
            grid,
            samples,
            evaluator: None,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            samples: vec![0.0; grid.len()],
            evaluator: None,
        }
    }

    /// Samples `f` and keeps it as the closed-form evaluator.
    pub fn from_fn<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let evaluator: Evaluator = Arc::new(f);
        let mut out = Self::sample(grid, |x| evaluator(x))?;
        out.evaluator = Some(evaluator);
        Ok(out)
    }

    /// Samples `f` without retaining it.
    pub fn sample(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = grid.dim;
        let samples = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..d])
            })
            .collect();
        Self::from_samples(grid, samples)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn evaluator(&self) -> Option<&Evaluator> {
        self.evaluator.as_ref()
    }

    pub fn with_evaluator(mut self, evaluator: Evaluator) -> Self {
        self.evaluator = Some(evaluator);
        self
    }

    /// Pointwise map; the closed form is dropped.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_samples(self.grid, self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|v| *v *= c);
        if let Some(e) = self.evaluator.clone() {
            out.evaluator = Some(Arc::new(move |x| c * e(x)));
        }
        out
    }

    /// Value at an arbitrary domain point: closed form when present,
    /// multilinear interpolation otherwise.
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        match &self.evaluator {
            Some(e) if self.grid.contains(x) => Some(e(x)),
            _ => self.interpolate(x),
        }
    }

    /// Multilinear interpolation between cell centers. Points between the
    /// outermost centers and the domain edge take the nearest sample;
    /// points outside `[-L, L]^n` give `None`.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        if x.len() != g.dim || !g.contains(x) {
            return None;
        }
        let (i0, w0) = interp_index(g, x[0]);
        if g.dim == 1 {
            let s = &self.samples;
            return Some(s[i0] * (1.0 - w0) + s[i0 + 1] * w0);
        }
        let (i1, w1) = interp_index(g, x[1]);
        let n = g.n;
        let s = &self.samples;
        let a = s[i0 * n + i1] * (1.0 - w1) + s[i0 * n + i1 + 1] * w1;
        let b = s[(i0 + 1) * n + i1] * (1.0 - w1) + s[(i0 + 1) * n + i1 + 1] * w1;
        Some(a * (1.0 - w0) + b * w0)
    }

    /// `(sum |f|^p dx^n)^(1/p)`; `p = inf` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.samples, p, self.grid.cell_volume())
    }

    pub fn integral_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }
}

/// Left interpolation node and weight along one axis.
#[inline]
fn interp_index(g: &Grid, x: f64) -> (usize, f64) {
    let u = (g.cell_position(x) - 0.5).clamp(0.0, (g.n - 1) as f64);
    let i = (u.floor() as usize).min(g.n - 2);
    (i, u - i as f64)
}

/// Discrete `L_p` norm of samples with cell volume `vol`.
pub fn lp_norm(samples: &[f64], p: f64, vol: f64) -> f64 {
    if p.is_infinite() {
        samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else {
        (samples.iter().map(|v| v.abs().powf(p)).sum::<f64>() * vol).powf(1.0 / p)
    }
}

/// Summed-area table of cell values times cell volume.
///
/// `box_integral` integrates the piecewise-constant interpolant of the
/// samples over an arbitrary axis-aligned box, clipped to the domain. The
/// cumulative integral is multilinear inside each cell, so bilinear
/// interpolation of the corner table is exact.
#[derive(Clone, Debug)]
pub struct IntegralTable {
    grid: Grid,
    table: Vec<f64>,
}

impl IntegralTable {
    pub fn new(grid: &Grid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.len());
        let n = grid.n;
        let vol = grid.cell_volume();
        let table = if grid.dim == 1 {
            let mut t = Vec::with_capacity(n + 1);
            let mut acc = 0.0;
            t.push(0.0);
            for v in values {
                acc += v * vol;
                t.push(acc);
            }
            t
        } else {
            let m = n + 1;
            let mut t = vec![0.0; m * m];
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += values[i * n + j] * vol;
                    t[(i + 1) * m + j + 1] = t[i * m + j + 1] + row;
                }
            }
            t
        };
        IntegralTable { grid: *grid, table }
    }

    pub fn from_fn(grid: &Grid, values: &[f64], f: impl Fn(f64) -> f64) -> Self {
        let mapped: Vec<f64> = values.iter().map(|&v| f(v)).collect();
        Self::new(grid, &mapped)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Total integral over the domain.
    pub fn total(&self) -> f64 {
        *self.table.last().unwrap()
    }

    /// Integral over the box `[lo, hi]` intersected with the domain.
    pub fn box_integral(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let g = &self.grid;
        let nf = g.n as f64;
        let a0 = g.cell_position(lo[0]).clamp(0.0, nf);
        let b0 = g.cell_position(hi[0]).clamp(0.0, nf);
        if b0 <= a0 {
            return 0.0;
        }
        if g.dim == 1 {
            return self.cum1(b0) - self.cum1(a0);
        }
        let a1 = g.cell_position(lo[1]).clamp(0.0, nf);
        let b1 = g.cell_position(hi[1]).clamp(0.0, nf);
        if b1 <= a1 {
            return 0.0;
        }
        self.cum2(b0, b1) - self.cum2(a0, b1) - self.cum2(b0, a1) + self.cum2(a0, a1)
    }

    /// Integral over cell-index ranges `[a, b)` per axis, given as continuous
    /// cell positions. Used by scans that already work in cell units.
    pub fn cell_range_integral(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let nf = self.grid.n as f64;
        let a0 = a[0].clamp(0.0, nf);
        let b0 = b[0].clamp(0.0, nf);
        if b0 <= a0 {
            return 0.0;
        }
        if self.grid.dim == 1 {
            return self.cum1(b0) - self.cum1(a0);
        }
        let a1 = a[1].clamp(0.0, nf);
        let b1 = b[1].clamp(0.0, nf);
        if b1 <= a1 {
            return 0.0;
        }
        self.cum2(b0, b1) - self.cum2(a0, b1) - self.cum2(b0, a1) + self.cum2(a0, a1)
    }

    #[inline]
    fn cum1(&self, u: f64) -> f64 {
        let n = self.grid.n;
        let i = (u.floor() as usize).min(n - 1);
        let w = u - i as f64;
        self.table[i] + w * (self.table[i + 1] - self.table[i])
    }

    #[inline]
    fn cum2(&self, u: f64, v: f64) -> f64 {
        let n = self.grid.n;
        let m = n + 1;
        let i = (u.floor() as usize).min(n - 1);
        let j = (v.floor() as usize).min(n - 1);
        let wu = u - i as f64;
        let wv = v - j as f64;
        let t = &self.table;
        let t00 = t[i * m + j];
        let t01 = t[i * m + j + 1];
        let t10 = t[(i + 1) * m + j];
        let t11 = t[(i + 1) * m + j + 1];
        t00 * (1.0 - wu) * (1.0 - wv) + t10 * wu * (1.0 - wv) + t01 * (1.0 - wu) * wv + t11 * wu * wv
    }
}

/// Measure of the box `[lo, hi]` clipped to the domain.
pub fn clipped_measure(grid: &Grid, lo: &[f64], hi: &[f64]) -> f64 {
    let l = grid.halfwidth;
    (0..grid.dim).map(|a| (hi[a].min(l) - lo[a].max(-l)).max(0.0)).product()
}

/// Per-axis ranges of cells overlapping `[lo, hi]` with positive length.
pub fn overlapping_cells(grid: &Grid, lo: &[f64], hi: &[f64]) -> [(usize, usize); 2] {
    let nf = grid.n as f64;
    let mut out = [(0, 1); 2];
    for a in 0..grid.dim {
        let u0 = grid.cell_position(lo[a]).clamp(0.0, nf);
        let u1 = grid.cell_position(hi[a]).clamp(0.0, nf);
        let first = u0.floor() as usize;
        let last = (u1.ceil() as usize).min(grid.n);
        out[a] = (first.min(last), last);
    }
    out
}

/// Visits flat indices of cells overlapping `[lo, hi]`.
pub fn for_each_cell_in(grid: &Grid, lo: &[f64], hi: &[f64], mut f: impl FnMut(usize)) {
    let [(a0, b0), (a1, b1)] = overlapping_cells(grid, lo, hi);
    for i in a0..b0 {
        if grid.dim == 1 {
            f(i);
        } else {
            for j in a1..b1 {
                f(i * grid.n + j);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(3, 1.0, 8).is_err());
        assert!(Grid::new(1, 0.0, 8).is_err());
        assert!(Grid::new(1, 1.0, 12).is_err());
    }

    #[test]
    fn cell_centers_avoid_dyadic_points() {
        let g = Grid::line(8.0, 64);
        assert_relative_eq!(g.coord(0), -8.0 + 0.125);
        for j in 0..g.n {
            let x = g.coord(j);
            assert!((x * 4.0).fract() != 0.0, "sample {x} on a dyadic point");
        }
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = Grid::new(2, 2.0, 16).unwrap();
        let f = GridFunction::sample(g, |x| 1.0 + 2.0 * x[0] - 3.0 * x[1]).unwrap();
        let v = f.interpolate(&[0.3, -0.71]).unwrap();
        assert_relative_eq!(v, 1.0 + 0.6 + 2.13, epsilon = 1e-12);
        assert!(f.interpolate(&[2.5, 0.0]).is_none());
    }

    #[test]
    fn integral_table_is_exact_on_partial_cells() {
        let g = Grid::line(1.0, 4);
        // cells [-1,-.5), [-.5,0), [0,.5), [.5,1] with values 1..4
        let t = IntegralTable::new(&g, &[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(t.total(), 5.0);
        assert_relative_eq!(t.box_integral(&[-0.75], &[0.25]), 0.25 + 1.0 + 0.75);
        assert_relative_eq!(t.box_integral(&[-5.0], &[5.0]), 5.0);

        let g2 = Grid::new(2, 1.0, 4).unwrap();
        let vals: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let t2 = IntegralTable::new(&g2, &vals);
        let brute: f64 = vals.iter().sum::<f64>() * 0.25;
        assert_relative_eq!(t2.total(), brute);
        // half of cell (1,1) and a quarter of cell (1,2)
        let got = t2.box_integral(&[-0.5, -0.5], &[-0.25, 0.25]);
        let want = 0.25 * 0.5 * vals[5] + 0.25 * 0.25 * vals[6];
        assert_relative_eq!(got, want, epsilon = 1e-12);
    }
}
