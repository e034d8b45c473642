//! Finite differences `Delta_h^M f` and the local averages `delta^M` over
//! cubes, moving windows and expanded cubes.
//!
//! All three averages share one kernel: for a displacement box `r (-1,1)^n`
//! the fields `S(y) = sum_h |Delta_h^M f(y)| [stencil in domain]` and
//! `C(y) = sum_h [stencil in domain]` are tabulated once, so that any box
//! average of the valid `(y, h)` pairs is `int_B S / int_B C`.

use crate::dyadic::{cube_box, expanded_cube, AxisBox, DyadicCube};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, IntegralTable};

/// Upper bound on displacement nodes per axis.
pub const MAX_H_NODES: usize = 32;

/// `C(m, j)` as a float.
pub fn binomial(m: u32, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// `Delta_h^M f(x) = sum_j (-1)^j C(M, j) f(x + (M - j) h)`, with off-grid
/// values from the closed form when `f` has one, by multilinear
/// interpolation otherwise.
pub fn delta_m(f: &GridFunction, m: u32, h: &[f64], x: &[f64]) -> Result<f64> {
    let d = f.grid().dim;
    if h.len() != d || x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.len() != d { x.len() } else { h.len() },
        });
    }
    let mut acc = 0.0;
    let mut y = [0.0; 2];
    for j in 0..=m {
        let s = (m - j) as f64;
        for a in 0..d {
            y[a] = x[a] + s * h[a];
        }
        let v = f.value_at(&y[..d]).ok_or_else(|| Error::OutOfDomain(y[..d].to_vec()))?;
        let c = binomial(m, j);
        acc += if j % 2 == 0 { c * v } else { -c * v };
    }
    Ok(acc)
}

/// `Delta_h^M f` at every grid point; `None` where the stencil leaves the domain.
pub fn difference_field(f: &GridFunction, m: u32, h: &[f64]) -> Vec<Option<f64>> {
    let grid = f.grid();
    let d = grid.dim;
    (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            delta_m(f, m, h, &p[..d]).ok()
        })
        .collect()
}

/// Midpoint nodes of `(-r, r)` with spacing `max(dx, 2r / MAX_H_NODES)`.
fn h_nodes_1d(r: f64, dx: f64) -> Vec<f64> {
    let count = ((2.0 * r / dx).round() as usize).clamp(1, MAX_H_NODES);
    let step = 2.0 * r / count as f64;
    (0..count).map(|i| -r + (i as f64 + 0.5) * step).collect()
}

/// Tabulated `|Delta_h^M f|` over a displacement box `r (-1,1)^n`.
#[derive(Clone, Debug)]
pub struct LocalDifferences {
    grid: Grid,
    order: u32,
    radius: f64,
    h_nodes: usize,
    sum: IntegralTable,
    count: IntegralTable,
}

impl LocalDifferences {
    pub fn new(f: &GridFunction, m: u32, radius: f64) -> Result<Self> {
        let grid = *f.grid();
        if m == 0 {
            return Err(Error::PreconditionFailed("difference order must be at least 1".into()));
        }
        if radius < grid.spacing() * (1.0 - 1e-9) {
            return Err(Error::ResolutionExceeded {
                level: -(radius.log2().round() as i32),
                spacing: grid.spacing(),
            });
        }
        let d = grid.dim;
        let axis = h_nodes_1d(radius, grid.spacing());
        let hs: Vec<[f64; 2]> = if d == 1 {
            axis.iter().map(|&h| [h, 0.0]).collect()
        } else {
            axis.iter().flat_map(|&a| axis.iter().map(move |&b| [a, b])).collect()
        };
        let len = grid.len();
        let fields = crate::par::map(&hs, |h| difference_field(f, m, &h[..d]));
        let mut s = vec![0.0; len];
        let mut c = vec![0.0; len];
        for field in &fields {
            for (i, v) in field.iter().enumerate() {
                if let Some(v) = v {
                    s[i] += v.abs();
                    c[i] += 1.0;
                }
            }
        }
        Ok(LocalDifferences {
            grid,
            order: m,
            radius,
            h_nodes: hs.len(),
            sum: IntegralTable::new(&grid, &s),
            count: IntegralTable::new(&grid, &c),
        })
    }

    /// Displacement box `2^{-k} (-1,1)^n`.
    pub fn for_level(f: &GridFunction, m: u32, k: i32) -> Result<Self> {
        Self::new(f, m, 2f64.powi(-k))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn h_nodes(&self) -> usize {
        self.h_nodes
    }

    /// Mean of `|Delta_h^M f(y)|` over valid pairs with `y` in the box.
    pub fn mean(&self, lo: &[f64], hi: &[f64]) -> Option<f64> {
        let c = self.count.box_integral(lo, hi);
        (c > 0.0).then(|| self.sum.box_integral(lo, hi) / c)
    }

    /// Share of `(y, h)` pairs over the box whose stencil stays in the domain.
    pub fn valid_fraction(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let m = crate::grid::clipped_measure(&self.grid, lo, hi);
        if m == 0.0 {
            return 0.0;
        }
        self.count.box_integral(lo, hi) / (m * self.h_nodes as f64)
    }

    /// Whether the box enlarged by `M r` pokes out of the domain.
    pub fn near_boundary(&self, lo: &[f64], hi: &[f64]) -> bool {
        let reach = self.order as f64 * self.radius;
        let l = self.grid.halfwidth;
        (0..self.grid.dim).any(|a| lo[a] - reach < -l || hi[a] + reach > l)
    }

    fn scaled_mean(&self, b: &AxisBox, factor: f64) -> Result<f64> {
        self.mean(&b.lo, &b.hi)
            .map(|v| factor * v)
            .ok_or_else(|| Error::OutOfDomain(b.lo.clone()))
    }

    /// `delta^M(Q) f` for a cube of side `r`.
    pub fn cube(&self, q: &AxisBox) -> Result<f64> {
        self.scaled_mean(q, 2f64.powi(self.grid.dim as i32))
    }

    /// `delta^M(x + r I^n) f`.
    pub fn window(&self, x: &[f64]) -> Result<f64> {
        let b = AxisBox::centered(x, self.radius);
        self.scaled_mean(&b, 4f64.powi(self.grid.dim as i32))
    }

    /// `delta^M(Q_{k,m~}) f` for the expanded cube with `2^{-k} = r`.
    pub fn expanded(&self, c: &DyadicCube) -> Result<f64> {
        self.scaled_mean(&expanded_cube(c), 0.4f64.powi(self.grid.dim as i32))
    }

    /// Window averages at every grid point, with a flag for windows within
    /// `M r` of the boundary.
    pub fn window_field(&self) -> (Vec<f64>, Vec<bool>) {
        let d = self.grid.dim;
        let fac = 4f64.powi(d as i32);
        let r = self.radius;
        (0..self.grid.len())
            .map(|i| {
                let p = self.grid.point(i);
                let (lo, hi) = ([p[0] - r, p[1] - r], [p[0] + r, p[1] + r]);
                let v = self.mean(&lo[..d], &hi[..d]).map_or(0.0, |v| fac * v);
                (v, self.near_boundary(&lo[..d], &hi[..d]))
            })
            .unzip()
    }
}

/// `delta^M(Q) f = l(Q)^{-2n} int_{l(Q) I^n} int_Q |Delta_h^M f(x)| dx dh`.
pub fn delta_avg_cube(f: &GridFunction, q: &AxisBox, m: u32) -> Result<f64> {
    let side = q.hi[0] - q.lo[0];
    if q.lo
        .iter()
        .zip(&q.hi)
        .any(|(a, b)| ((b - a) - side).abs() > 1e-12 * side)
    {
        return Err(Error::PreconditionFailed(format!("{q:?} is not a cube")));
    }
    LocalDifferences::new(f, m, side)?.cube(q)
}

/// `delta^M(x + 2^{-k} I^n) f = 2^{2kn} int_{2^{-k} I^n} int_{x + 2^{-k} I^n} |Delta_h^M f(y)| dy dh`.
pub fn delta_avg_window(f: &GridFunction, x: &[f64], k: i32, m: u32) -> Result<f64> {
    LocalDifferences::for_level(f, m, k)?.window(x)
}

/// `delta^M(Q_{k,m~}) f` with the prefactor `l(Q_{k,m~})^{-2n} = (5 2^{-k})^{-2n}`
/// and `h` over `2^{-k} I^n`.
pub fn delta_avg_expanded(f: &GridFunction, k: i32, index: &[i64], m: u32) -> Result<f64> {
    LocalDifferences::for_level(f, m, k)?.expanded(&DyadicCube::new(k, index.to_vec()))
}

/// Convenience for `delta^M(Q_{k,m}) f`.
pub fn delta_avg_dyadic(f: &GridFunction, c: &DyadicCube, m: u32) -> Result<f64> {
    LocalDifferences::for_level(f, m, c.level)?.cube(&cube_box(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(f: impl Fn(f64) -> f64 + Send + Sync + 'static, l: f64, n: usize) -> GridFunction {
        GridFunction::from_fn(Grid::line(l, n), move |x| f(x[0])).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(5, 5), 1.0);
    }

    #[test]
    fn pointwise_examples() {
        let lin = line(|x| x, 8.0, 1024);
        for h in [0.3, -1.25] {
            assert_relative_eq!(delta_m(&lin, 1, &[h], &[0.7]).unwrap(), h, epsilon = 1e-12);
        }
        // x^2 is not reproduced by linear interpolation off the grid, so use
        // grid-aligned displacements.
        let sq = line(|x| x * x, 8.0, 1024);
        let dx = sq.grid().spacing();
        let x0 = sq.grid().coord(300);
        let h = 7.0 * dx;
        assert_relative_eq!(delta_m(&sq, 2, &[h], &[x0]).unwrap(), 2.0 * h * h, max_relative = 1e-9);
        assert!(matches!(delta_m(&sq, 2, &[4.0], &[1.0]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn constants_vanish_exactly() {
        let c = line(|_| 3.0, 8.0, 512);
        assert_eq!(
            delta_avg_cube(&c, &cube_box(&DyadicCube::new(0, vec![0])), 1).unwrap(),
            0.0
        );
        assert_eq!(delta_avg_window(&c, &[0.1], 2, 2).unwrap(), 0.0);
        assert_eq!(delta_avg_expanded(&c, 1, &[1], 3).unwrap(), 0.0);
    }

    #[test]
    fn linear_annihilated_by_second_difference() {
        let f = line(|x| 2.0 * x - 1.0, 8.0, 4096);
        let v = delta_avg_cube(&f, &cube_box(&DyadicCube::new(1, vec![1])), 2).unwrap();
        assert!(v < 1e-9, "{v}");
        assert!(delta_avg_window(&f, &[-0.4], 3, 2).unwrap() < 1e-9);
    }

    #[test]
    fn square_on_unit_cube_matches_oracle() {
        // scipy dblquad of |2xh + h^2| over h in (-1,1), x in [0,1]: 1.125
        let f = line(|x| x * x, 8.0, 4096);
        let v = delta_avg_cube(&f, &cube_box(&DyadicCube::new(0, vec![0])), 1).unwrap();
        assert_relative_eq!(v, 1.125, max_relative = 2e-3);
    }

    #[test]
    fn expanded_sine_matches_oracle() {
        // (5/4)^{-2} int_{-1/4}^{1/4} int_{-1/2}^{3/4} |sin(z+h) - sin z| dz dh
        let f = line(f64::sin, 8.0, 4096);
        let v = delta_avg_expanded(&f, 2, &[0], 1).unwrap();
        assert_relative_eq!(v, 0.046_201_186_921_675_35, max_relative = 2e-3);
    }

    #[test]
    fn window_decays_like_order() {
        // scipy oracles at x = 0.3 for k = 3, 4, 5
        let f = line(f64::sin, 8.0, 4096);
        let m1 = [
            0.237_902_632_939_313_4,
            0.119_300_488_460_922_09,
            0.059_693_954_715_863_244,
        ];
        let m2 = [
            0.006_107_124_091_312_11,
            0.001_536_063_781_215_569_5,
            0.000_384_597_824_183_110_6,
        ];
        for (m, oracle) in [(1, m1), (2, m2)] {
            let got: Vec<f64> = (3..=5).map(|k| delta_avg_window(&f, &[0.3], k, m).unwrap()).collect();
            for (g, o) in got.iter().zip(oracle) {
                assert_relative_eq!(*g, o, max_relative = 2e-2);
            }
            let slope = (got[2] / got[1]).log2();
            assert!((slope + m as f64).abs() < 0.05, "M = {m}: slope {slope}");
        }
    }

    #[test]
    fn boundary_pairs_are_dropped() {
        let f = line(f64::cos, 4.0, 256);
        let ld = LocalDifferences::for_level(&f, 2, 0).unwrap();
        let frac = ld.valid_fraction(&[3.0], &[4.0]);
        assert!(frac > 0.0 && frac < 1.0, "{frac}");
        assert!(ld.near_boundary(&[3.0], &[4.0]));
        assert_relative_eq!(ld.valid_fraction(&[-1.0], &[1.0]), 1.0);
        assert!(ld.window(&[3.9]).unwrap().is_finite());
    }

    #[test]
    fn two_dimensional_constant_and_linear() {
        let g = Grid::new(2, 4.0, 128).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0] - 2.0 * x[1]).unwrap();
        let q = cube_box(&DyadicCube::new(0, vec![0, -1]));
        assert!(delta_avg_cube(&f, &q, 2).unwrap() < 1e-9);
        let first = delta_avg_cube(&f, &q, 1).unwrap();
        assert!(first > 0.0);
    }

    #[test]
    fn resolution_limit() {
        let f = line(f64::sin, 8.0, 64);
        assert!(matches!(
            delta_avg_window(&f, &[0.0], 4, 1),
            Err(Error::ResolutionExceeded { .. })
        ));
    }
}
