//! Dyadic cubes `Q_{k,m} = 2^{-k}([0,1)^n + m)`, boxes, and midpoint-rule
//! cube averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{clipped_measure, for_each_cell_in, Grid, GridFunction, IntegralTable};

/// Relative slack used when comparing box edges against cell edges.
const EDGE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Vec<i64>,
}

impl DyadicCube {
    pub fn new(level: i32, index: impl Into<Vec<i64>>) -> Self {
        DyadicCube {
            level,
            index: index.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Side length `2^{-k}`; exact for every representable level.
    pub fn side(&self) -> f64 {
        2f64.powi(-self.level)
    }

    pub fn corner(&self) -> Vec<f64> {
        let s = self.side();
        self.index.iter().map(|&m| m as f64 * s).collect()
    }

    /// The unique cube at `level <= self.level` containing this one.
    pub fn ancestor(&self, level: i32) -> DyadicCube {
        assert!(level <= self.level);
        let shift = (self.level - level) as u32;
        DyadicCube {
            level,
            index: self.index.iter().map(|&m| m >> shift).collect(),
        }
    }
}

/// Axis-aligned box with per-axis bounds `lo < hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::InvalidGrid(format!("empty box {lo:?}..{hi:?}")));
        }
        Ok(AxisBox { lo, hi })
    }

    /// The centered cube `center + side/2 * (-1, 1)^n`.
    pub fn centered(center: &[f64], half_side: f64) -> Self {
        AxisBox {
            lo: center.iter().map(|c| c - half_side).collect(),
            hi: center.iter().map(|c| c + half_side).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn measure(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn domain(grid: &Grid) -> Self {
        let l = grid.halfwidth;
        AxisBox {
            lo: vec![-l; grid.dim],
            hi: vec![l; grid.dim],
        }
    }

    pub fn contains_box(&self, other: &AxisBox) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b) && self.hi.iter().zip(&other.hi).all(|(a, b)| b <= a)
    }

    /// Whether the box pokes out of the sampled domain.
    pub fn straddles(&self, grid: &Grid) -> bool {
        let l = grid.halfwidth;
        self.lo.iter().any(|&a| a < -l) || self.hi.iter().any(|&b| b > l)
    }
}

/// `[2^{-k} m_i, 2^{-k}(m_i + 1))` per axis.
pub fn cube_box(c: &DyadicCube) -> AxisBox {
    let s = c.side();
    AxisBox {
        lo: c.index.iter().map(|&m| m as f64 * s).collect(),
        hi: c.index.iter().map(|&m| (m + 1) as f64 * s).collect(),
    }
}

/// `((m_i - 2) 2^{-k}, (m_i + 3) 2^{-k})` per axis, side `5 * 2^{-k}`.
pub fn expanded_cube(c: &DyadicCube) -> AxisBox {
    let s = c.side();
    AxisBox {
        lo: c.index.iter().map(|&m| (m - 2) as f64 * s).collect(),
        hi: c.index.iter().map(|&m| (m + 3) as f64 * s).collect(),
    }
}

fn check_dim(grid: &Grid, b: &AxisBox) -> Result<()> {
    if b.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: b.dim(),
        });
    }
    Ok(())
}

/// Whether `b` clipped to the domain contains at least one whole grid cell.
pub fn has_full_cell(grid: &Grid, b: &AxisBox) -> bool {
    let nf = grid.n as f64;
    (0..grid.dim).all(|a| {
        let u0 = grid.cell_position(b.lo[a]).clamp(0.0, nf);
        let u1 = grid.cell_position(b.hi[a]).clamp(0.0, nf);
        (u1 + EDGE_EPS).floor() - (u0 - EDGE_EPS).ceil() >= 1.0
    })
}

/// `|b ∩ domain|^{-1} ∫_{b ∩ domain} |f|`.
pub fn box_average(f: &GridFunction, b: &AxisBox) -> Result<f64> {
    box_lp_average(f, b, 1.0)
}

/// `M_{b,p}(f) = (|b|^{-1} ∫_b |f|^p)^{1/p}` over `b ∩ domain`; `p = inf`
/// gives the max of `|f|` over samples whose cells meet `b`.
pub fn box_lp_average(f: &GridFunction, b: &AxisBox, p: f64) -> Result<f64> {
    let grid = f.grid();
    check_dim(grid, b)?;
    if !(p > 0.0) {
        return Err(Error::InvalidExponent(format!("p = {p} must be positive")));
    }
    if !has_full_cell(grid, b) {
        return Err(Error::EmptyIntersection);
    }
    if p.is_infinite() {
        let mut m = 0.0_f64;
        for_each_cell_in(grid, &b.lo, &b.hi, |i| m = m.max(f.samples()[i].abs()));
        return Ok(m);
    }
    let table = IntegralTable::from_fn(grid, f.samples(), |v| v.abs().powf(p));
    let mass = clipped_measure(grid, &b.lo, &b.hi);
    Ok((table.box_integral(&b.lo, &b.hi) / mass).powf(1.0 / p))
}

/// All level-`k` dyadic cubes meeting `b` in a set of positive measure.
pub fn cubes_covering(grid: &Grid, b: &AxisBox, k: i32) -> Result<Vec<DyadicCube>> {
    check_dim(grid, b)?;
    let side = 2f64.powi(-k);
    if side < grid.spacing() * (1.0 - EDGE_EPS) {
        return Err(Error::ResolutionExceeded {
            level: k,
            spacing: grid.spacing(),
        });
    }
    let ranges: Vec<(i64, i64)> = (0..b.dim())
        .map(|a| {
            let first = (b.lo[a] / side).floor() as i64;
            let last = (b.hi[a] / side).ceil() as i64;
            (first, last)
        })
        .collect();
    let mut out = Vec::new();
    match b.dim() {
        1 => {
            for m in ranges[0].0..ranges[0].1 {
                out.push(DyadicCube::new(k, vec![m]));
            }
        }
        _ => {
            for m0 in ranges[0].0..ranges[0].1 {
                for m1 in ranges[1].0..ranges[1].1 {
                    out.push(DyadicCube::new(k, vec![m0, m1]));
                }
            }
        }
    }
    Ok(out)
}

/// Level-`k` cubes tiling the domain; cubes poking out are clipped by the
/// callers' quadrature.
pub fn domain_cubes(grid: &Grid, k: i32) -> Result<Vec<DyadicCube>> {
    cubes_covering(grid, &AxisBox::domain(grid), k)
}

/// Finest level whose cubes hold at least `cells` grid cells per axis.
pub fn finest_level(grid: &Grid, cells: usize) -> i32 {
    -((grid.spacing() * cells as f64).log2().ceil() as i32)
}

/// Coarsest level whose cubes fit in the domain: `-floor(log2 L)`.
pub fn coarsest_level(grid: &Grid) -> i32 {
    -(grid.halfwidth.log2().floor() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cube_boxes() {
        assert_eq!(
            cube_box(&DyadicCube::new(0, vec![0])),
            AxisBox {
                lo: vec![0.0],
                hi: vec![1.0]
            }
        );
        assert_eq!(
            cube_box(&DyadicCube::new(2, vec![3])),
            AxisBox {
                lo: vec![0.75],
                hi: vec![1.0]
            }
        );
        assert_eq!(
            cube_box(&DyadicCube::new(-1, vec![-1])),
            AxisBox {
                lo: vec![-2.0],
                hi: vec![0.0]
            }
        );
    }

    #[test]
    fn expanded_boxes() {
        assert_eq!(
            expanded_cube(&DyadicCube::new(0, vec![0])),
            AxisBox {
                lo: vec![-2.0],
                hi: vec![3.0]
            }
        );
        assert_eq!(
            expanded_cube(&DyadicCube::new(1, vec![4])),
            AxisBox {
                lo: vec![1.0],
                hi: vec![3.5]
            }
        );
        let b = expanded_cube(&DyadicCube::new(0, vec![0, 0]));
        assert_eq!(b.lo, vec![-2.0, -2.0]);
        assert_eq!(b.hi, vec![3.0, 3.0]);
        assert_relative_eq!(b.measure(), 25.0);
    }

    #[test]
    fn ancestor_contains_child() {
        let c = DyadicCube::new(3, vec![-5, 6]);
        let a = c.ancestor(1);
        assert_eq!(a, DyadicCube::new(1, vec![-2, 1]));
        assert!(cube_box(&a).contains_box(&cube_box(&c)));
    }

    #[test]
    fn averages_of_simple_functions() {
        let g = Grid::line(8.0, 1024);
        let unit = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        let c = GridFunction::sample(g, |_| -2.5).unwrap();
        assert_relative_eq!(box_average(&c, &unit).unwrap(), 2.5, epsilon = 1e-12);
        assert_relative_eq!(box_lp_average(&c, &unit, 3.0).unwrap(), 2.5, epsilon = 1e-12);

        let lin = GridFunction::sample(g, |x| x[0]).unwrap();
        assert_relative_eq!(box_average(&lin, &unit).unwrap(), 0.5, epsilon = 1e-12);
        let dx = g.spacing();
        assert_relative_eq!(
            box_lp_average(&lin, &unit, 2.0).unwrap(),
            (1.0f64 / 3.0).sqrt(),
            epsilon = dx * dx
        );

        let ind = GridFunction::sample(g, |x| if (0.0..=0.5).contains(&x[0]) { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(box_lp_average(&ind, &unit, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_average_matches_dense_oracle() {
        // Oracle: composite midpoint rule with 10^6 nodes, independent of grid code.
        let nodes = 1_000_000;
        let oracle: f64 = (0..nodes)
            .map(|j| {
                let x = (j as f64 + 0.5) / nodes as f64;
                x * x
            })
            .sum::<f64>()
            / nodes as f64;
        let g = Grid::line(8.0, 4096);
        let f = GridFunction::sample(g, |x| x[0] * x[0]).unwrap();
        let got = box_average(&f, &AxisBox::new(vec![0.0], vec![1.0]).unwrap()).unwrap();
        assert!((got - oracle).abs() < 2.0 * g.spacing().powi(2));
        assert!((got - 1.0 / 3.0).abs() < 2.0 * g.spacing().powi(2));
    }

    #[test]
    fn empty_intersection_is_an_error() {
        let g = Grid::line(1.0, 8);
        let f = GridFunction::zeros(g);
        let outside = AxisBox::new(vec![2.0], vec![3.0]).unwrap();
        assert_eq!(box_average(&f, &outside), Err(Error::EmptyIntersection));
        let sliver = AxisBox::new(vec![0.01], vec![0.2]).unwrap();
        assert_eq!(box_average(&f, &sliver), Err(Error::EmptyIntersection));
    }

    #[test]
    fn covering_examples() {
        let g = Grid::line(4.0, 64);
        let b = AxisBox::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(
            cubes_covering(&g, &b, 1).unwrap(),
            vec![DyadicCube::new(1, vec![0]), DyadicCube::new(1, vec![1])]
        );
        let b = AxisBox::new(vec![-1.0], vec![1.0]).unwrap();
        assert_eq!(
            cubes_covering(&g, &b, 0).unwrap(),
            vec![DyadicCube::new(0, vec![-1]), DyadicCube::new(0, vec![0])]
        );
        let g2 = Grid::new(2, 4.0, 64).unwrap();
        let sq = AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(cubes_covering(&g2, &sq, 1).unwrap().len(), 4);
        assert!(matches!(
            cubes_covering(&g, &b, 5),
            Err(Error::ResolutionExceeded { level: 5, .. })
        ));
    }

    #[test]
    fn domain_partition_measure() {
        let g = Grid::new(2, 8.0, 256).unwrap();
        for k in -3..=4 {
            let total: f64 = domain_cubes(&g, k).unwrap().iter().map(|c| cube_box(c).measure()).sum();
            assert_eq!(total, 256.0);
        }
    }

    #[test]
    fn level_bounds() {
        let g = Grid::line(8.0, 4096);
        assert_eq!(coarsest_level(&g), -3);
        // dx = 1/256; four cells = 1/64
        assert_eq!(finest_level(&g, 4), 6);
        assert_eq!(finest_level(&g, 1), 8);
    }
}
