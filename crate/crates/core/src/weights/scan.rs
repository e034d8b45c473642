//! The cube family used to approximate suprema over all cubes: dyadic cubes
//! plus their translates by one and two thirds of the side along the diagonal.

use serde::{Deserialize, Serialize};

use crate::dyadic::{coarsest_level, has_full_cell, AxisBox, DyadicCube};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Number of diagonal translates per dyadic cube (shifts 0, 1/3, 2/3 of the side).
pub const SHIFTS: u8 = 3;

/// A scanned cube: the dyadic cube it was derived from and its shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanCube {
    pub level: i32,
    pub index: [i64; 2],
    pub shift: u8,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Set when the cube pokes out of the domain and is averaged over the
    /// intersection only.
    pub straddles: bool,
}

impl ScanCube {
    pub fn dyadic(&self, dim: usize) -> DyadicCube {
        DyadicCube::new(self.level, self.index[..dim].to_vec())
    }

    pub fn axis_box(&self, dim: usize) -> AxisBox {
        AxisBox {
            lo: self.lo[..dim].to_vec(),
            hi: self.hi[..dim].to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanFamily {
    pub min_level: i32,
    pub max_level: i32,
    pub shifts: u8,
}

impl ScanFamily {
    /// Levels from the coarsest cube fitting the domain down to `depth`.
    pub fn new(grid: &Grid, depth: i32) -> Result<Self> {
        if 2f64.powi(-depth) < grid.spacing() {
            return Err(Error::ResolutionExceeded {
                level: depth,
                spacing: grid.spacing(),
            });
        }
        let min_level = coarsest_level(grid).min(depth);
        Ok(ScanFamily {
            min_level,
            max_level: depth,
            shifts: SHIFTS,
        })
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<i32> {
        self.min_level..=self.max_level
    }

    /// Cubes of one level that contain at least one full grid cell of the domain.
    pub fn cubes(&self, grid: &Grid, level: i32) -> Vec<ScanCube> {
        let side = 2f64.powi(-level);
        let l = grid.halfwidth;
        let first = (-l / side).floor() as i64 - 1;
        let last = (l / side).ceil() as i64;
        let mut out = Vec::new();
        for shift in 0..self.shifts {
            let off = side * shift as f64 / 3.0;
            let range = first..last;
            let make = |m0: i64, m1: i64| {
                let lo = [m0 as f64 * side + off, m1 as f64 * side + off];
                let hi = [lo[0] + side, lo[1] + side];
                ScanCube {
                    level,
                    index: [m0, m1],
                    shift,
                    lo,
                    hi,
                    straddles: false,
                }
            };
            let mut push = |mut c: ScanCube| {
                let b = c.axis_box(grid.dim);
                if has_full_cell(grid, &b) {
                    c.straddles = b.straddles(grid);
                    out.push(c);
                }
            };
            if grid.dim == 1 {
                for m in range {
                    push(make(m, 0));
                }
            } else {
                for m0 in range.clone() {
                    for m1 in range.clone() {
                        push(make(m0, m1));
                    }
                }
            }
        }
        out
    }
}
