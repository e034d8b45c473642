//! Named test functions and seeded random families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

/// `exp(-1/t)` for `t > 0`, else `0`.
fn e(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step from `0` (at `t <= 0`) to `1` (at `t >= 1`).
fn smooth_step(t: f64) -> f64 {
    let (a, b) = (e(t), e(1.0 - t));
    a / (a + b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Fixture {
    Zero,
    /// `exp(-|x - center|^2 / width^2)`; an empty center means the origin.
    Gaussian {
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default = "one")]
        width: f64,
    },
    /// Tensor mollifier `prod_a exp(1 - 1 / (1 - (x_a / radius)^2))` on `|x_a| < radius`.
    Bump {
        #[serde(default = "one")]
        radius: f64,
    },
    /// `cos(freq x_1) exp(-|x|^2 / width^2)`.
    SinePacket {
        freq: f64,
        width: f64,
    },
    /// Tensor product of smooth steps rising on `[a - eps, a + eps]` and
    /// falling on `[b - eps, b + eps]`, per axis.
    SmoothIndicator {
        a: f64,
        b: f64,
        eps: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Fixture {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config("function", m));
        match self {
            Fixture::Gaussian { width, .. } if !(*width > 0.0) => bad(format!("width {width} must be positive")),
            Fixture::Bump { radius } if !(*radius > 0.0) => bad(format!("radius {radius} must be positive")),
            Fixture::SinePacket { width, .. } if !(*width > 0.0) => bad(format!("width {width} must be positive")),
            Fixture::SmoothIndicator { a, b, eps } if !(*eps > 0.0 && a + eps < b - eps) => bad(format!(
                "need eps > 0 and a + eps < b - eps, got a = {a}, b = {b}, eps = {eps}"
            )),
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Fixture::Zero => 0.0,
            Fixture::Gaussian { center, width } => {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v - center.get(i).copied().unwrap_or(0.0)).powi(2))
                    .sum();
                (-r2 / (width * width)).exp()
            }
            Fixture::Bump { radius } => x
                .iter()
                .map(|v| {
                    let u = v / radius;
                    if u.abs() < 1.0 {
                        (1.0 - 1.0 / (1.0 - u * u)).exp()
                    } else {
                        0.0
                    }
                })
                .product(),
            Fixture::SinePacket { freq, width } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                (freq * x[0]).cos() * (-r2 / (width * width)).exp()
            }
            Fixture::SmoothIndicator { a, b, eps } => x
                .iter()
                .map(|v| smooth_step((v - a + eps) / (2.0 * eps)) * smooth_step((b + eps - v) / (2.0 * eps)))
                .product(),
        }
    }

    /// Samples on `grid`, keeping the closed form.
    pub fn build(&self, grid: Grid) -> Result<GridFunction> {
        self.validate()?;
        let me = self.clone();
        GridFunction::from_fn(grid, move |x| me.value(x))
    }

    /// Gaussian, bump, sine packet, shifted Gaussian, smooth indicator.
    pub fn standard_family() -> Vec<Fixture> {
        vec![
            Fixture::Gaussian {
                center: vec![],
                width: 1.0,
            },
            Fixture::Bump { radius: 1.5 },
            Fixture::SinePacket { freq: 3.0, width: 1.0 },
            Fixture::Gaussian {
                center: vec![0.7, 0.7],
                width: 0.6,
            },
            Fixture::SmoothIndicator {
                a: -1.0,
                b: 1.0,
                eps: 0.25,
            },
        ]
    }
}

/// `count` smooth indicators with random centers, widths and heights.
pub fn random_indicator_family(grid: Grid, seed: u64, count: usize) -> Result<Vec<GridFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.halfwidth;
    (0..count)
        .map(|_| {
            let c = rng.gen_range(-l / 2.0..l / 2.0);
            let w = rng.gen_range(0.25..2.0);
            let h = rng.gen_range(0.5..2.0);
            let fix = Fixture::SmoothIndicator {
                a: c - w / 2.0,
                b: c + w / 2.0,
                eps: w / 8.0,
            };
            Ok(fix.build(grid)?.scaled(h))
        })
        .collect()
}

/// `count` sums of three Gaussians with random centers, widths and signed amplitudes.
pub fn random_smooth_family(grid: Grid, seed: u64, count: usize) -> Result<Vec<GridFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = grid.halfwidth;
    let d = grid.dim;
    (0..count)
        .map(|_| {
            let parts: Vec<(Vec<f64>, f64, f64)> = (0..3)
                .map(|_| {
                    let c = (0..d).map(|_| rng.gen_range(-l / 3.0..l / 3.0)).collect();
                    (c, rng.gen_range(0.3..1.5), rng.gen_range(-1.0..1.0))
                })
                .collect();
            GridFunction::from_fn(grid, move |x| {
                parts
                    .iter()
                    .map(|(c, w, a)| {
                        let r2: f64 = x.iter().zip(c).map(|(v, c)| (v - c).powi(2)).sum();
                        a * (-r2 / (w * w)).exp()
                    })
                    .sum()
            })
        })
        .collect()
}
