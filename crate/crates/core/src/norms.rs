//! Difference-based norms: `L~_p(t_0)`, the window norms `B~` / `F~` and
//! the starred dyadic-cube norms.

use serde::{Deserialize, Serialize};

use crate::differences::LocalDifferences;
use crate::dyadic::{cube_box, expanded_cube, AxisBox};
use crate::error::{Error, Result};
use crate::grid::{lp_norm, Grid, GridFunction, IntegralTable};
use crate::lp_fourier::shared_k_max;
use crate::weights::{level_cube_norms, sigma1_of, WeightSequence, XClassParams};

/// Runs whose boundary fraction exceeds this are flagged unreliable.
pub const BOUNDARY_LIMIT: f64 = 0.20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    B,
    F,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceParams {
    pub kind: SpaceKind,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "M", alias = "m")]
    pub m: u32,
    pub alpha1: f64,
    pub alpha2: f64,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default, with = "crate::floats::option")]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub k_max: Option<u32>,
}

fn one() -> f64 {
    1.0
}

impl SpaceParams {
    /// `theta = 1`, `sigma2 = p`, `K` from the grid.
    pub fn new(kind: SpaceKind, p: f64, q: f64, m: u32, alpha1: f64, alpha2: f64) -> Self {
        SpaceParams {
            kind,
            p,
            q,
            m,
            alpha1,
            alpha2,
            theta: 1.0,
            sigma2: None,
            k_max: None,
        }
    }

    /// Hard errors for out-of-range exponents; the returned strings are
    /// warnings (the order condition `0 < alpha1 <= alpha2 < M`).
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("space.{field}"), msg));
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return bad("p", format!("p = {} must lie in [1, inf)", self.p));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return bad("q", format!("q = {} must lie in [1, inf)", self.q));
        }
        if self.m == 0 {
            return bad("M", "difference order M must be at least 1".into());
        }
        if !(self.theta >= 1.0 && self.theta <= self.p) {
            return bad(
                "theta",
                format!("theta = {} must lie in [1, p] = [1, {}]", self.theta, self.p),
            );
        }
        if self.sigma2() < self.p {
            return bad(
                "sigma2",
                format!("sigma2 = {} must be at least p = {}", self.sigma2(), self.p),
            );
        }
        let mut warnings = Vec::new();
        if !(0.0 < self.alpha1 && self.alpha1 <= self.alpha2 && self.alpha2 < self.m as f64) {
            warnings.push(format!(
                "difference norms need 0 < alpha1 <= alpha2 < M; got alpha = ({}, {}), M = {}",
                self.alpha1, self.alpha2, self.m
            ));
        }
        Ok(warnings)
    }

    /// `sigma1 = theta (p / theta)'`.
    pub fn sigma1(&self) -> f64 {
        if self.theta >= self.p {
            return f64::INFINITY;
        }
        sigma1_of(self.theta, self.p).unwrap_or(f64::INFINITY)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2.unwrap_or(self.p)
    }

    pub fn resolved_k_max(&self, grid: &Grid) -> u32 {
        self.k_max.unwrap_or_else(|| shared_k_max(grid))
    }

    pub fn xclass_params(&self) -> XClassParams {
        XClassParams {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            sigma1: self.sigma1(),
            sigma2: self.sigma2(),
            p: self.p,
        }
    }
}

/// A norm value with the diagnostics that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub value: f64,
    /// The zero-order term (`L~_p` for window norms, cube `L_1` sum for starred norms).
    pub zero_order: f64,
    /// Per-level `L_p` size of the level-`k` term, `k = 1..=K`.
    pub levels: Vec<f64>,
    pub k_max: u32,
    /// Share of the level-`K` term in the `l_q` sum of level sizes.
    pub tail_fraction: f64,
    /// Share of the `p`-th power mass from windows or cubes reaching outside the domain.
    pub boundary_fraction: f64,
    pub unreliable: bool,
}

/// `(int t_0^p(x) ||f||_{L_1(x + I^n)}^p dx)^{1/p}`.
pub fn ltilde_norm(f: &GridFunction, t0: &GridFunction, p: f64) -> Result<f64> {
    Ok(ltilde_parts(f, t0, p)?.0)
}

/// Value and the share of `p`-th power mass from clipped windows.
fn ltilde_parts(f: &GridFunction, t0: &GridFunction, p: f64) -> Result<(f64, f64)> {
    let grid = *f.grid();
    if *t0.grid() != grid {
        return Err(Error::InvalidGrid("t_0 and f live on different grids".into()));
    }
    let d = grid.dim;
    let l = grid.halfwidth;
    let table = IntegralTable::from_fn(&grid, f.samples(), f64::abs);
    let (mut total, mut clipped) = (0.0, 0.0);
    for i in 0..grid.len() {
        let x = grid.point(i);
        let (lo, hi) = ([x[0] - 1.0, x[1] - 1.0], [x[0] + 1.0, x[1] + 1.0]);
        let v = (t0.samples()[i] * table.box_integral(&lo[..d], &hi[..d])).powf(p);
        total += v;
        if (0..d).any(|a| lo[a] < -l || hi[a] > l) {
            clipped += v;
        }
    }
    let frac = if total > 0.0 { clipped / total } else { 0.0 };
    Ok(((total * grid.cell_volume()).powf(1.0 / p), frac))
}

fn check_levels(f: &GridFunction, t: &WeightSequence, sp: &SpaceParams) -> Result<u32> {
    sp.validate()?;
    let grid = f.grid();
    if t.grid() != grid {
        return Err(Error::InvalidGrid(
            "weights and function live on different grids".into(),
        ));
    }
    let k_max = sp.resolved_k_max(grid);
    if 2f64.powi(-(k_max as i32)) < 4.0 * grid.spacing() * (1.0 - 1e-12) {
        return Err(Error::ResolutionExceeded {
            level: k_max as i32,
            spacing: grid.spacing(),
        });
    }
    t.level(k_max as usize)?;
    Ok(k_max)
}

fn finish(zero_order: f64, levels: Vec<f64>, k_max: u32, q: f64, agg: f64, boundary: f64) -> NormReport {
    let lq: f64 = levels.iter().map(|v| v.powf(q)).sum();
    let tail = match levels.last() {
        Some(v) if lq > 0.0 => v.powf(q) / lq,
        _ => 0.0,
    };
    NormReport {
        value: agg + zero_order,
        zero_order,
        levels,
        k_max,
        tail_fraction: tail,
        boundary_fraction: boundary,
        unreliable: boundary > BOUNDARY_LIMIT,
    }
}

/// `B~`: `(sum_{k=1}^K ||t_k delta^M(. + 2^{-k} I^n) f||_p^q)^{1/q} + ||f||_{L~_p(t_0)}`;
/// `F~`: `||(sum_k t_k^q delta^M(. + 2^{-k} I^n)f^q)^{1/q}||_p + ||f||_{L~_p(t_0)}`.
pub fn diff_norm(f: &GridFunction, t: &WeightSequence, sp: &SpaceParams) -> Result<f64> {
    Ok(diff_norm_report(f, t, sp)?.value)
}

pub fn diff_norm_report(f: &GridFunction, t: &WeightSequence, sp: &SpaceParams) -> Result<NormReport> {
    let k_max = check_levels(f, t, sp)?;
    let grid = *f.grid();
    let vol = grid.cell_volume();
    let (p, q) = (sp.p, sp.q);
    let (zero, zero_clip) = ltilde_parts(f, t.level(0)?, p)?;

    let ks: Vec<u32> = (1..=k_max).collect();
    let fields = crate::par::map(&ks, |&k| -> Result<(Vec<f64>, Vec<bool>)> {
        let ld = LocalDifferences::for_level(f, sp.m, k as i32)?;
        let (w, flag) = ld.window_field();
        let tk = t.levels()[k as usize].samples();
        Ok((w.iter().zip(tk).map(|(w, t)| w * t).collect(), flag))
    });
    let mut levels = Vec::with_capacity(ks.len());
    let mut acc = vec![0.0; grid.len()];
    let (mut mass, mut flagged) = (0.0, 0.0);
    for field in fields {
        let (w, flag) = field?;
        for (i, v) in w.iter().enumerate() {
            let vp = v.powf(p);
            mass += vp;
            if flag[i] {
                flagged += vp;
            }
            if sp.kind == SpaceKind::F {
                acc[i] += v.powf(q);
            }
        }
        levels.push(lp_norm(&w, p, vol));
    }
    let agg = match sp.kind {
        SpaceKind::B => levels.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q),
        SpaceKind::F => {
            acc.iter_mut().for_each(|a| *a = a.powf(1.0 / q));
            lp_norm(&acc, p, vol)
        }
    };
    let boundary = if mass > 0.0 { flagged / mass } else { zero_clip };
    Ok(finish(zero, levels, k_max, q, agg, boundary))
}

/// Starred norms over dyadic cubes: `B~*` with `delta^M(Q_{k,m})`, `F~*` with
/// `2^{kn/p} t_{k,m} delta^M(Q_{k,m~})` on `Q_{k,m}`; both plus
/// `(sum_m t_{0,m}^p ||f||_{L_1(Q_{0,m})}^p)^{1/p}`.
pub fn star_norm(f: &GridFunction, t: &WeightSequence, sp: &SpaceParams) -> Result<f64> {
    Ok(star_norm_report(f, t, sp)?.value)
}

pub fn star_norm_report(f: &GridFunction, t: &WeightSequence, sp: &SpaceParams) -> Result<NormReport> {
    let k_max = check_levels(f, t, sp)?;
    let grid = *f.grid();
    let d = grid.dim;
    let vol = grid.cell_volume();
    let (p, q) = (sp.p, sp.q);
    let tp = WeightSequence::from_levels(t.levels().to_vec(), p)?;

    let abs = IntegralTable::from_fn(&grid, f.samples(), f64::abs);
    let zero = level_cube_norms(&tp, 0)?
        .iter()
        .map(|(c, t0)| {
            let b = cube_box(c);
            (t0 * abs.box_integral(&b.lo, &b.hi)).powf(p)
        })
        .sum::<f64>()
        .powf(1.0 / p);

    let ks: Vec<u32> = (1..=k_max).collect();
    let per_level = crate::par::map(&ks, |&k| -> Result<(Vec<f64>, f64, f64, f64)> {
        let ld = LocalDifferences::for_level(f, sp.m, k as i32)?;
        let norms = level_cube_norms(&tp, k as usize)?;
        let side = 2f64.powi(-(k as i32));
        let scale = 2f64.powf(k as f64 * d as f64 / p);
        let (mut sum, mut flagged) = (0.0, 0.0);
        let mut cell_terms = Vec::new();
        let l = grid.halfwidth;
        let outside = |b: &AxisBox| (0..d).any(|a| b.lo[a] < -l || b.hi[a] > l);
        match sp.kind {
            SpaceKind::B => {
                for (c, tkm) in &norms {
                    let b = cube_box(c);
                    let v = (tkm * ld.cube(&b)?).powf(p);
                    sum += v;
                    if ld.near_boundary(&b.lo, &b.hi) {
                        flagged += v;
                    }
                }
                Ok((cell_terms, sum.powf(1.0 / p), sum, flagged))
            }
            SpaceKind::F => {
                // cube-to-cell ownership: cell centers never sit on cube faces
                cell_terms = vec![0.0; grid.len()];
                let mut value = std::collections::HashMap::with_capacity(norms.len());
                for (c, tkm) in &norms {
                    let e = expanded_cube(c);
                    let v = scale * tkm * ld.expanded(c)?;
                    let mass = v.powf(p) * side.powi(d as i32);
                    sum += mass;
                    if outside(&e) {
                        flagged += mass;
                    }
                    value.insert(c.index.clone(), v.powf(q));
                }
                let mut key = vec![0i64; d];
                for (i, cell) in cell_terms.iter_mut().enumerate() {
                    let x = grid.point(i);
                    for a in 0..d {
                        key[a] = (x[a] / side).floor() as i64;
                    }
                    *cell = value.get(&key).copied().unwrap_or(0.0);
                }
                let lvl: f64 = cell_terms.iter().map(|v| v.powf(p / q)).sum::<f64>() * vol;
                Ok((cell_terms, lvl.powf(1.0 / p), sum, flagged))
            }
        }
    });

    let mut levels = Vec::with_capacity(ks.len());
    let mut acc = vec![0.0; if sp.kind == SpaceKind::F { grid.len() } else { 0 }];
    let (mut mass, mut flagged) = (0.0, 0.0);
    for r in per_level {
        let (cells, size, m, fl) = r?;
        levels.push(size);
        mass += m;
        flagged += fl;
        for (a, c) in acc.iter_mut().zip(&cells) {
            *a += c;
        }
    }
    let agg = match sp.kind {
        SpaceKind::B => levels.iter().map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q),
        SpaceKind::F => {
            acc.iter_mut().for_each(|a| *a = a.powf(1.0 / q));
            lp_norm(&acc, p, vol)
        }
    };
    let boundary = if mass > 0.0 { flagged / mass } else { 0.0 };
    Ok(finish(zero, levels, k_max, q, agg, boundary))
}
