//! Weights, `p`-admissible weight sequences and their class diagnostics.

mod muckenhoupt;
mod scan;
mod xclass;

pub use muckenhoupt::{
    a1_constant, a1_constant_refined, ap_constant, ap_constant_refined, ap_properties_check, ApPropertiesReport,
    ApReport, AP_REFINEMENT_FACTOR,
};
pub use scan::{ScanCube, ScanFamily, SHIFTS};
pub use xclass::{xclass_check, xclass_check_refined, XClassParams, XClassReport};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dyadic::{cube_box, DyadicCube};
use crate::error::{Error, Result};
use crate::grid::{clipped_measure, Grid, GridFunction, IntegralTable};

/// Which point a [`WeightSpec::GeometricLevel`] feeds to its base weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelArgument {
    /// `2^{ks} w(x)`
    #[default]
    Identity,
    /// `2^{ks} w(2^{-k} x)`
    Dilated,
    /// `2^{ks} w(2^{-k})`, the base evaluated at the scalar point `2^{-k}`
    /// (every coordinate equal to `2^{-k}`), constant in `x`.
    Point,
}

/// Closed-form weight descriptors; `k` is the sequence level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant {
        value: f64,
    },
    /// `|x|^beta`
    Power {
        beta: f64,
    },
    /// `|x - center|^delta`
    ShiftedPower {
        center: Vec<f64>,
        delta: f64,
    },
    GeometricLevel {
        s: f64,
        base: Box<WeightSpec>,
        #[serde(default)]
        argument: LevelArgument,
    },
    /// `2^{sk} (1 + k)^b (1 + log(1 + k))^c`
    AdmissibleSeq {
        s: f64,
        b: f64,
        c: f64,
    },
    Product {
        factors: Vec<WeightSpec>,
    },
}

impl WeightSpec {
    /// `2^{ks} w` with `w` evaluated at `x`.
    pub fn geometric(s: f64, base: WeightSpec) -> Self {
        WeightSpec::GeometricLevel {
            s,
            base: Box::new(base),
            argument: LevelArgument::Identity,
        }
    }

    pub fn power(beta: f64) -> Self {
        WeightSpec::Power { beta }
    }

    pub fn shifted_power(center: Vec<f64>, delta: f64) -> Self {
        WeightSpec::ShiftedPower { center, delta }
    }

    /// Raw value without the positivity check.
    pub fn value(&self, k: u32, x: &[f64]) -> f64 {
        match self {
            WeightSpec::Constant { value } => *value,
            WeightSpec::Power { beta } => {
                if *beta == 0.0 {
                    1.0
                } else {
                    norm(x).powf(*beta)
                }
            }
            WeightSpec::ShiftedPower { center, delta } => {
                let d2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| {
                        let c = center.get(i).copied().unwrap_or(0.0);
                        (xi - c) * (xi - c)
                    })
                    .sum();
                if *delta == 0.0 {
                    1.0
                } else {
                    d2.sqrt().powf(*delta)
                }
            }
            WeightSpec::GeometricLevel { s, base, argument } => {
                let scale = 2f64.powf(k as f64 * s);
                let dil = 2f64.powi(-(k as i32));
                let w = match argument {
                    LevelArgument::Identity => base.value(k, x),
                    LevelArgument::Dilated => {
                        let y: Vec<f64> = x.iter().map(|v| v * dil).collect();
                        base.value(k, &y)
                    }
                    LevelArgument::Point => {
                        let y = vec![dil; x.len()];
                        base.value(k, &y)
                    }
                };
                scale * w
            }
            WeightSpec::AdmissibleSeq { s, b, c } => {
                let j = k as f64;
                2f64.powf(s * j) * (1.0 + j).powf(*b) * (1.0 + (1.0 + j).ln()).powf(*c)
            }
            WeightSpec::Product { factors } => factors.iter().map(|f| f.value(k, x)).product(),
        }
    }

    /// Whether every level is constant in `x`.
    pub fn is_constant_in_x(&self) -> bool {
        match self {
            WeightSpec::Constant { .. } | WeightSpec::AdmissibleSeq { .. } => true,
            WeightSpec::Power { beta } => *beta == 0.0,
            WeightSpec::ShiftedPower { delta, .. } => *delta == 0.0,
            WeightSpec::GeometricLevel { base, argument, .. } => {
                *argument == LevelArgument::Point || base.is_constant_in_x()
            }
            WeightSpec::Product { factors } => factors.iter().all(|f| f.is_constant_in_x()),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            WeightSpec::Constant { value } if !(*value > 0.0 && value.is_finite()) => Err(Error::config(
                "weights.value",
                format!("constant weight {value} must be positive"),
            )),
            WeightSpec::ShiftedPower { center, .. } if center.len() != dim => Err(Error::config(
                "weights.center",
                format!("center has {} coordinates, grid dimension is {dim}", center.len()),
            )),
            WeightSpec::GeometricLevel { base, .. } => base.validate(dim),
            WeightSpec::Product { factors } => factors.iter().try_for_each(|f| f.validate(dim)),
            _ => Ok(()),
        }
    }

    /// Closed-form evaluator of level `k`.
    pub fn evaluator(&self, k: u32) -> crate::grid::Evaluator {
        let spec = self.clone();
        Arc::new(move |x: &[f64]| spec.value(k, x))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Evaluates a weight at level `k`, rejecting non-positive or non-finite values.
pub fn eval_weight(spec: &WeightSpec, k: u32, x: &[f64]) -> Result<f64> {
    let v = spec.value(k, x);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonPositiveValue {
            value: v,
            point: x.to_vec(),
        })
    }
}

/// Samples level `k` of a weight on a grid, keeping the closed form.
pub fn sample_weight(spec: &WeightSpec, k: u32, grid: Grid) -> Result<GridFunction> {
    let d = grid.dim;
    let mut samples = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let p = grid.point(i);
        samples.push(eval_weight(spec, k, &p[..d])?);
    }
    Ok(GridFunction::from_samples(grid, samples)?.with_evaluator(spec.evaluator(k)))
}

/// `{t_k}_{k=0..=K}` sampled on a common grid, with the exponent `p`.
#[derive(Clone, Debug)]
pub struct WeightSequence {
    levels: Vec<GridFunction>,
    p: f64,
    spec: Option<WeightSpec>,
}

impl WeightSequence {
    pub fn from_spec(spec: &WeightSpec, grid: Grid, k_max: u32, p: f64) -> Result<Self> {
        spec.validate(grid.dim)?;
        check_p(p)?;
        let levels = (0..=k_max)
            .map(|k| sample_weight(spec, k, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightSequence {
            levels,
            p,
            spec: Some(spec.clone()),
        })
    }

    pub fn from_levels(levels: Vec<GridFunction>, p: f64) -> Result<Self> {
        check_p(p)?;
        let first = levels
            .first()
            .ok_or_else(|| Error::config("weights", "empty weight sequence"))?;
        let grid = *first.grid();
        for (k, t) in levels.iter().enumerate() {
            if *t.grid() != grid {
                return Err(Error::InvalidGrid(format!("level {k} lives on a different grid")));
            }
            if let Some(i) = t.samples().iter().position(|&v| !(v > 0.0)) {
                let pt = grid.point(i);
                return Err(Error::NonPositiveValue {
                    value: t.samples()[i],
                    point: pt[..grid.dim].to_vec(),
                });
            }
        }
        Ok(WeightSequence { levels, p, spec: None })
    }

    pub fn grid(&self) -> &Grid {
        self.levels[0].grid()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn spec(&self) -> Option<&WeightSpec> {
        self.spec.as_ref()
    }

    pub fn k_max(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[GridFunction] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> Result<&GridFunction> {
        self.levels.get(k).ok_or(Error::MissingLevels {
            have: self.k_max(),
            need: k,
        })
    }

    /// `t_k(x)` at an arbitrary point: closed form when known, else interpolated.
    pub fn value_at(&self, k: usize, x: &[f64]) -> Option<f64> {
        match &self.spec {
            Some(s) => Some(s.value(k as u32, x)),
            None => self.levels.get(k)?.interpolate(x),
        }
    }

    /// Whether every `t_k` is constant in `x` (checked on samples when no
    /// closed form is attached).
    pub fn is_constant_in_x(&self) -> bool {
        match &self.spec {
            Some(s) => s.is_constant_in_x(),
            None => self.levels.iter().all(|t| {
                let s = t.samples();
                s.iter().all(|&v| v == s[0])
            }),
        }
    }

    /// Same sequence truncated to levels `0..=k_max`.
    pub fn truncated(&self, k_max: usize) -> Result<Self> {
        self.level(k_max)?;
        Ok(WeightSequence {
            levels: self.levels[..=k_max].to_vec(),
            p: self.p,
            spec: self.spec.clone(),
        })
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(format!("p = {p} must be positive and finite")))
    }
}

/// `t_{k,m} = ||t_k||_{L_p(Q_{k,m})}`, with the cube clipped to the domain.
pub fn cube_weight_norm(t: &WeightSequence, k: usize, m: &[i64]) -> Result<f64> {
    let tk = t.level(k)?;
    let grid = tk.grid();
    let cube = DyadicCube::new(k as i32, m.to_vec());
    if cube.side() < grid.spacing() {
        return Err(Error::ResolutionExceeded {
            level: k as i32,
            spacing: grid.spacing(),
        });
    }
    let b = cube_box(&cube);
    let p = t.p();
    let table = IntegralTable::from_fn(grid, tk.samples(), |v| v.powf(p));
    Ok(table.box_integral(&b.lo, &b.hi).powf(1.0 / p))
}

/// All `t_{k,m}` for the level-`k` cubes tiling the domain, keyed by cube.
pub fn level_cube_norms(t: &WeightSequence, k: usize) -> Result<Vec<(DyadicCube, f64)>> {
    cube_norms(t.level(k)?, t.p(), k as i32)
}

/// `||w||_{L_p(Q)}` for the level-`k` cubes tiling the domain, clipped to it.
pub fn cube_norms(w: &GridFunction, p: f64, k: i32) -> Result<Vec<(DyadicCube, f64)>> {
    let grid = w.grid();
    let table = IntegralTable::from_fn(grid, w.samples(), |v| v.abs().powf(p));
    crate::dyadic::domain_cubes(grid, k)?
        .into_iter()
        .map(|c| {
            let b = cube_box(&c);
            debug_assert!(clipped_measure(grid, &b.lo, &b.hi) > 0.0);
            let v = table.box_integral(&b.lo, &b.hi).powf(1.0 / p);
            Ok((c, v))
        })
        .collect()
}

/// Conjugate exponent `p' = p / (p - 1)`.
pub fn conjugate(p: f64) -> Result<f64> {
    if p > 1.0 && p.is_finite() {
        Ok(p / (p - 1.0))
    } else {
        Err(Error::InvalidExponent(format!("conjugate needs 1 < p < inf, got {p}")))
    }
}

/// `sigma_1 = theta (p / theta)' = theta p / (p - theta)`; infinite when `theta = p`.
pub fn sigma1_of(theta: f64, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) || !(1.0..=p).contains(&theta) {
        return Err(Error::InvalidExponent(format!(
            "sigma_1 needs 1 <= theta <= p < inf, got theta = {theta}, p = {p}"
        )));
    }
    if theta == p {
        return Ok(f64::INFINITY);
    }
    Ok(theta * p / (p - theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        assert_eq!(eval_weight(&WeightSpec::power(0.0), 0, &[3.7]).unwrap(), 1.0);
        assert_eq!(
            eval_weight(&WeightSpec::shifted_power(vec![1.0], 2.0), 0, &[3.0]).unwrap(),
            4.0
        );
        let g = WeightSpec::geometric(1.0, WeightSpec::Constant { value: 1.0 });
        assert_eq!(eval_weight(&g, 3, &[0.2]).unwrap(), 8.0);
    }

    #[test]
    fn level_argument_variants() {
        let base = WeightSpec::power(2.0);
        let mk = |argument| WeightSpec::GeometricLevel {
            s: 0.0,
            base: Box::new(base.clone()),
            argument,
        };
        assert_relative_eq!(mk(LevelArgument::Identity).value(2, &[3.0]), 9.0);
        assert_relative_eq!(mk(LevelArgument::Dilated).value(2, &[3.0]), 9.0 / 16.0);
        assert_relative_eq!(mk(LevelArgument::Point).value(2, &[3.0]), 1.0 / 16.0);
        assert!(mk(LevelArgument::Point).is_constant_in_x());
        assert!(!mk(LevelArgument::Dilated).is_constant_in_x());
    }

    #[test]
    fn admissible_sequence_values() {
        let w = WeightSpec::AdmissibleSeq { s: 1.0, b: 2.0, c: 1.0 };
        assert_relative_eq!(w.value(0, &[0.0]), 1.0);
        assert_relative_eq!(w.value(3, &[0.0]), 8.0 * 16.0 * (1.0 + 4f64.ln()));
    }

    #[test]
    fn non_positive_values_are_rejected() {
        let z = WeightSpec::Constant { value: 0.0 };
        assert!(matches!(
            eval_weight(&z, 0, &[1.0]),
            Err(Error::NonPositiveValue { .. })
        ));
        // |x - 0|^{-1} at the origin is infinite
        let sing = WeightSpec::power(-1.0);
        assert!(eval_weight(&sing, 0, &[0.0]).is_err());
    }

    #[test]
    fn serde_shape() {
        let w = WeightSpec::geometric(0.5, WeightSpec::shifted_power(vec![1.0], -0.25));
        let s = serde_json::to_string(&w).unwrap();
        assert!(s.contains("\"type\":\"geometric_level\""), "{s}");
        let back: WeightSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
        let parsed: WeightSpec =
            serde_json::from_str(r#"{"type":"geometric_level","s":1,"base":{"type":"constant","value":1}}"#).unwrap();
        assert_eq!(parsed.value(2, &[0.0]), 4.0);
    }

    #[test]
    fn cube_norm_examples() {
        let g = Grid::line(4.0, 1024);
        let one = WeightSequence::from_spec(&WeightSpec::Constant { value: 1.0 }, g, 1, 2.0).unwrap();
        assert_relative_eq!(cube_weight_norm(&one, 0, &[0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(cube_weight_norm(&one, 1, &[0]).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);

        let lin = WeightSequence::from_spec(&WeightSpec::power(1.0), g, 0, 1.0).unwrap();
        assert_relative_eq!(cube_weight_norm(&lin, 0, &[0]).unwrap(), 0.5, epsilon = 1e-9);

        let coarse = Grid::line(4.0, 8);
        let seq = WeightSequence::from_spec(&WeightSpec::Constant { value: 1.0 }, coarse, 1, 2.0).unwrap();
        assert!(matches!(
            cube_weight_norm(&seq, 1, &[0]),
            Err(Error::ResolutionExceeded { .. })
        ));
        assert!(matches!(
            cube_weight_norm(&seq, 4, &[0]),
            Err(Error::MissingLevels { .. })
        ));
    }

    #[test]
    fn exponent_helpers() {
        assert_eq!(conjugate(2.0).unwrap(), 2.0);
        assert_relative_eq!(conjugate(3.0).unwrap(), 1.5);
        assert!(conjugate(1.0).is_err());
        assert_eq!(sigma1_of(1.0, 2.0).unwrap(), 2.0);
        assert_eq!(sigma1_of(2.0, 2.0).unwrap(), f64::INFINITY);
        assert_relative_eq!(sigma1_of(1.5, 3.0).unwrap(), 3.0);
        assert!(sigma1_of(0.5, 2.0).is_err());
        assert!(sigma1_of(3.0, 2.0).is_err());
    }
}
