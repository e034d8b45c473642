//! The dilation `f -> f(lambda .)`, the constant `H`, the pointwise Sobolev
//! comparison ratio and end-to-end checks of the dilation bound.

use serde::{Deserialize, Serialize, Serializer};

use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::norms::{diff_norm, star_norm, SpaceParams};
use crate::verdict::Verdict;
use crate::weights::{cube_norms, xclass_check, WeightSequence, WeightSpec};

/// Largest share of `||f||_1` that [`dilate`] may drop at the domain edge.
pub const CLIP_LIMIT: f64 = 0.01;
/// Domain growth per step of the comparison ladder.
pub const LADDER_L_FACTOR: f64 = 2.0;
/// Resolution growth per step of the comparison ladder (spacing shrinks by 32).
pub const LADDER_N_FACTOR: usize = 64;
/// Largest tolerated `max / median` of the observed constants over a `lambda` sweep.
pub const SPREAD_LIMIT: f64 = 3.0;

/// `lambda` with the unique `i` such that `lambda < 2^i <= 2 lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DilationSetup {
    pub lambda: f64,
    pub i: u32,
}

impl DilationSetup {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(DilationSetup {
            lambda,
            i: choose_i(lambda),
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 1.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::PreconditionFailed(format!(
            "lambda = {lambda} must be a finite number >= 1"
        )))
    }
}

/// Smallest `i` with `2^i > lambda`.
pub fn choose_i(lambda: f64) -> u32 {
    let mut i = 0;
    while 2f64.powi(i as i32) <= lambda {
        i += 1;
    }
    i
}

/// `g(x) = f(lambda x)`, zero where `lambda x` leaves the domain.
pub fn dilate(f: &GridFunction, lambda: f64) -> Result<GridFunction> {
    let (g, clipped) = dilate_with_clipping(f, lambda)?;
    if clipped > CLIP_LIMIT {
        return Err(Error::ClippingExcessive { fraction: clipped });
    }
    Ok(g)
}

/// [`dilate`] without the clipping check, returning the clipped share.
///
/// With a closed form the share is the mass of `f(lambda .)` falling outside
/// the domain; otherwise it is the share of `||f||_1` in the outermost ring of
/// cells, where a truncated `f` would show.
pub fn dilate_with_clipping(f: &GridFunction, lambda: f64) -> Result<(GridFunction, f64)> {
    check_lambda(lambda)?;
    let grid = *f.grid();
    let d = grid.dim;
    let l = grid.halfwidth;
    let inside = move |y: &[f64]| y.iter().all(|v| v.abs() <= l);
    let (mut kept, mut clipped) = (0.0, 0.0);
    let mut samples = Vec::with_capacity(grid.len());
    let mut y = [0.0; 2];
    for i in 0..grid.len() {
        let x = grid.point(i);
        for a in 0..d {
            y[a] = lambda * x[a];
        }
        let y = &y[..d];
        let v = if inside(y) {
            match f.evaluator() {
                Some(e) => e(y),
                None => f.interpolate(y).unwrap_or(0.0),
            }
        } else {
            if let Some(e) = f.evaluator() {
                clipped += e(y).abs();
            }
            0.0
        };
        kept += v.abs();
        samples.push(v);
    }
    let fraction = match f.evaluator() {
        Some(_) if kept + clipped > 0.0 => clipped / (kept + clipped),
        Some(_) => 0.0,
        None => edge_share(f),
    };
    let mut g = GridFunction::from_samples(grid, samples)?;
    if let Some(e) = f.evaluator() {
        let e = e.clone();
        g = g.with_evaluator(std::sync::Arc::new(move |x: &[f64]| {
            let y: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            if inside(&y) {
                e(&y)
            } else {
                0.0
            }
        }));
    }
    Ok((g, fraction))
}

fn edge_share(f: &GridFunction) -> f64 {
    let grid = f.grid();
    let n = grid.n;
    let total: f64 = f.samples().iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let edge: f64 = (0..grid.len())
        .filter(|&i| grid.unflatten(i)[..grid.dim].iter().any(|&j| j == 0 || j == n - 1))
        .map(|i| f.samples()[i].abs())
        .sum();
    edge / total
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HReport {
    pub value: f64,
    /// Level `k - i` and cube attaining the maximum.
    pub argmax: (usize, DyadicCube),
    /// Maximum per level `k - i = 0..=K`.
    pub per_level: Vec<f64>,
}

/// `H = max_{0 <= k' <= K, m} ||t_{k'}(lambda^{-1} .)||_{L_p(Q_{k',m})} / ||t_{k'}||_{L_p(Q_{k',m})}`
/// over cubes meeting the domain, with `k' = k - i`.
#[allow(non_snake_case)]
pub fn compute_H(t: &WeightSequence, lambda: f64, k_max: usize) -> Result<f64> {
    Ok(compute_h_report(t, lambda, k_max)?.value)
}

pub fn compute_h_report(t: &WeightSequence, lambda: f64, k_max: usize) -> Result<HReport> {
    check_lambda(lambda)?;
    let grid = *t.grid();
    let d = grid.dim;
    let base = t.truncated(k_max)?;
    let levels: Vec<usize> = (0..=k_max).collect();
    let per_level = crate::par::map(&levels, |&k| -> Result<(f64, DyadicCube)> {
        let tk = base.level(k)?;
        let dilated = GridFunction::sample(grid, |x| {
            let y = [x[0] / lambda, x.get(1).copied().unwrap_or(0.0) / lambda];
            base.value_at(k, &y[..d]).unwrap_or(f64::NAN)
        })?;
        let num = cube_norms(&dilated, t.p(), k as i32)?;
        let den = cube_norms(tk, t.p(), k as i32)?;
        let mut level_best = (f64::NEG_INFINITY, None);
        for ((c, a), (_, b)) in num.iter().zip(&den) {
            if *b > 0.0 && a / b > level_best.0 {
                level_best = (a / b, Some(c.clone()));
            }
        }
        Ok((level_best.0, level_best.1.expect("domain holds at least one cube")))
    });
    let per_level = per_level.into_iter().collect::<Result<Vec<_>>>()?;
    let (k, (value, cube)) = per_level
        .iter()
        .cloned()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("at least level 0");
    Ok(HReport {
        value,
        argmax: (k, cube),
        per_level: per_level.into_iter().map(|v| v.0).collect(),
    })
}

/// [`compute_H`] for a closed-form sequence without storing samples: each
/// cell is assigned to the cube containing its center, which matches the
/// exact cube quadrature when cube faces fall on cell faces.
pub fn compute_h_closed_form(spec: &WeightSpec, lambda: f64, grid: Grid, k_max: usize, p: f64) -> Result<f64> {
    check_lambda(lambda)?;
    spec.validate(grid.dim)?;
    if 2f64.powi(-(k_max as i32)) < grid.spacing() * (1.0 - 1e-12) {
        return Err(Error::ResolutionExceeded {
            level: k_max as i32,
            spacing: grid.spacing(),
        });
    }
    let d = grid.dim;
    let l = grid.halfwidth;
    let levels: Vec<usize> = (0..=k_max).collect();
    let best = crate::par::map(&levels, |&k| {
        let side = 2f64.powi(-(k as i32));
        let first = (-l / side).floor() as i64;
        let per_axis = ((l / side).ceil() as i64 - first) as usize;
        let cubes = per_axis.pow(d as u32);
        let (mut num, mut den) = (vec![0.0; cubes], vec![0.0; cubes]);
        let mut y = [0.0; 2];
        for i in 0..grid.len() {
            let x = grid.point(i);
            let mut slot = 0;
            for a in 0..d {
                y[a] = x[a] / lambda;
                slot = slot * per_axis + ((x[a] / side).floor() as i64 - first) as usize;
            }
            num[slot] += spec.value(k as u32, &y[..d]).powf(p);
            den[slot] += spec.value(k as u32, &x[..d]).powf(p);
        }
        num.iter()
            .zip(&den)
            .filter(|(_, b)| **b > 0.0)
            .map(|(a, b)| (a / b).powf(1.0 / p))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(best.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Grids of the comparison ladder: `L` doubles and `N` grows 64x per step.
pub fn domain_ladder(grid: Grid, steps: usize) -> Result<Vec<Grid>> {
    let mut out = vec![grid];
    for _ in 1..steps {
        let last = out[out.len() - 1];
        out.push(Grid::new(
            last.dim,
            last.halfwidth * LADDER_L_FACTOR,
            last.n * LADDER_N_FACTOR,
        )?);
    }
    Ok(out)
}

/// One rung of a domain/resolution ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LadderPoint {
    pub halfwidth: f64,
    pub n: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderReport {
    pub value: f64,
    pub trace: Vec<LadderPoint>,
    /// Largest relative change between consecutive rungs.
    pub max_change: f64,
    pub verdict: Verdict,
}

impl LadderReport {
    fn from_trace(trace: Vec<LadderPoint>, divergence: bool) -> Self {
        let values: Vec<f64> = trace.iter().map(|r| r.value).collect();
        let max_change = values.windows(2).map(|w| (w[1] / w[0] - 1.0).abs()).fold(0.0, f64::max);
        let verdict = if divergence {
            Verdict::divergence(&values)
        } else {
            Verdict::from_trace(&values)
        };
        LadderReport {
            value: values[values.len() - 1],
            trace,
            max_change,
            verdict,
        }
    }
}

/// [`compute_h_closed_form`] along [`domain_ladder`].
pub fn compute_h_ladder(
    spec: &WeightSpec,
    lambda: f64,
    grid: Grid,
    k_max: usize,
    p: f64,
    steps: usize,
) -> Result<LadderReport> {
    let trace = domain_ladder(grid, steps)?
        .into_iter()
        .map(|g| {
            Ok(LadderPoint {
                halfwidth: g.halfwidth,
                n: g.n,
                value: compute_h_closed_form(spec, lambda, g, k_max, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LadderReport::from_trace(trace, false))
}

/// `max_x omega(x / lambda) / omega(x)` over the cell centers of `grid`.
pub fn sobolev_sup(omega: &WeightSpec, lambda: f64, grid: Grid) -> f64 {
    let d = grid.dim;
    let chunks: Vec<usize> = (0..grid.len()).step_by(1 << 16).collect();
    crate::par::map(&chunks, |&start| {
        let mut best = f64::NEG_INFINITY;
        let mut y = [0.0; 2];
        for i in start..(start + (1 << 16)).min(grid.len()) {
            let x = grid.point(i);
            for a in 0..d {
                y[a] = x[a] / lambda;
            }
            best = best.max(omega.value(0, &y[..d]) / omega.value(0, &x[..d]));
        }
        best
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// [`sobolev_sup`] along [`domain_ladder`]; DIVERGENT when the sup grows at
/// least 2x on each of the last two rungs.
pub fn sobolev_sup_ratio(omega: &WeightSpec, lambda: f64, grid: Grid, steps: usize) -> Result<LadderReport> {
    if !(lambda > 1.0 && lambda.is_finite()) {
        return Err(Error::PreconditionFailed(format!("lambda = {lambda} must exceed 1")));
    }
    omega.validate(grid.dim)?;
    let trace = domain_ladder(grid, steps)?
        .into_iter()
        .map(|g| LadderPoint {
            halfwidth: g.halfwidth,
            n: g.n,
            value: sobolev_sup(omega, lambda, g),
        })
        .collect();
    Ok(LadderReport::from_trace(trace, true))
}

/// A finite ratio, or the string sentinel `"DIVERGENT"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RatioValue {
    Finite(f64),
    Divergent,
}

impl Serialize for RatioValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RatioValue::Finite(v) => s.serialize_f64(*v),
            RatioValue::Divergent => s.serialize_str("DIVERGENT"),
        }
    }
}

impl From<&LadderReport> for RatioValue {
    fn from(r: &LadderReport) -> Self {
        if r.verdict == Verdict::Divergent {
            RatioValue::Divergent
        } else {
            RatioValue::Finite(r.value)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    #[default]
    Diff,
    Star,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct DilationReport {
    pub lambda: f64,
    pub i: u32,
    pub H: f64,
    pub norm_before: f64,
    pub norm_after: f64,
    /// `lambda^{alpha2 - n/p} H`
    pub bound_rhs_shape: f64,
    pub observed_c: f64,
    pub clipped_fraction: f64,
    pub sobolev_sup_ratio: Option<RatioValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremReport {
    pub method: NormMethod,
    pub k_max: u32,
    pub xclass_c1: f64,
    pub xclass_c2: f64,
    pub reports: Vec<DilationReport>,
    /// Least-squares slope of `log(norm_after / norm_before)` against `log lambda`.
    pub slope: f64,
    /// `max / median` of `observed_c`.
    pub spread: f64,
    pub verdict: Verdict,
}

/// Measures `c = ||f(lambda .)|| / (lambda^{alpha2 - n/p} H ||f||)` for each
/// `lambda`. PASS when `max c <= 3 median c`.
///
/// The base weight of a `GeometricLevel` sequence also gets the pointwise
/// Sobolev comparison ratio (one-dimensional grids only).
pub fn verify_theorem(
    f: &GridFunction,
    t: &WeightSequence,
    sp: &SpaceParams,
    lambdas: &[f64],
    method: NormMethod,
) -> Result<TheoremReport> {
    sp.validate()?;
    if lambdas.is_empty() {
        return Err(Error::PreconditionFailed("empty lambda list".into()));
    }
    let grid = *f.grid();
    let k_max = sp.resolved_k_max(&grid);
    let t = t.truncated(k_max as usize)?;
    let xc = xclass_check(&t, &sp.xclass_params(), k_max as i32)?;
    if xc.verdict == Verdict::Fail || !(xc.c1.is_finite() && xc.c2.is_finite()) {
        return Err(Error::PreconditionFailed(format!(
            "weight sequence fails the class check: C1 = {}, C2 = {}",
            xc.c1, xc.c2
        )));
    }
    let norm = |g: &GridFunction| match method {
        NormMethod::Diff => diff_norm(g, &t, sp),
        NormMethod::Star => star_norm(g, &t, sp),
    };
    let before = norm(f)?;
    if before == 0.0 {
        return Err(Error::PreconditionFailed("the test function has zero norm".into()));
    }
    let base_weight = match t.spec() {
        Some(WeightSpec::GeometricLevel { base, .. }) if grid.dim == 1 => Some((**base).clone()),
        _ => None,
    };
    let n = grid.dim as f64;
    let mut reports = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let setup = DilationSetup::new(lambda)?;
        let (g, clipped) = dilate_with_clipping(f, lambda)?;
        if clipped > CLIP_LIMIT {
            return Err(Error::ClippingExcessive { fraction: clipped });
        }
        let after = norm(&g)?;
        let h = compute_H(&t, lambda, k_max as usize)?;
        let shape = lambda.powf(sp.alpha2 - n / sp.p) * h;
        let sobolev = match &base_weight {
            Some(w) if w.is_constant_in_x() => Some(RatioValue::Finite(1.0)),
            Some(w) if lambda > 1.0 => Some(RatioValue::from(&sobolev_sup_ratio(w, lambda, grid, 3)?)),
            _ => None,
        };
        reports.push(DilationReport {
            lambda,
            i: setup.i,
            H: h,
            norm_before: before,
            norm_after: after,
            bound_rhs_shape: shape,
            observed_c: after / (shape * before),
            clipped_fraction: clipped,
            sobolev_sup_ratio: sobolev,
        });
    }
    let mut cs: Vec<f64> = reports.iter().map(|r| r.observed_c).collect();
    cs.sort_by(f64::total_cmp);
    let median = if cs.len() % 2 == 1 {
        cs[cs.len() / 2]
    } else {
        0.5 * (cs[cs.len() / 2 - 1] + cs[cs.len() / 2])
    };
    let spread = cs[cs.len() - 1] / median;
    let xy: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| (r.lambda.ln(), (r.norm_after / r.norm_before).ln()))
        .collect();
    let verdict = if spread <= SPREAD_LIMIT && spread.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(TheoremReport {
        method,
        k_max,
        xclass_c1: xc.c1,
        xclass_c2: xc.c2,
        reports,
        slope: slope(&xy),
        spread,
        verdict,
    })
}

/// Least-squares slope; `NaN` for fewer than two distinct abscissae.
pub fn slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}
