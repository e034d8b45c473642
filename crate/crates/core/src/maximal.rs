//! Centered dyadic-side Hardy-Littlewood maximal function, its `sigma`-power
//! variant, and the Fefferman-Stein / weighted vector-valued ratios.

use std::collections::VecDeque;

use serde::Serialize;

use crate::dyadic::finest_level;
use crate::error::{Error, Result};
use crate::grid::{clipped_measure, lp_norm, Grid, GridFunction, IntegralTable};
use crate::verdict::Verdict;
use crate::weights::{a1_constant, ap_constant, WeightSequence};

/// `Mf` together with the scan family that produced it.
#[derive(Clone, Debug)]
pub struct MaximalField {
    pub input: GridFunction,
    pub output: GridFunction,
    /// Side lengths `2^j dx` for `j = 0..=max_j`.
    pub max_j: u32,
}

impl MaximalField {
    pub fn compute(f: &GridFunction) -> Self {
        let output = hl_maximal(f);
        MaximalField {
            input: f.clone(),
            max_j: f.grid().n.trailing_zeros(),
            output,
        }
    }
}

/// Max over a window `[i - r, i + r]` clamped to `0..n`, for every `i`.
fn sliding_max(values: &[f64], r: usize, out: &mut [f64]) {
    let n = values.len();
    let mut dq: VecDeque<usize> = VecDeque::with_capacity(2 * r + 2);
    let mut next = 0;
    for (i, slot) in out.iter_mut().enumerate().take(n) {
        let hi = (i + r).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&b| values[b] <= values[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(r);
        while dq.front().is_some_and(|&f| f < lo) {
            dq.pop_front();
        }
        *slot = values[*dq.front().unwrap()];
    }
}

/// `Mf(x)`: the largest average of `|f|` over cubes of side `2^j dx`,
/// `j = 0..=log2 N`, centered at grid points and containing `x` (closed
/// containment), each intersected with the domain.
pub fn hl_maximal(f: &GridFunction) -> GridFunction {
    let grid = *f.grid();
    let table = IntegralTable::from_fn(&grid, f.samples(), f64::abs);
    let n = grid.n;
    let d = grid.dim;
    let dx = grid.spacing();
    let js: Vec<u32> = (0..=n.trailing_zeros()).collect();
    let per_j = crate::par::map(&js, |&j| {
        let half = 0.5 * 2f64.powi(j as i32) * dx;
        let avg: Vec<f64> = (0..grid.len())
            .map(|i| {
                let c = grid.point(i);
                let (lo, hi) = ([c[0] - half, c[1] - half], [c[0] + half, c[1] + half]);
                table.box_integral(&lo[..d], &hi[..d]) / clipped_measure(&grid, &lo[..d], &hi[..d])
            })
            .collect();
        // centers within 2^{j-1} cells of x; only x itself for j = 0
        let r = if j == 0 { 0 } else { 1usize << (j - 1) };
        window_max(&grid, &avg, r)
    });
    let mut out = per_j[0].clone();
    for m in &per_j[1..] {
        out.iter_mut().zip(m).for_each(|(o, v)| *o = o.max(*v));
    }
    GridFunction::from_samples(grid, out).expect("averages of finite samples are finite")
}

fn window_max(grid: &Grid, values: &[f64], r: usize) -> Vec<f64> {
    let n = grid.n;
    let mut out = vec![0.0; values.len()];
    if grid.dim == 1 {
        sliding_max(values, r, &mut out);
        return out;
    }
    let mut rows = vec![0.0; values.len()];
    for i in 0..n {
        sliding_max(&values[i * n..(i + 1) * n], r, &mut rows[i * n..(i + 1) * n]);
    }
    let mut col = vec![0.0; n];
    let mut res = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = rows[i * n + j];
        }
        sliding_max(&col, r, &mut res);
        for i in 0..n {
            out[i * n + j] = res[i];
        }
    }
    out
}

/// `M_sigma f = (M |f|^sigma)^{1/sigma}`.
pub fn m_sigma(f: &GridFunction, sigma: f64) -> Result<GridFunction> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidExponent(format!("sigma = {sigma} must be positive")));
    }
    if sigma == 1.0 {
        return Ok(hl_maximal(f));
    }
    let powered = f.map(|v| v.abs().powf(sigma))?;
    hl_maximal(&powered).map(|v| v.powf(1.0 / sigma))
}

/// `||(sum_k w_k^q |g_k|^q)^{1/q}||_p`.
fn lp_lq(fields: &[Vec<f64>], weights: Option<&[&[f64]]>, p: f64, q: f64, vol: f64) -> f64 {
    let len = fields[0].len();
    let mut acc = vec![0.0; len];
    for (k, g) in fields.iter().enumerate() {
        for (i, v) in g.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[k][i]);
            acc[i] += (w * v).abs().powf(q);
        }
    }
    acc.iter_mut().for_each(|a| *a = a.powf(1.0 / q));
    lp_norm(&acc, p, vol)
}

fn check_family(fs: &[GridFunction]) -> Result<Grid> {
    let first = fs
        .first()
        .ok_or_else(|| Error::PreconditionFailed("empty function family".into()))?;
    let grid = *first.grid();
    if fs.iter().any(|f| *f.grid() != grid) {
        return Err(Error::InvalidGrid("family members live on different grids".into()));
    }
    Ok(grid)
}

/// `||(sum_k M_sigma(f_k)^q)^{1/q}||_p / ||(sum_k |f_k|^q)^{1/q}||_p`; `0` when
/// the family vanishes.
pub fn fs_inequality_ratio(fs: &[GridFunction], p: f64, q: f64, sigma: f64) -> Result<f64> {
    let grid = check_family(fs)?;
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidExponent(format!(
                "{name} = {v} must be positive and finite"
            )));
        }
    }
    let vol = grid.cell_volume();
    let raw: Vec<Vec<f64>> = fs.iter().map(|f| f.samples().to_vec()).collect();
    let rhs = lp_lq(&raw, None, p, q, vol);
    if rhs == 0.0 {
        return Ok(0.0);
    }
    let maxed = crate::par::map(fs, |f| m_sigma(f, sigma).map(GridFunction::into_samples));
    let maxed = maxed.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(lp_lq(&maxed, None, p, q, vol) / rhs)
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedMaximalReport {
    pub ratio: f64,
    /// `p / theta`, the Muckenhoupt exponent checked for every `t_k^p`.
    pub ap_exponent: f64,
    pub ap_constants: Vec<f64>,
    /// Classification of the constants across `k`.
    pub across_levels: Verdict,
    /// `(N, A_{p/theta}(t_0^p))` under resolution refinement, when a closed form is known.
    pub refinement: Vec<(usize, f64)>,
    pub refinement_verdict: Option<Verdict>,
}

/// Refinement steps of the `A_{p/theta}` precondition ladder.
const LADDER_STEPS: u32 = 3;

fn muckenhoupt(g: &GridFunction, r: f64, depth: i32) -> Result<f64> {
    if r == 1.0 {
        Ok(a1_constant(g, depth)?.constant)
    } else {
        Ok(ap_constant(g, r, depth)?.constant)
    }
}

/// Checks `t_k^p in A_{p/theta}` with bounded constants. Fails when the
/// constants diverge across `k` or, for closed-form sequences, under refinement.
pub fn weighted_maximal_precondition(t: &WeightSequence, theta: f64) -> Result<WeightedMaximalReport> {
    let p = t.p();
    if !(theta > 1.0 && theta <= p && p.is_finite()) {
        return Err(Error::InvalidExponent(format!(
            "need 1 < theta <= p < inf, got theta = {theta}, p = {p}"
        )));
    }
    let r = p / theta;
    let grid = *t.grid();
    let depth = finest_level(&grid, 4);
    let ap_constants = crate::par::map(t.levels(), |tk| muckenhoupt(&tk.map(|v| v.powf(p))?, r, depth))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    // A_r(w)^{1/(r-1)} = A_{r'}(w^{1-r'}): classify the larger of the two dual constants
    let dual = if r > 1.0 { (1.0 / (r - 1.0)).max(1.0) } else { 1.0 };
    let normalized = |c: &[f64]| c.iter().map(|v| v.powf(dual)).collect::<Vec<_>>();
    let across_levels = if ap_constants.len() >= 3 {
        Verdict::from_trace(&running_max(&normalized(&ap_constants)))
    } else {
        Verdict::Pass
    };
    let (refinement, refinement_verdict) = match t.spec() {
        Some(spec) => {
            let spec = spec.clone();
            let mut trace = Vec::new();
            for s in 0..LADDER_STEPS {
                let g = grid.with_resolution(grid.n << (2 * s))?;
                let t0p = GridFunction::sample(g, |x| spec.value(0, x).powf(p))?;
                trace.push((g.n, muckenhoupt(&t0p, r, depth)?));
            }
            let v = Verdict::from_trace(&normalized(&trace.iter().map(|x| x.1).collect::<Vec<_>>()));
            (trace, Some(v))
        }
        None => (Vec::new(), None),
    };
    Ok(WeightedMaximalReport {
        ratio: f64::NAN,
        ap_exponent: r,
        ap_constants,
        across_levels,
        refinement,
        refinement_verdict,
    })
}

fn running_max(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(f64::NEG_INFINITY, |m, &x| {
            *m = m.max(x);
            Some(*m)
        })
        .collect()
}

/// `||(sum_k t_k^q M(f_k)^q)^{1/q}||_p / ||(sum_k t_k^q |f_k|^q)^{1/q}||_p`
/// for `f_k` paired with `t_k`, `k = 0..fs.len()`.
pub fn weighted_maximal_ratio(fs: &[GridFunction], t: &WeightSequence, p: f64, q: f64, theta: f64) -> Result<f64> {
    Ok(weighted_maximal_report(fs, t, p, q, theta)?.ratio)
}

pub fn weighted_maximal_report(
    fs: &[GridFunction],
    t: &WeightSequence,
    p: f64,
    q: f64,
    theta: f64,
) -> Result<WeightedMaximalReport> {
    let grid = check_family(fs)?;
    if *t.grid() != grid {
        return Err(Error::InvalidGrid(
            "weights and functions live on different grids".into(),
        ));
    }
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::InvalidExponent(format!("need 1 < q < inf, got {q}")));
    }
    if (p - t.p()).abs() > 0.0 {
        return Err(Error::InvalidExponent(format!(
            "p = {p} differs from the sequence exponent {}",
            t.p()
        )));
    }
    t.level(fs.len() - 1)?;
    let mut report = weighted_maximal_precondition(&t.truncated(fs.len() - 1)?, theta)?;
    let failed = report.across_levels == Verdict::Fail || report.refinement_verdict == Some(Verdict::Fail);
    if failed {
        return Err(Error::PreconditionFailed(format!(
            "t_k^p is not uniformly in A_{}: constants {:?}, refinement {:?}",
            report.ap_exponent, report.ap_constants, report.refinement
        )));
    }
    let vol = grid.cell_volume();
    let weights: Vec<&[f64]> = t.levels()[..fs.len()].iter().map(|tk| tk.samples()).collect();
    let raw: Vec<Vec<f64>> = fs.iter().map(|f| f.samples().to_vec()).collect();
    let rhs = lp_lq(&raw, Some(&weights), p, q, vol);
    report.ratio = if rhs == 0.0 {
        0.0
    } else {
        let maxed: Vec<Vec<f64>> = crate::par::map(fs, |f| hl_maximal(f).into_samples());
        lp_lq(&maxed, Some(&weights), p, q, vol) / rhs
    };
    Ok(report)
}
