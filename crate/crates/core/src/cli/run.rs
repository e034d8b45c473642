use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Command, FamilyKind, RunConfig};
use crate::dilation::verify_theorem;
use crate::dyadic::finest_level;
use crate::error::{Error, Result};
use crate::fixtures::{random_indicator_family, random_smooth_family, Fixture};
use crate::grid::{Grid, GridFunction};
use crate::lp_fourier::{build_phi, fourier_k_max, fourier_norm};
use crate::maximal::{fs_inequality_ratio, weighted_maximal_report};
use crate::norms::{diff_norm_report, star_norm_report, NormReport, SpaceParams};
use crate::verdict::{Verdict, PLATEAU_TOL};
use crate::weights::{a1_constant_refined, ap_constant_refined, xclass_check_refined, WeightSequence};

/// Column names and rows of the CSV view of a report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Meta {
    pub version: &'static str,
    pub command: &'static str,
    #[serde(rename = "L")]
    pub halfwidth: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub dim: usize,
    #[serde(rename = "K_max")]
    pub k_max: Option<u32>,
    pub depth: Option<i32>,
    pub seed: u64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub config: RunConfig,
    pub results: Value,
    pub verdicts: BTreeMap<&'static str, Verdict>,
    pub meta: Meta,
    pub table: Table,
}

impl Report {
    /// Worst verdict; DIVERGENT entries are informational.
    pub fn overall(&self) -> Verdict {
        Verdict::combine(self.verdicts.values().copied())
    }

    pub fn exit_code(&self) -> i32 {
        self.overall().exit_code()
    }

    pub fn to_value(&self) -> Value {
        let mut verdicts: serde_json::Map<String, Value> = self
            .verdicts
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v.as_str())))
            .collect();
        verdicts.insert("overall".into(), json!(self.overall().as_str()));
        json!({
            "config": self.config,
            "results": self.results,
            "verdicts": verdicts,
            "meta": self.meta,
        })
    }
}

struct Outcome {
    results: Value,
    verdicts: BTreeMap<&'static str, Verdict>,
    table: Table,
    k_max: Option<u32>,
    depth: Option<i32>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Runs `command`. Configuration problems are returned as errors; failures of
/// the numerical modules become a FAIL report carrying the error message.
pub fn run(command: Command, config: &RunConfig) -> Result<Report> {
    let warnings = config.validate(command)?;
    let grid = config.grid()?;
    let outcome = match command {
        Command::Norm => run_norm(config, grid),
        Command::Ap => run_ap(config, grid),
        Command::Xclass => run_xclass(config, grid),
        Command::Dilate => run_dilate(config, grid),
        Command::Maximal => run_maximal(config, grid),
        Command::Equiv => run_equiv(config, grid),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(e @ Error::Config { .. }) => return Err(e),
        Err(e) => Outcome {
            results: json!({ "error": e.to_string() }),
            verdicts: BTreeMap::from([(command.as_str(), Verdict::Fail)]),
            table: Table::default(),
            k_max: None,
            depth: config.depth,
        },
    };
    Ok(Report {
        config: RunConfig {
            command: Some(command),
            ..config.clone()
        },
        results: outcome.results,
        verdicts: outcome.verdicts,
        meta: Meta {
            version: env!("CARGO_PKG_VERSION"),
            command: command.as_str(),
            halfwidth: grid.halfwidth,
            n: grid.n,
            dim: grid.dim,
            k_max: outcome.k_max,
            depth: outcome.depth,
            seed: config.seed,
            warnings,
            wall_clock_s: None,
        },
        table: outcome.table,
    })
}

fn function(config: &RunConfig, grid: Grid) -> Result<GridFunction> {
    config
        .function
        .clone()
        .unwrap_or(Fixture::Gaussian {
            center: vec![],
            width: 1.0,
        })
        .build(grid)
}

fn sequence(config: &RunConfig, grid: Grid, sp: &SpaceParams) -> Result<(WeightSequence, u32)> {
    let k = sp.resolved_k_max(&grid);
    Ok((WeightSequence::from_spec(config.weights()?, grid, k, sp.p)?, k))
}

fn norm_verdict(reports: &[&NormReport]) -> Verdict {
    if reports.iter().all(|r| r.value.is_finite() && !r.unreliable) {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    }
}

/// Fourier-side norm when `K` is within the band limit of the grid.
fn fourier(f: &GridFunction, t: &WeightSequence, sp: &SpaceParams, k: u32) -> Result<Option<f64>> {
    if k > fourier_k_max(f.grid()) {
        return Ok(None);
    }
    Ok(Some(fourier_norm(f, t, sp, &build_phi(f.grid(), k)?)?))
}

fn run_norm(config: &RunConfig, grid: Grid) -> Result<Outcome> {
    let sp = config.space()?;
    let f = function(config, grid)?;
    let (t, k) = sequence(config, grid, &sp)?;
    let diff = diff_norm_report(&f, &t, &sp)?;
    let star = star_norm_report(&f, &t, &sp)?;
    let fourier = fourier(&f, &t, &sp, k)?;
    let rows = (0..k as usize)
        .map(|i| vec![json!(i + 1), json!(diff.levels[i]), json!(star.levels[i])])
        .collect();
    Ok(Outcome {
        results: json!({ "diff": to_value(&diff), "star": to_value(&star), "fourier": fourier }),
        verdicts: BTreeMap::from([("norm", norm_verdict(&[&diff, &star]))]),
        table: Table {
            columns: vec!["k", "diff_level", "star_level"],
            rows,
        },
        k_max: Some(k),
        depth: None,
    })
}

fn run_ap(config: &RunConfig, grid: Grid) -> Result<Outcome> {
    let p = config.ap_p.or(config.space.map(|s| s.p)).expect("validated");
    let depth = config.depth.unwrap_or_else(|| finest_level(&grid, 4));
    let spec = config.weights()?;
    let report = if p == 1.0 {
        a1_constant_refined(spec, 0, &grid, depth, config.steps)?
    } else {
        ap_constant_refined(spec, 0, &grid, p, depth, config.steps)?
    };
    let rows = report
        .refinement
        .iter()
        .map(|(n, c)| vec![json!(n), json!(c)])
        .collect();
    Ok(Outcome {
        results: json!({ "p": p, "ap": to_value(&report) }),
        verdicts: BTreeMap::from([("ap", report.verdict)]),
        table: Table {
            columns: vec!["N", "constant"],
            rows,
        },
        k_max: None,
        depth: Some(depth),
    })
}

fn run_xclass(config: &RunConfig, grid: Grid) -> Result<Outcome> {
    let sp = config.space()?;
    let (t, k) = sequence(config, grid, &sp)?;
    let depth = config.depth.unwrap_or(k as i32);
    let report = xclass_check_refined(&t, &sp.xclass_params(), depth, config.steps)?;
    let rows = report
        .trace
        .iter()
        .map(|(d, c1, c2)| vec![json!(d), json!(c1), json!(c2)])
        .collect();
    Ok(Outcome {
        results: json!({ "params": to_value(&sp.xclass_params()), "xclass": to_value(&report) }),
        verdicts: BTreeMap::from([("xclass", report.verdict)]),
        table: Table {
            columns: vec!["depth", "C1", "C2"],
            rows,
        },
        k_max: Some(k),
        depth: Some(depth),
    })
}

fn run_dilate(config: &RunConfig, grid: Grid) -> Result<Outcome> {
    let sp = config.space()?;
    let f = function(config, grid)?;
    let (t, k) = sequence(config, grid, &sp)?;
    let report = verify_theorem(&f, &t, &sp, &config.lambda_list, config.norm_method)?;
    let mut verdicts = BTreeMap::from([("lambda_independence", report.verdict)]);
    let divergent = report
        .reports
        .iter()
        .any(|r| matches!(r.sobolev_sup_ratio, Some(crate::dilation::RatioValue::Divergent)));
    if divergent {
        verdicts.insert("sobolev_comparison", Verdict::Divergent);
    }
    let rows = report
        .reports
        .iter()
        .map(|r| {
            vec![
                json!(r.lambda),
                json!(r.i),
                json!(r.H),
                json!(r.norm_before),
                json!(r.norm_after),
                json!(r.bound_rhs_shape),
                json!(r.observed_c),
                json!(r.clipped_fraction),
                r.sobolev_sup_ratio.map_or(Value::Null, |v| to_value(&v)),
            ]
        })
        .collect();
    Ok(Outcome {
        results: to_value(&report),
        verdicts,
        table: Table {
            columns: vec![
                "lambda",
                "i",
                "H",
                "norm_before",
                "norm_after",
                "bound_rhs_shape",
                "observed_c",
                "clipped_fraction",
                "sobolev_sup_ratio",
            ],
            rows,
        },
        k_max: Some(k),
        depth: Some(k as i32),
    })
}

fn family(kind: FamilyKind, grid: Grid, seed: u64, count: usize) -> Result<Vec<GridFunction>> {
    match kind {
        FamilyKind::Indicator => random_indicator_family(grid, seed, count),
        FamilyKind::Smooth => random_smooth_family(grid, seed, count),
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b / a - 1.0).abs()
    }
}

fn run_maximal(config: &RunConfig, grid: Grid) -> Result<Outcome> {
    let sp = config.space()?;
    let m = &config.maximal;
    let fine = grid.with_resolution(grid.n * 2)?;
    let weighted = config.weights.is_some();
    if weighted && !(sp.theta > 1.0) {
        return Err(Error::config(
            "space.theta",
            format!("weighted maximal ratios need theta > 1, got {}", sp.theta),
        ));
    }
    let k = m.family_size as u32 - 1;
    let seqs = if weighted {
        Some((
            WeightSequence::from_spec(config.weights()?, grid, k, sp.p)?,
            WeightSequence::from_spec(config.weights()?, fine, k, sp.p)?,
        ))
    } else {
        None
    };
    let mut rows = Vec::with_capacity(m.families);
    let mut families = Vec::with_capacity(m.families);
    let (mut fs_ok, mut w_ok) = (true, true);
    let mut precondition = None;
    for s in 0..m.families as u64 {
        let seed = config.seed.wrapping_add(s);
        let coarse_fam = family(m.family, grid, seed, m.family_size)?;
        let fine_fam = family(m.family, fine, seed, m.family_size)?;
        let fs = fs_inequality_ratio(&coarse_fam, sp.p, sp.q, m.sigma)?;
        let fs2 = fs_inequality_ratio(&fine_fam, sp.p, sp.q, m.sigma)?;
        fs_ok &= relative_change(fs, fs2) < PLATEAU_TOL;
        let (w, w2) = match &seqs {
            Some((t, t2)) => {
                let a = weighted_maximal_report(&coarse_fam, t, sp.p, sp.q, sp.theta)?;
                let b = weighted_maximal_report(&fine_fam, t2, sp.p, sp.q, sp.theta)?;
                w_ok &= relative_change(a.ratio, b.ratio) < PLATEAU_TOL;
                let r = (Some(a.ratio), Some(b.ratio));
                precondition.get_or_insert(a);
                r
            }
            None => (None, None),
        };
        rows.push(vec![json!(seed), json!(fs), json!(fs2), json!(w), json!(w2)]);
        families.push(json!({
            "seed": seed,
            "fs_ratio": fs,
            "fs_ratio_refined": fs2,
            "weighted_ratio": w,
            "weighted_ratio_refined": w2,
        }));
    }
    let stable = |ok: bool| if ok { Verdict::Pass } else { Verdict::Inconclusive };
    let mut verdicts = BTreeMap::from([("fefferman_stein", stable(fs_ok))]);
    if weighted {
        verdicts.insert("weighted_maximal", stable(w_ok));
    }
    let max_of = |key: &str| {
        families
            .iter()
            .filter_map(|f| f[key].as_f64())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    Ok(Outcome {
        results: json!({
            "families": families,
            "fs_ratio_max": max_of("fs_ratio"),
            "weighted_ratio_max": max_of("weighted_ratio"),
            "precondition": precondition.map(|p| to_value(&p)),
            "refined_N": fine.n,
        }),
        verdicts,
        table: Table {
            columns: vec![
                "seed",
                "fs_ratio",
                "fs_ratio_refined",
                "weighted_ratio",
                "weighted_ratio_refined",
            ],
            rows,
        },
        k_max: seqs.as_ref().map(|_| k),
        depth: None,
    })
}

fn run_equiv(config: &RunConfig, grid: Grid) -> Result<Outcome> {
    let sp = config.space()?;
    let (t, k) = sequence(config, grid, &sp)?;
    let fixtures = match &config.function {
        Some(f) => vec![f.clone()],
        None => Fixture::standard_family(),
    };
    let mut rows = Vec::with_capacity(fixtures.len());
    let mut entries = Vec::with_capacity(fixtures.len());
    let mut verdict = Verdict::Pass;
    for fix in &fixtures {
        let f = fix.build(grid)?;
        let diff = diff_norm_report(&f, &t, &sp)?;
        let star = star_norm_report(&f, &t, &sp)?;
        let four = fourier(&f, &t, &sp, k)?;
        let r_star = star.value / diff.value;
        let r_four = four.map(|v| v / diff.value);
        let mut ratios = vec![r_star];
        ratios.extend(r_four);
        if let Some(b) = config.bracket {
            if ratios.iter().any(|r| !(b.lo <= *r && *r <= b.hi)) {
                verdict = Verdict::Fail;
            }
        }
        if norm_verdict(&[&diff, &star]) != Verdict::Pass && verdict == Verdict::Pass {
            verdict = Verdict::Inconclusive;
        }
        let name = to_value(fix)["type"].as_str().unwrap_or("function").to_string();
        rows.push(vec![
            json!(name),
            json!(diff.value),
            json!(star.value),
            json!(four),
            json!(r_star),
            json!(r_four),
        ]);
        entries.push(json!({
            "function": to_value(fix),
            "diff": diff.value,
            "star": star.value,
            "fourier": four,
            "star_over_diff": r_star,
            "fourier_over_diff": r_four,
            "boundary_fraction": diff.boundary_fraction.max(star.boundary_fraction),
        }));
    }
    Ok(Outcome {
        results: json!({ "functions": entries }),
        verdicts: BTreeMap::from([("equiv", verdict)]),
        table: Table {
            columns: vec![
                "function",
                "diff",
                "star",
                "fourier",
                "star_over_diff",
                "fourier_over_diff",
            ],
            rows,
        },
        k_max: Some(k),
        depth: None,
    })
}
