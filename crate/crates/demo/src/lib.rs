//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export works on a fixed line grid and returns flat `Float64Array`s
//! (one block of `N` samples per curve) or a JSON string.

use dilatest::dilation::{compute_h_ladder, sobolev_sup_ratio, LadderReport};
use dilatest::fixtures::Fixture;
use dilatest::lp_fourier::{build_phi, lp_pieces};
use dilatest::maximal::hl_maximal;
use dilatest::weights::WeightSpec;
use dilatest::{Error, Grid, GridFunction, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const HALFWIDTH: f64 = 8.0;
pub const N: usize = 1024;

fn grid() -> Grid {
    Grid::line(HALFWIDTH, N)
}

/// The demo's test functions, by name.
pub fn test_function(name: &str) -> Result<GridFunction> {
    let g = grid();
    match name {
        "gaussian" => Fixture::Gaussian {
            center: vec![],
            width: 1.0,
        }
        .build(g),
        "bump" => Fixture::Bump { radius: 2.0 }.build(g),
        "sine_packet" => Fixture::SinePacket { freq: 6.0, width: 1.5 }.build(g),
        "plateau" => Fixture::SmoothIndicator {
            a: -2.0,
            b: 1.0,
            eps: 0.2,
        }
        .build(g),
        "indicator" => GridFunction::sample(g, |x| f64::from(u8::from((-1.0..0.5).contains(&x[0])))),
        "spikes" => GridFunction::sample(g, |x| {
            let d = (x[0] + 3.0).abs().min((x[0] - 2.5).abs());
            (1.0 - 4.0 * d).max(0.0)
        }),
        other => Err(Error::config("function", format!("unknown test function `{other}`"))),
    }
}

/// Cell-center coordinates.
pub fn coordinates() -> Vec<f64> {
    let g = grid();
    (0..g.n).map(|j| g.coord(j)).collect()
}

/// `[f, piece_0, ..., piece_K]`, each `N` samples.
pub fn lp_curves(name: &str, k_max: u32) -> Result<Vec<f64>> {
    let f = test_function(name)?;
    let ru = build_phi(f.grid(), k_max)?;
    let lp = lp_pieces(&f, &ru)?;
    let mut out = f.samples().to_vec();
    for p in &lp.pieces {
        out.extend_from_slice(p.samples());
    }
    Ok(out)
}

/// `[|f|, Mf]`, each `N` samples.
pub fn maximal_curves(name: &str) -> Result<Vec<f64>> {
    let f = test_function(name)?;
    let m = hl_maximal(&f);
    let mut out: Vec<f64> = f.samples().iter().map(|v| v.abs()).collect();
    out.extend_from_slice(m.samples());
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub halfwidths: Vec<f64>,
    pub h: Vec<f64>,
    pub h_verdict: String,
    pub sobolev: Vec<f64>,
    pub sobolev_verdict: String,
}

fn values(r: &LadderReport) -> Vec<f64> {
    r.trace.iter().map(|p| p.value).collect()
}

/// `H` for `t_k = 2^{k/2} |x - 1|^delta` against `sup omega(x / lambda) / omega(x)`
/// while the domain doubles.
pub fn compare(delta: f64, lambda: f64) -> Result<Comparison> {
    let base = Grid::line(HALFWIDTH, 256);
    let omega = WeightSpec::shifted_power(vec![1.0], delta);
    let h = compute_h_ladder(&WeightSpec::geometric(0.5, omega.clone()), lambda, base, 4, 2.0, 3)?;
    let sob = sobolev_sup_ratio(&omega, lambda, base, 3)?;
    Ok(Comparison {
        halfwidths: h.trace.iter().map(|p| p.halfwidth).collect(),
        h: values(&h),
        h_verdict: h.verdict.as_str().into(),
        sobolev: values(&sob),
        sobolev_verdict: sob.verdict.as_str().into(),
    })
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = gridSize)]
pub fn grid_size() -> usize {
    N
}

#[wasm_bindgen(js_name = coordinates)]
pub fn js_coordinates() -> Vec<f64> {
    coordinates()
}

#[wasm_bindgen(js_name = lpPieces)]
pub fn js_lp_pieces(name: &str, k_max: u32) -> std::result::Result<Vec<f64>, JsError> {
    js(lp_curves(name, k_max))
}

#[wasm_bindgen(js_name = maximalFunction)]
pub fn js_maximal(name: &str) -> std::result::Result<Vec<f64>, JsError> {
    js(maximal_curves(name))
}

#[wasm_bindgen(js_name = dilationComparison)]
pub fn js_compare(delta: f64, lambda: f64) -> std::result::Result<String, JsError> {
    let c = js(compare(delta, lambda))?;
    Ok(serde_json::to_string(&c).expect("plain data serializes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pieces_sum_to_the_function() {
        let curves = lp_curves("sine_packet", 5).unwrap();
        assert_eq!(curves.len(), 7 * N);
        for j in 0..N {
            let sum: f64 = (1..7).map(|b| curves[b * N + j]).sum();
            assert!((sum - curves[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn maximal_dominates() {
        let c = maximal_curves("indicator").unwrap();
        assert!((0..N).all(|j| c[N + j] >= c[j] - 1e-12));
        assert!(test_function("nope").is_err());
    }

    #[test]
    fn comparison_separates() {
        let c = compare(-0.25, 2.0).unwrap();
        assert_eq!(c.halfwidths, vec![8.0, 16.0, 32.0]);
        assert_eq!(c.sobolev_verdict, "DIVERGENT");
        assert!(c.h.iter().all(|v| v.is_finite()));
    }
}
