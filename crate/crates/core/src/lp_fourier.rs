//! Smooth dyadic resolution of unity and the Fourier-analytic `B` / `F`
//! norms, by spectral multipliers on the periodized grid.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm, Grid, GridFunction};
use crate::norms::{SpaceKind, SpaceParams};
use crate::weights::WeightSequence;

/// Shape of the transition of `phi_0` on `1 <= |xi| <= 3/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `e(3 - 2r) / (e(3 - 2r) + e(2r - 2))`, `e(t) = exp(-1/t)`.
    #[default]
    Standard,
    /// Same pattern with `e(t) = exp(-1/t^2)`.
    Steep,
}

impl Profile {
    fn e(self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            Profile::Standard => (-1.0 / t).exp(),
            Profile::Steep => (-1.0 / (t * t)).exp(),
        }
    }

    /// `phi_0` as a function of `r = |xi|`.
    pub fn phi0(self, r: f64) -> f64 {
        if r <= 1.0 {
            return 1.0;
        }
        if r >= 1.5 {
            return 0.0;
        }
        let a = self.e(3.0 - 2.0 * r);
        let b = self.e(2.0 * r - 2.0);
        a / (a + b)
    }
}

/// `{phi_k}_{k <= K}` with `phi_k(xi) = phi_0(2^{-k} xi) - phi_0(2^{1-k} xi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionOfUnity {
    pub k_max: u32,
    pub profile: Profile,
    pub grid: Grid,
}

/// `pi N / (2L)`.
pub fn nyquist(grid: &Grid) -> f64 {
    PI * grid.n as f64 / (2.0 * grid.halfwidth)
}

/// Largest `k` with the whole support `|xi| <= 3 2^{k-1}` inside Nyquist.
pub fn fourier_k_max(grid: &Grid) -> u32 {
    let nyq = nyquist(grid);
    let mut k = 0;
    while 3.0 * 2f64.powi(k as i32) <= nyq {
        k += 1;
    }
    k
}

/// Largest `k` with `2^{-k} >= 4 dx`.
pub fn difference_k_max(grid: &Grid) -> u32 {
    (-(4.0 * grid.spacing()).log2()).floor().max(0.0) as u32
}

/// Truncation level shared by the Fourier and difference norms.
pub fn shared_k_max(grid: &Grid) -> u32 {
    fourier_k_max(grid).min(difference_k_max(grid))
}

/// Angular frequency of DFT index `j`: `pi j / L`, folded to `(-N/2, N/2]`.
pub fn frequency(grid: &Grid, j: usize) -> f64 {
    let n = grid.n as i64;
    let j = j as i64;
    let s = if j > n / 2 { j - n } else { j };
    PI * s as f64 / grid.halfwidth
}

/// Builds `{phi_k}_{k <= K}` for the standard profile.
pub fn build_phi(grid: &Grid, k_max: u32) -> Result<ResolutionOfUnity> {
    build_phi_with(grid, k_max, Profile::Standard)
}

pub fn build_phi_with(grid: &Grid, k_max: u32, profile: Profile) -> Result<ResolutionOfUnity> {
    let nyq = nyquist(grid);
    if 2f64.powi(k_max as i32) >= nyq {
        return Err(Error::NyquistExceeded { k_max, nyquist: nyq });
    }
    Ok(ResolutionOfUnity {
        k_max,
        profile,
        grid: *grid,
    })
}

impl ResolutionOfUnity {
    pub fn phi0(&self, r: f64) -> f64 {
        self.profile.phi0(r)
    }

    /// `phi_k` at `|xi| = r`.
    pub fn phi(&self, k: u32, r: f64) -> f64 {
        if k == 0 {
            return self.phi0(r);
        }
        let s = 2f64.powi(-(k as i32));
        self.phi0(s * r) - self.phi0(2.0 * s * r)
    }

    /// `|xi|` at every DFT index, in sample order.
    pub fn radii(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.len())
            .map(|i| {
                let [a, b] = g.unflatten(i);
                if g.dim == 1 {
                    frequency(g, a).abs()
                } else {
                    frequency(g, a).hypot(frequency(g, b))
                }
            })
            .collect()
    }
}

/// Forward / inverse DFT on a 1-d or 2-d grid.
struct Transform {
    n: usize,
    dim: usize,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Transform {
    fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        Transform {
            n: grid.n,
            dim: grid.dim,
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
        }
    }

    fn apply(&self, data: &mut [Complex64], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let n = self.n;
        // rows (contiguous), then columns through a transpose
        plan.process(data);
        if self.dim == 2 {
            transpose(data, n);
            plan.process(data);
            transpose(data, n);
        }
        if !forward {
            let scale = 1.0 / (n.pow(self.dim as u32)) as f64;
            data.iter_mut().for_each(|z| *z *= scale);
        }
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// The pieces `F^{-1} phi_k * f`, `k = 0..=K`.
#[derive(Clone, Debug)]
pub struct LpDecomposition {
    pub pieces: Vec<GridFunction>,
    /// Largest imaginary part left by the inverse transforms, relative to `max |f|`.
    pub imag_residue: f64,
}

impl LpDecomposition {
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pieces[0].samples().len()];
        for p in &self.pieces {
            out.iter_mut().zip(p.samples()).for_each(|(o, v)| *o += v);
        }
        out
    }
}

/// Littlewood-Paley pieces by `IDFT(phi_k DFT(f))`.
pub fn lp_pieces(f: &GridFunction, ru: &ResolutionOfUnity) -> Result<LpDecomposition> {
    let grid = *f.grid();
    if grid != ru.grid {
        return Err(Error::InvalidGrid("resolution of unity built for another grid".into()));
    }
    let tr = Transform::new(&grid);
    let mut spec: Vec<Complex64> = f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    tr.apply(&mut spec, true);
    let radii = ru.radii();
    let scale = f.samples().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let levels: Vec<u32> = (0..=ru.k_max).collect();
    let out = crate::par::map(&levels, |&k| {
        let mut buf: Vec<Complex64> = spec.iter().zip(&radii).map(|(z, &r)| z * ru.phi(k, r)).collect();
        tr.apply(&mut buf, false);
        let imag = buf.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
        (buf.into_iter().map(|z| z.re).collect::<Vec<_>>(), imag)
    });
    let mut pieces = Vec::with_capacity(out.len());
    let mut imag_residue = 0.0_f64;
    for (samples, imag) in out {
        imag_residue = imag_residue.max(if scale > 0.0 { imag / scale } else { imag });
        pieces.push(GridFunction::from_samples(grid, samples)?);
    }
    debug_assert!(imag_residue <= 1e-10, "imaginary residue {imag_residue}");
    Ok(LpDecomposition { pieces, imag_residue })
}

fn aggregate(pieces: &[GridFunction], weight: impl Fn(usize, usize) -> f64, kind: SpaceKind, p: f64, q: f64) -> f64 {
    let grid = pieces[0].grid();
    let vol = grid.cell_volume();
    match kind {
        SpaceKind::B => pieces
            .iter()
            .enumerate()
            .map(|(k, piece)| {
                let w: Vec<f64> = piece
                    .samples()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| weight(k, i) * v)
                    .collect();
                lp_norm(&w, p, vol).powf(q)
            })
            .sum::<f64>()
            .powf(1.0 / q),
        SpaceKind::F => {
            let mut acc = vec![0.0; grid.len()];
            for (k, piece) in pieces.iter().enumerate() {
                for (i, v) in piece.samples().iter().enumerate() {
                    acc[i] += (weight(k, i) * v).abs().powf(q);
                }
            }
            acc.iter_mut().for_each(|a| *a = a.powf(1.0 / q));
            lp_norm(&acc, p, vol)
        }
    }
}

/// `B`: `(sum_k ||t_k (F^{-1} phi_k * f)||_p^q)^{1/q}`;
/// `F`: `||(sum_k t_k^q |F^{-1} phi_k * f|^q)^{1/q}||_p`.
pub fn fourier_norm(f: &GridFunction, t: &WeightSequence, sp: &SpaceParams, ru: &ResolutionOfUnity) -> Result<f64> {
    let k_max = ru.k_max as usize;
    t.level(k_max)?;
    if *t.grid() != *f.grid() {
        return Err(Error::InvalidGrid(
            "weights and function live on different grids".into(),
        ));
    }
    let lp = lp_pieces(f, ru)?;
    let levels = t.levels();
    Ok(aggregate(
        &lp.pieces,
        |k, i| levels[k].samples()[i],
        sp.kind,
        sp.p,
        sp.q,
    ))
}

/// The classical `B^s_{p,q}` / `F^s_{p,q}` norm, with `t_k = 2^{ks}` built in.
pub fn classical_fourier_norm(
    f: &GridFunction,
    s: f64,
    kind: SpaceKind,
    p: f64,
    q: f64,
    ru: &ResolutionOfUnity,
) -> Result<f64> {
    let lp = lp_pieces(f, ru)?;
    Ok(aggregate(&lp.pieces, |k, _| 2f64.powf(s * k as f64), kind, p, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightSpec;
    use approx::assert_relative_eq;

    fn gaussian(grid: Grid) -> GridFunction {
        GridFunction::from_fn(grid, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp()).unwrap()
    }

    #[test]
    fn profile_shape() {
        for p in [Profile::Standard, Profile::Steep] {
            assert_eq!(p.phi0(0.0), 1.0);
            assert_eq!(p.phi0(1.0), 1.0);
            assert_eq!(p.phi0(1.5), 0.0);
            let mut prev = 1.0;
            for i in 1..100 {
                let v = p.phi0(1.0 + 0.005 * i as f64);
                assert!(v <= prev && v >= 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn phi_examples() {
        let g = Grid::line(8.0, 4096);
        let ru = build_phi(&g, 6).unwrap();
        assert_eq!(ru.phi(1, 0.5), 0.0);
        for k in 0..=6 {
            let total: f64 = (0..=k).map(|j| ru.phi(j, 1.0)).sum();
            assert_eq!(total, 1.0);
        }
        // supp phi_k in [2^{k-1}, 3 2^{k-1}]
        for k in 1..=6 {
            let lo = 2f64.powi(k - 1);
            assert_eq!(ru.phi(k as u32, lo), 0.0);
            assert_eq!(ru.phi(k as u32, 3.0 * lo), 0.0);
            assert!(ru.phi(k as u32, 2.0 * lo) > 0.99);
        }
    }

    #[test]
    fn k_max_helpers() {
        let g = Grid::line(8.0, 4096);
        assert_eq!(fourier_k_max(&g), 9);
        assert_eq!(difference_k_max(&g), 6);
        assert_eq!(shared_k_max(&g), 6);
        assert!(matches!(build_phi(&g, 10), Err(Error::NyquistExceeded { .. })));
    }

    #[test]
    fn band_limited_stays_in_piece_zero() {
        // frequencies pi j / L with |xi| <= 1
        let g = Grid::line(std::f64::consts::PI * 4.0, 1024);
        let f = GridFunction::sample(g, |x| 1.0 + (0.5 * x[0]).cos() + 0.3 * (0.75 * x[0]).sin()).unwrap();
        let ru = build_phi(&g, 5).unwrap();
        let lp = lp_pieces(&f, &ru).unwrap();
        for (a, b) in lp.pieces[0].samples().iter().zip(f.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
        for piece in &lp.pieces[1..] {
            assert!(piece.samples().iter().all(|v| v.abs() < 1e-12));
        }
        assert!(lp.imag_residue < 1e-10);
    }

    #[test]
    fn cosine_energy_in_levels_two_and_three() {
        // cos(4x) on [-pi, pi): xi = 4 sits in supp phi_2 (2..6) and supp phi_3 (4..12);
        // phi_3(4) = phi_0(1/2) - phi_0(1) = 0, so all energy is in piece 2.
        let g = Grid::line(std::f64::consts::PI, 256);
        let f = GridFunction::sample(g, |x| (4.0 * x[0]).cos()).unwrap();
        let ru = build_phi(&g, 5).unwrap();
        let lp = lp_pieces(&f, &ru).unwrap();
        let energy: Vec<f64> = lp.pieces.iter().map(|p| p.lp_norm(2.0)).collect();
        let total = f.lp_norm(2.0);
        assert_relative_eq!(energy[2] + energy[3], total, max_relative = 1e-10);
        for k in [0, 1, 4, 5] {
            assert!(energy[k] < 1e-10 * total);
        }
    }

    #[test]
    fn zero_function() {
        let g = Grid::line(8.0, 256);
        let ru = build_phi(&g, 4).unwrap();
        let lp = lp_pieces(&GridFunction::zeros(g), &ru).unwrap();
        assert!(lp.pieces.iter().all(|p| p.samples().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn telescoping_reconstruction() {
        let g = Grid::line(8.0, 1024);
        let f = gaussian(g);
        let ru = build_phi(&g, 5).unwrap();
        let rec = lp_pieces(&f, &ru).unwrap().reconstruct();
        let err: f64 = rec
            .iter()
            .zip(f.samples())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let nrm: f64 = f.samples().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / nrm < 1e-12, "{}", err / nrm);
    }

    #[test]
    fn two_dimensional_pieces_are_real_and_sum_to_f() {
        let g = Grid::new(2, 8.0, 128).unwrap();
        let f = GridFunction::sample(g, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() * (1.0 + x[0])).unwrap();
        let ru = build_phi(&g, 4).unwrap();
        let lp = lp_pieces(&f, &ru).unwrap();
        assert!(lp.imag_residue < 1e-10);
        let rec = lp.reconstruct();
        let err = rec
            .iter()
            .zip(f.samples())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn generic_and_classical_paths_agree() {
        let g = Grid::line(8.0, 2048);
        let f = gaussian(g);
        let ru = build_phi(&g, 6).unwrap();
        let t = WeightSequence::from_spec(
            &WeightSpec::geometric(1.0, WeightSpec::Constant { value: 1.0 }),
            g,
            6,
            2.0,
        )
        .unwrap();
        for kind in [SpaceKind::B, SpaceKind::F] {
            let sp = SpaceParams::new(kind, 2.0, 2.0, 2, 1.0, 1.0);
            let a = fourier_norm(&f, &t, &sp, &ru).unwrap();
            let b = classical_fourier_norm(&f, 1.0, kind, 2.0, 2.0, &ru).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        // p = q: B and F coincide
        let b = classical_fourier_norm(&f, 1.0, SpaceKind::B, 3.0, 3.0, &ru).unwrap();
        let fv = classical_fourier_norm(&f, 1.0, SpaceKind::F, 3.0, 3.0, &ru).unwrap();
        assert_relative_eq!(b, fv, max_relative = 1e-12);
        // more smoothness, larger norm
        let s2 = classical_fourier_norm(&f, 2.0, SpaceKind::B, 2.0, 2.0, &ru).unwrap();
        let s1 = classical_fourier_norm(&f, 1.0, SpaceKind::B, 2.0, 2.0, &ru).unwrap();
        assert!(s2 > s1);
    }

    #[test]
    fn profiles_give_comparable_norms() {
        let g = Grid::line(8.0, 2048);
        let fs = [
            gaussian(g),
            GridFunction::sample(g, |x| (-x[0] * x[0]).exp() * (3.0 * x[0]).sin()).unwrap(),
        ];
        let a = build_phi_with(&g, 6, Profile::Standard).unwrap();
        let b = build_phi_with(&g, 6, Profile::Steep).unwrap();
        for f in &fs {
            let na = classical_fourier_norm(f, 1.0, SpaceKind::F, 2.0, 2.0, &a).unwrap();
            let nb = classical_fourier_norm(f, 1.0, SpaceKind::F, 2.0, 2.0, &b).unwrap();
            let r = na / nb;
            assert!(r > 0.5 && r < 2.0, "{r}");
        }
    }

    #[test]
    fn missing_levels() {
        let g = Grid::line(8.0, 256);
        let ru = build_phi(&g, 4).unwrap();
        let t = WeightSequence::from_spec(&WeightSpec::Constant { value: 1.0 }, g, 2, 2.0).unwrap();
        let sp = SpaceParams::new(SpaceKind::B, 2.0, 2.0, 2, 1.0, 1.0);
        assert!(matches!(
            fourier_norm(&GridFunction::zeros(g), &t, &sp, &ru),
            Err(Error::MissingLevels { .. })
        ));
    }
}
