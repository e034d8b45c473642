use dilatest::differences::{delta_avg_window, delta_m, difference_field};
use dilatest::dilation::{choose_i, compute_H};
use dilatest::dyadic::{box_average, cube_box, cubes_covering, AxisBox, DyadicCube};
use dilatest::lp_fourier::{build_phi, classical_fourier_norm, lp_pieces};
use dilatest::maximal::{fs_inequality_ratio, hl_maximal};
use dilatest::norms::{diff_norm, star_norm, SpaceKind, SpaceParams};
use dilatest::weights::{ap_constant, WeightSequence, WeightSpec};
use dilatest::{Grid, GridFunction};
use proptest::prelude::*;

fn line(n: usize) -> Grid {
    Grid::line(8.0, n)
}

fn bump(center: f64, width: f64, amp: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
    move |x: &[f64]| amp * (-((x[0] - center) / width).powi(2)).exp()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dyadic_geometry_is_exact(k in -3i32..12, m in -4000i64..4000) {
        let c = DyadicCube::new(k, vec![m]);
        prop_assert_eq!(c.side(), 2f64.powi(-k));
        prop_assert_eq!(c.corner()[0], m as f64 * 2f64.powi(-k));
        let child = DyadicCube::new(k + 1, vec![2 * m + 1]);
        prop_assert_eq!(child.ancestor(k), c);
    }

    #[test]
    fn level_cubes_tile_the_domain(k in 0i32..6, dim in 1usize..=2) {
        let g = Grid::new(dim, 4.0, 256).unwrap();
        let cubes = cubes_covering(&g, &AxisBox::domain(&g), k).unwrap();
        let total: f64 = cubes.iter().map(|c| cube_box(c).measure()).sum();
        prop_assert_eq!(total, 8f64.powi(dim as i32));
    }

    #[test]
    fn box_averages_combine(a in -6.0f64..-1.0, m in -0.9f64..0.9, b in 1.0f64..6.0, c in -2.0f64..2.0) {
        let f = GridFunction::from_fn(line(1024), bump(c, 1.3, 1.0)).unwrap();
        let left = AxisBox::new(vec![a], vec![m]).unwrap();
        let right = AxisBox::new(vec![m], vec![b]).unwrap();
        let whole = AxisBox::new(vec![a], vec![b]).unwrap();
        let mixed = (box_average(&f, &left).unwrap() * (m - a) + box_average(&f, &right).unwrap() * (b - m)) / (b - a);
        prop_assert!((box_average(&f, &whole).unwrap() - mixed).abs() < 1e-12);
    }

    #[test]
    fn ap_constant_is_scale_invariant(alpha in -0.8f64..0.8, c in 0.1f64..10.0) {
        let g = line(512);
        let w = GridFunction::sample(g, |x| x[0].abs().powf(alpha)).unwrap();
        let a = ap_constant(&w, 2.0, 4).unwrap();
        let b = ap_constant(&w.scaled(c), 2.0, 4).unwrap();
        prop_assert!(rel(a.constant, b.constant) < 1e-12);
        prop_assert!(a.constant >= 1.0 - 1e-12);
        prop_assert!(a.depth_trace.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn difference_recursion(c in -3.0f64..3.0, w in 0.5f64..2.0, steps in 1usize..200, m in 1u32..5) {
        let g = line(2048);
        let f = GridFunction::from_fn(g, bump(c, w, 1.0)).unwrap();
        let h = [steps as f64 * g.spacing()];
        let direct = difference_field(&f, m + 1, &h);
        let inner = difference_field(&f, m, &h).into_iter().map(|v| v.unwrap_or(0.0)).collect();
        let composed = difference_field(&GridFunction::from_samples(g, inner).unwrap(), 1, &h);
        for (a, b) in direct.iter().zip(&composed) {
            if let (Some(a), Some(b)) = (a, b) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn differences_annihilate_low_degree(coef in prop::collection::vec(-2.0f64..2.0, 4), m in 1u32..5,
                                         x in -3.0f64..3.0, h in -0.5f64..0.5) {
        let deg = (m - 1) as usize;
        let cs = coef[..=deg].to_vec();
        let p = GridFunction::from_fn(line(4096), move |x| cs.iter().rev().fold(0.0, |acc, c| acc * x[0] + c)).unwrap();
        prop_assert!(delta_m(&p, m, &[h], &[x]).unwrap().abs() < 1e-9);
        prop_assert!(delta_avg_window(&p, &[x], 2, m).unwrap().abs() < 1e-9);
    }

    #[test]
    fn differences_commute_with_dilation(lambda in 1.0f64..4.0, x in -1.0f64..1.0, h in -0.3f64..0.3, m in 1u32..4) {
        let g = line(1024);
        let f = GridFunction::from_fn(g, bump(0.4, 1.1, 1.0)).unwrap();
        let dilated = GridFunction::from_fn(g, move |y| bump(0.4, 1.1, 1.0)(&[lambda * y[0]])).unwrap();
        let a = delta_m(&dilated, m, &[h], &[x]).unwrap();
        let b = delta_m(&f, m, &[lambda * h], &[lambda * x]).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn norms_are_homogeneous(c in -5.0f64..5.0, kind in prop_oneof![Just(SpaceKind::B), Just(SpaceKind::F)]) {
        let g = line(1024);
        let f = GridFunction::from_fn(g, bump(0.3, 0.8, 1.0)).unwrap();
        let t = WeightSequence::from_spec(&WeightSpec::geometric(0.5, WeightSpec::power(0.2)), g, 4, 2.0).unwrap();
        let mut sp = SpaceParams::new(kind, 2.0, 1.5, 2, 0.5, 0.5);
        sp.k_max = Some(4);
        let cf = f.scaled(c);
        prop_assert!(rel(diff_norm(&cf, &t, &sp).unwrap(), c.abs() * diff_norm(&f, &t, &sp).unwrap()) < 1e-12);
        prop_assert!(rel(star_norm(&cf, &t, &sp).unwrap(), c.abs() * star_norm(&f, &t, &sp).unwrap()) < 1e-12);
    }

    #[test]
    fn triangle_inequality(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
        let g = line(1024);
        let f = GridFunction::from_fn(g, bump(c1, 0.7, 1.0)).unwrap();
        let h = GridFunction::from_fn(g, bump(c2, 1.2, -0.6)).unwrap();
        let sum = GridFunction::from_fn(g, move |x| bump(c1, 0.7, 1.0)(x) + bump(c2, 1.2, -0.6)(x)).unwrap();
        let t = WeightSequence::from_spec(&WeightSpec::geometric(1.0, WeightSpec::Constant { value: 1.0 }), g, 4, 2.0).unwrap();
        let mut sp = SpaceParams::new(SpaceKind::F, 2.0, 2.0, 2, 1.0, 1.0);
        sp.k_max = Some(4);
        let n = |u: &GridFunction| diff_norm(u, &t, &sp).unwrap();
        prop_assert!(n(&sum) <= (n(&f) + n(&h)) * (1.0 + 1e-12));
    }

    #[test]
    fn lp_pieces_are_real_and_b_equals_f_at_p_eq_q(c in -2.0f64..2.0, w in 0.3f64..1.5, p in 1.0f64..4.0) {
        let g = line(1024);
        let f = GridFunction::from_fn(g, bump(c, w, 1.0)).unwrap();
        let ru = build_phi(&g, 5).unwrap();
        prop_assert!(lp_pieces(&f, &ru).unwrap().imag_residue < 1e-10);
        let b = classical_fourier_norm(&f, 0.7, SpaceKind::B, p, p, &ru).unwrap();
        let fk = classical_fourier_norm(&f, 0.7, SpaceKind::F, p, p, &ru).unwrap();
        prop_assert!(rel(b, fk) < 1e-12);
    }

    #[test]
    fn maximal_function_bounds(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, a in -2.0f64..2.0) {
        let g = line(512);
        let f = GridFunction::sample(g, |x| a * (x[0] - c1).sin() * ((x[0] - c2).abs() < 1.5) as u8 as f64).unwrap();
        let h = GridFunction::sample(g, |x| (-(x[0] - c2).powi(2)).exp()).unwrap();
        let sum = GridFunction::from_samples(g, f.samples().iter().zip(h.samples()).map(|(x, y)| x + y).collect()).unwrap();
        let (mf, mh, ms) = (hl_maximal(&f), hl_maximal(&h), hl_maximal(&sum));
        for i in 0..g.len() {
            prop_assert!(mf.samples()[i] >= f.samples()[i].abs() - 1e-12);
            prop_assert!(ms.samples()[i] <= mf.samples()[i] + mh.samples()[i] + 1e-12);
        }
    }

    #[test]
    fn fefferman_stein_ratio_is_scale_free(c in 0.01f64..100.0, sigma in 0.2f64..0.9) {
        let g = line(512);
        let fs: Vec<GridFunction> = (0..3)
            .map(|k| GridFunction::sample(g, |x| (-(x[0] - k as f64).powi(2) * (1 + k) as f64).exp()).unwrap())
            .collect();
        let scaled: Vec<GridFunction> = fs.iter().map(|f| f.scaled(c)).collect();
        let a = fs_inequality_ratio(&fs, 2.0, 1.5, sigma).unwrap();
        let b = fs_inequality_ratio(&scaled, 2.0, 1.5, sigma).unwrap();
        prop_assert!(rel(a, b) < 1e-10);
    }

    #[test]
    fn choose_i_brackets_lambda(lambda in 1.0f64..1e6) {
        let i = choose_i(lambda) as i32;
        prop_assert!(lambda < 2f64.powi(i) && 2f64.powi(i) <= 2.0 * lambda);
    }

    #[test]
    fn h_is_one_for_x_independent_weights(s in -1.0f64..2.0, lambda in 1.0f64..16.0) {
        let g = line(256);
        let t = WeightSequence::from_spec(&WeightSpec::geometric(s, WeightSpec::Constant { value: 2.0 }), g, 4, 2.0).unwrap();
        prop_assert_eq!(compute_H(&t, lambda, 4).unwrap(), 1.0);
    }

    #[test]
    fn h_below_pointwise_sup(beta in -0.4f64..0.6, lambda in 1.5f64..6.0) {
        let g = line(1024);
        let spec = WeightSpec::geometric(0.5, WeightSpec::shifted_power(vec![0.5], beta));
        let t = WeightSequence::from_spec(&spec, g, 4, 2.0).unwrap();
        let h = compute_H(&t, lambda, 4).unwrap();
        let sup = (0..=4u32)
            .flat_map(|k| (0..g.n).map(move |j| (k, g.coord(j))))
            .map(|(k, x)| spec.value(k, &[x / lambda]) / spec.value(k, &[x]))
            .fold(0.0, f64::max);
        prop_assert!(h <= sup * (1.0 + 1e-9));
    }
}
