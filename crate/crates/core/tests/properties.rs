mod common;

use common::*;
use jetreg::image::{AnalyticImage, Rect};
use jetreg::kernel::{kernel_deriv, kernel_scalar, MultiIndex, PairTable};
use jetreg::matching::{match_value, oracle_integral, precompute_fixed, MatchConfig};
use jetreg::{JetState, KernelSpec};
use proptest::prelude::*;

fn axes_strategy(max: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..2, 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernel_derivatives_ignore_axis_order(
        axes in axes_strategy(6),
        x in (-2.0f64..2.0, -2.0f64..2.0),
        sigma in 0.2f64..2.0,
        rot in 0usize..6,
    ) {
        let spec = KernelSpec::new(sigma).unwrap();
        let x = [x.0, x.1];
        let a = kernel_deriv(&x, &MultiIndex::new(&axes).unwrap(), &spec).unwrap();
        let mut perm = axes.clone();
        if !perm.is_empty() {
            let r = rot % perm.len();
            perm.rotate_left(r);
            perm.reverse();
        }
        let b = kernel_deriv(&x, &MultiIndex::new(&perm).unwrap(), &spec).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn kernel_derivatives_have_parity(
        axes in axes_strategy(6),
        x in (-2.0f64..2.0, -2.0f64..2.0),
        sigma in 0.2f64..2.0,
    ) {
        let spec = KernelSpec::new(sigma).unwrap();
        let idx = MultiIndex::new(&axes).unwrap();
        let a = kernel_deriv(&[x.0, x.1], &idx, &spec).unwrap();
        let b = kernel_deriv(&[-x.0, -x.1], &idx, &spec).unwrap();
        let sign = if axes.len() % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((a - sign * b).abs() <= 1e-15 * a.abs().max(1.0));
    }

    #[test]
    fn kernel_derivatives_match_finite_differences(
        axes in axes_strategy(5),
        dir in 0usize..2,
        x in (-3.0f64..3.0, -3.0f64..3.0),
        sigma in 0.3f64..2.0,
    ) {
        let spec = KernelSpec::new(sigma).unwrap();
        let x = [x.0 * sigma, x.1 * sigma];
        let step = 1e-4 * sigma;
        let lower = MultiIndex::new(&axes).unwrap();
        let mut up = axes.clone();
        up.push(dir);
        let got = kernel_deriv(&x, &MultiIndex::new(&up).unwrap(), &spec).unwrap();
        let mut xp = x;
        xp[dir] += step;
        let mut xm = x;
        xm[dir] -= step;
        let fd = (kernel_deriv(&xp, &lower, &spec).unwrap() - kernel_deriv(&xm, &lower, &spec).unwrap()) / (2.0 * step);
        // near a zero of the Hermite factor compare against the natural
        // magnitude sigma^-n of an order-n derivative
        let scale = fd.abs().max(sigma.powi(-(up.len() as i32)));
        prop_assert!((got - fd).abs() < 1e-6 * scale, "{} vs {}", got, fd);
    }

    #[test]
    fn kernel_value_is_in_unit_interval(x in (-1e3f64..1e3, -1e3f64..1e3), sigma in 1e-2f64..1e2) {
        let v = kernel_scalar(&[x.0, x.1], &KernelSpec::new(sigma).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        // strictly positive wherever the exponent is representable
        if (x.0 * x.0 + x.1 * x.1) / (2.0 * sigma * sigma) < 700.0 {
            prop_assert!(v > 0.0);
        }
    }

    #[test]
    fn pair_table_agrees_with_direct_evaluation(
        xi in (-1.0f64..1.0, -1.0f64..1.0),
        xj in (-1.0f64..1.0, -1.0f64..1.0),
        axes in axes_strategy(6),
    ) {
        let spec = KernelSpec::new(0.7).unwrap();
        let t = PairTable::new(&[xi.0, xi.1], &[xj.0, xj.1], &spec, 6).unwrap();
        let idx = MultiIndex::new(&axes).unwrap();
        let direct = kernel_deriv(&[xi.0 - xj.0, xi.1 - xj.1], &idx, &spec).unwrap();
        prop_assert_eq!(t.get(&idx).unwrap(), direct);
    }

    #[test]
    fn flatten_round_trips(seed in any::<u64>(), k in 0u8..3, n in 1usize..5) {
        let mut r = rng(seed);
        let s = random_state(&mut r, k, n, 0.5);
        let flat = s.flatten();
        prop_assert_eq!(flat.len(), JetState::flat_len(s.order, n));
        let back = JetState::unflatten(&flat, s.order, n).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn symmetrize_is_idempotent_and_survives_packing(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let mut s = random_state(&mut r, 2, n, 0.5);
        // break the symmetry on purpose
        s.q2[0][0][0][1] += 0.25;
        s.mu2[0][1][1][0] -= 0.5;
        s.symmetrize();
        let once = s.clone();
        s.symmetrize();
        prop_assert_eq!(&s, &once);
        let back = JetState::unflatten(&s.flatten(), s.order, n).unwrap();
        prop_assert_eq!(back, once);
    }

    #[test]
    fn grid_points_are_separated_by_the_spacing(n in 1usize..12, w in 0.5f64..3.0, hgt in 0.5f64..3.0) {
        let dom = Rect::new(-0.5, 0.25, -0.5 + w, 0.25 + hgt);
        let s = JetState::init_grid(&dom, n, order(0)).unwrap();
        prop_assert_eq!(s.len(), n * n);
        let h = (w / n as f64).min(hgt / n as f64);
        for i in 0..s.len() {
            prop_assert!(dom.contains(&s.q[i]));
            for j in 0..i {
                let d = ((s.q[i][0] - s.q[j][0]).powi(2) + (s.q[i][1] - s.q[j][1]).powi(2)).sqrt();
                prop_assert!(d >= h * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn order_zero_match_is_nonnegative(seed in any::<u64>(), n in 1usize..5, k in 0u8..3) {
        let mut r = rng(seed);
        let grid = JetState::init_grid(&Rect::unit(), n, order(k)).unwrap();
        let mut end = random_state(&mut r, k, n * n, 0.3);
        end.q = grid.q.iter().zip(&end.q).map(|(g, d)| [g[0] + 0.1 * d[0], g[1] + 0.1 * d[1]]).collect();
        let fixed = precompute_fixed(&AnalyticImage::Trig, &grid.q);
        let cfg = MatchConfig::for_grid(0, Rect::unit(), n, 0.5).unwrap();
        prop_assert!(match_value(&fixed, &Wavy, &end, &cfg).unwrap() >= 0.0);
    }

    #[test]
    fn perfect_match_is_zero_at_every_order(n in 1usize..9, m in 0u8..3) {
        // identical fields, identity end state
        let grid = JetState::init_grid(&Rect::unit(), n, order(2)).unwrap();
        let fixed = precompute_fixed(&Wavy, &grid.q);
        let cfg = MatchConfig::for_grid(m, Rect::unit(), n, 0.1).unwrap();
        prop_assert_eq!(match_value(&fixed, &Wavy, &grid, &cfg).unwrap(), 0.0);
    }
}

#[test]
fn oracle_integral_is_self_converged() {
    let zero = AnalyticImage::Zero;
    let a = oracle_integral(&AnalyticImage::Trig, &zero, &Rect::unit(), 512).unwrap();
    let b = oracle_integral(&AnalyticImage::Trig, &zero, &Rect::unit(), 1024).unwrap();
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    // sin^2 and x^4 give 1/2 + 1/5; the cross term 2 x^2 sin(6 pi x) gives -1/(3 pi)
    let exact = 0.7 - 1.0 / (3.0 * std::f64::consts::PI);
    assert!((b - exact).abs() < 1e-10, "{b} vs {exact}");
}

#[test]
fn oracle_rejects_coarse_quadrature() {
    assert!(oracle_integral(&AnalyticImage::Trig, &AnalyticImage::Zero, &Rect::unit(), 100).is_err());
}
