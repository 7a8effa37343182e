mod common;

use common::*;
use jetreg::dynamics::state_derivative;
use jetreg::flowmap::{advect_points, advect_points_inverse, jacobians, velocity_at, warp_image, warp_image_inverse};
use jetreg::image::{gaussian_smooth, ImageField, Interpolant, Rect};
use jetreg::ode::integrate_forward;
use jetreg::presets::{shoot_preset, Preset};
use jetreg::synthetic::{synthetic, SyntheticKind, SyntheticParams};
use jetreg::tensor::det;
use jetreg::{JetOrder, JetState, KernelSpec};

#[test]
fn velocity_at_particles_is_the_position_rate() {
    let mut r = rng(61);
    for trial in 0..10 {
        let spec = KernelSpec::new(0.5 + 0.1 * trial as f64).unwrap();
        let s = random_state(&mut r, 2, 1 + trial % 4, 0.6);
        let rate = state_derivative(&s, &spec);
        for i in 0..s.len() {
            let u = velocity_at(&s, &s.q[i], &spec);
            for (ua, ra) in u.iter().zip(&rate.q[i]) {
                assert!((ua - ra).abs() <= 1e-14 * ra.abs().max(1.0));
            }
        }
    }
}

#[test]
fn points_on_particles_follow_them() {
    let mut r = rng(62);
    for k in 0..=2u8 {
        let spec = KernelSpec::new(0.7).unwrap();
        let mut s = random_state(&mut r, k, 3, 0.7);
        s.p.iter_mut().for_each(|v| *v = [0.3 * v[0], 0.3 * v[1]]);
        let tr = integrate_forward(&s, 50, &spec).unwrap();
        let out = advect_points(&tr, &s.q, &spec, tr.steps()).unwrap();
        for (a, b) in out.iter().zip(&tr.last().q) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }
}

#[test]
fn far_field_points_barely_move() {
    let spec = KernelSpec::new(0.1).unwrap();
    let mut s = JetState::at_rest(JetOrder::Two, vec![[0.0, 0.0]]);
    s.p[0] = [0.2, 0.0];
    s.mu1[0] = [[0.002, 0.001], [0.0, -0.002]];
    let tr = integrate_forward(&s, 50, &spec).unwrap();
    let pts = [[0.1, 0.8], [-0.7, -0.6], [1.5, 0.0]];
    let out = advect_points(&tr, &pts, &spec, 50).unwrap();
    let bound = (-8.0f64).exp() * 0.2;
    for (a, b) in pts.iter().zip(&out) {
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        assert!(d < bound, "moved {d}");
    }
}

#[test]
fn wide_kernel_translates_images() {
    let spec = KernelSpec::new(50.0).unwrap();
    let shift = [0.05, -0.03];
    let mut s = JetState::at_rest(JetOrder::Zero, vec![[0.5, 0.5]]);
    s.p[0] = shift;
    let tr = integrate_forward(&s, 20, &spec).unwrap();
    let img = gaussian_smooth(
        &synthetic(SyntheticKind::Blob, 48, &SyntheticParams::default()).unwrap(),
        1.0,
    );
    let it = Interpolant::fit(&img);
    let warped = warp_image(&tr, &it, (48, 48), &spec).unwrap();
    let mut worst: f64 = 0.0;
    for row in 0..48 {
        for col in 0..48 {
            let p = img.pixel_center(col, row);
            let want = it.value(&[p[0] + shift[0], p[1] + shift[1]]).clamp(0.0, 1.0);
            worst = worst.max((warped.get(col, row) - want).abs());
        }
    }
    assert!(worst < 1e-3, "worst {worst}");
}

#[test]
fn warp_then_inverse_is_near_identity() {
    let spec = KernelSpec::new(0.25).unwrap();
    let mut s = JetState::at_rest(JetOrder::One, vec![[0.4, 0.5], [0.6, 0.45]]);
    s.p = vec![[0.05, 0.02], [-0.02, 0.04]];
    s.mu1[0] = [[0.003, -0.002], [0.001, 0.0]];
    let tr = integrate_forward(&s, 40, &spec).unwrap();
    let img = gaussian_smooth(
        &synthetic(SyntheticKind::Blob, 64, &SyntheticParams::default()).unwrap(),
        1.5,
    );
    let it = Interpolant::fit(&img);
    let fwd = warp_image(&tr, &it, (64, 64), &spec).unwrap();
    let back = warp_image_inverse(&tr, &Interpolant::fit(&fwd), (64, 64), &spec).unwrap();
    let mean = img
        .pixels
        .iter()
        .zip(&back.pixels)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / img.pixels.len() as f64;
    assert!(mean < 1e-2, "mean abs diff {mean}");

    let pts = [[0.3, 0.3], [0.5, 0.5], [0.7, 0.6]];
    let there = advect_points(&tr, &pts, &spec, 40).unwrap();
    let again = advect_points_inverse(&tr, &there, &spec, 40).unwrap();
    for (a, b) in pts.iter().zip(&again) {
        assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
    }
}

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        .abs()
}

#[test]
fn advected_area_matches_integrated_jacobian() {
    let sigma = 0.2;
    let spec = KernelSpec::new(sigma).unwrap();
    let s = Preset::Expansion.state([0.5, 0.5], sigma);
    let tr = integrate_forward(&s, 100, &spec).unwrap();
    let (lo, hi) = (0.35, 0.65);
    let m = 200;
    let mut boundary = vec![];
    for side in 0..4 {
        for i in 0..m {
            let t = lo + (hi - lo) * i as f64 / m as f64;
            boundary.push(match side {
                0 => [t, lo],
                1 => [hi, t],
                2 => [hi + lo - t, hi],
                _ => [lo, hi + lo - t],
            });
        }
    }
    let moved = shoelace(&advect_points(&tr, &boundary, &spec, 100).unwrap());
    let n = 40;
    let cell = (hi - lo) / n as f64;
    let centres: Vec<[f64; 2]> = (0..n * n)
        .map(|i| {
            [
                lo + (i % n) as f64 * cell + 0.5 * cell,
                lo + (i / n) as f64 * cell + 0.5 * cell,
            ]
        })
        .collect();
    let integrated: f64 = jacobians(&tr, &centres, &spec)
        .unwrap()
        .iter()
        .map(|(_, j)| det(j))
        .sum::<f64>()
        * cell
        * cell;
    assert!(moved > 1.2 * (hi - lo) * (hi - lo), "expansion should grow the region");
    assert!((moved - integrated).abs() < 0.05 * moved, "{moved} vs {integrated}");
}

#[test]
fn preset_grids_stay_folded_free() {
    for p in Preset::FIGURE {
        let run = shoot_preset(p, 0.2, 100, &Rect::unit(), 11, 41).unwrap();
        let m = run.grid.min_logjac();
        assert!(m.is_finite(), "{}: grid folded (min log-Jacobian {m})", p.name());
        assert_eq!(run.grid.lines.len(), 44);
    }
}

#[test]
fn grid_csv_has_header_and_all_vertices() {
    let run = shoot_preset(Preset::Shear, 0.2, 20, &Rect::unit(), 3, 5).unwrap();
    let csv = run.grid.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("line_id,t,x,y,logjac"));
    assert_eq!(lines.count(), 2 * 2 * 3 * 5);
}
