mod common;

use common::*;
use jetreg::ode::{integrate, integrate_forward};
use jetreg::register::{RegistrationProblem, Settings};
use jetreg::synthetic::{synthetic, SyntheticKind, SyntheticParams};
use jetreg::KernelSpec;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn rk4_converges_at_fourth_order() {
    let mut r = rng(71);
    for k in 0..=2u8 {
        let spec = KernelSpec::new(0.6).unwrap();
        let s = random_state(&mut r, k, 3, 0.6);
        let end = |steps| integrate_forward(&s, steps, &spec).unwrap().last().as_flat_full();
        let reference = end(800);
        let errs: Vec<f64> = [50, 100, 200].iter().map(|&n| dist(&end(n), &reference)).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((8.0..=32.0).contains(&ratio), "k={k}: errors {errs:?}");
        }
    }
}

#[test]
fn backward_run_undoes_forward_run() {
    let mut r = rng(72);
    let spec = KernelSpec::new(0.8).unwrap();
    let mut s = random_state(&mut r, 2, 3, 0.8);
    s.p.iter_mut().for_each(|v| *v = [0.3 * v[0], 0.3 * v[1]]);
    let fwd = integrate(&s, 1.0, 200, &spec).unwrap();
    let back = integrate(fwd.last(), -1.0, 200, &spec).unwrap();
    assert!(dist(&back.last().as_flat_full(), &s.as_flat_full()) < 1e-7);
    assert_eq!(back.times[200], -1.0);
}

#[test]
fn trajectory_time_nodes_are_uniform() {
    let mut r = rng(73);
    let spec = KernelSpec::new(0.8).unwrap();
    let s = random_state(&mut r, 1, 2, 0.8);
    let tr = integrate_forward(&s, 7, &spec).unwrap();
    assert_eq!(tr.times[0], 0.0);
    assert_eq!(tr.times[7], 1.0);
    for w in tr.times.windows(2) {
        assert!((w[1] - w[0] - 1.0 / 7.0).abs() < 1e-15);
    }
    let ex = tr.export();
    assert_eq!(ex.states.len(), 8);
    assert_eq!(ex.particles, 2);
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut r = rng(74);
    let spec = KernelSpec::new(0.5).unwrap();
    let s = random_state(&mut r, 2, 4, 0.5);
    let a = in_pool(1, || integrate_forward(&s, 30, &spec).unwrap().last().as_flat_full());
    let b = in_pool(4, || integrate_forward(&s, 30, &spec).unwrap().last().as_flat_full());
    let c = integrate_forward(&s, 30, &spec).unwrap().last().as_flat_full();
    assert_eq!(a, b);
    assert_eq!(a, c);

    let p = SyntheticParams::default();
    let fixed = synthetic(SyntheticKind::Blob, 32, &p).unwrap();
    let moving = synthetic(
        SyntheticKind::Blob,
        32,
        &SyntheticParams {
            offset: [0.05, 0.0],
            ..p
        },
    )
    .unwrap();
    let settings = Settings {
        grid: 3,
        sigma: 0.3,
        steps: 10,
        ..Settings::default()
    };
    let prob = RegistrationProblem::from_images(&fixed, &moving, settings).unwrap();
    let x: Vec<f64> = (0..prob.momentum_len())
        .map(|i| 0.01 * ((i % 7) as f64 - 3.0))
        .collect();
    let one = in_pool(1, || prob.energy_and_gradient(&x).unwrap());
    let many = in_pool(3, || prob.energy_and_gradient(&x).unwrap());
    assert_eq!(one.0.to_bits(), many.0.to_bits());
    assert_eq!(one.1, many.1);
}
