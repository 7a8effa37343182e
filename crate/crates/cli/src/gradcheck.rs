//! Seeded self-test of the gradient machinery on a small blob problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jetreg::ode::{integrate_adjoint_path, integrate_tangent};
use jetreg::register::{RegistrationProblem, Settings};
use jetreg::synthetic::{synthetic, SyntheticKind, SyntheticParams};
use jetreg::variation::{adjoint_apply, tangent_apply};
use jetreg::JetState;

use crate::error::{CliError, CliResult};
use crate::GradcheckArgs;

const RESOLUTION: usize = 32;
const FD_STEP: f64 = 1e-6;
const PAIRING_TOL: f64 = 1e-6;
const DUALITY_TOL: f64 = 1e-10;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = a.iter().chain(b).map(|x| x.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn random_direction(r: &mut ChaCha8Rng, like: &JetState) -> CliResult<JetState> {
    let n = JetState::flat_len(like.order, like.len());
    let v: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    Ok(JetState::unflatten(&v, like.order, like.len())?)
}

struct Outcome {
    grad: f64,
    pairing: f64,
    duality: f64,
}

fn check_problem(r: &mut ChaCha8Rng, prob: &RegistrationProblem) -> CliResult<Outcome> {
    let x: Vec<f64> = (0..prob.momentum_len()).map(|_| r.gen_range(-0.05..0.05)).collect();
    let (_, g) = prob.energy_and_gradient(&x)?;
    let mut fd = Vec::with_capacity(x.len());
    for c in 0..x.len() {
        let mut a = x.clone();
        a[c] += FD_STEP;
        let mut b = x.clone();
        b[c] -= FD_STEP;
        fd.push((prob.energy(&a)? - prob.energy(&b)?) / (2.0 * FD_STEP));
    }
    let grad = rel_err(&g, &fd);

    // tangent and adjoint flows along the same trajectory pair to a constant
    let traj = prob.shoot(&x)?;
    let d0 = random_direction(r, traj.initial())?;
    let lam1 = random_direction(r, traj.last())?;
    let deltas = integrate_tangent(&traj, &d0, &prob.spec)?;
    let lams = integrate_adjoint_path(&traj, &lam1, &prob.spec)?;
    let pairs: Vec<f64> = lams.iter().zip(&deltas).map(|(l, d)| l.dot(d)).collect();
    let pairing = pairs.iter().map(|p| (p - pairs[0]).abs()).fold(0.0, f64::max) / pairs[0].abs();

    let s = traj.last();
    let d = random_direction(r, s)?;
    let lam = random_direction(r, s)?;
    let lhs = lam.dot(&tangent_apply(s, &d, &prob.spec)?);
    let rhs = -adjoint_apply(s, &lam, &prob.spec)?.dot(&d);
    let duality = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
    Ok(Outcome { grad, pairing, duality })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn run(args: GradcheckArgs) -> CliResult<()> {
    if !(args.tol > 0.0) {
        return Err(CliError::Usage("--tol must be > 0".into()));
    }
    let mut r = ChaCha8Rng::seed_from_u64(args.seed);
    let base = SyntheticParams::default();
    let offset = [r.gen_range(-0.1..0.1), r.gen_range(-0.1..0.1)];
    let fixed = synthetic(SyntheticKind::Blob, RESOLUTION, &base)?;
    let moving = synthetic(SyntheticKind::Blob, RESOLUTION, &SyntheticParams { offset, ..base })?;
    println!(
        "seed {}: blob offset ({:+.4}, {:+.4}), {}x{} grid, sigma {}, {} steps",
        args.seed, offset[0], offset[1], args.grid, args.grid, args.sigma, args.steps
    );

    let mut failed = vec![];
    for m in 0..=args.jet_order {
        let settings = Settings {
            jet_order: args.jet_order,
            match_order: m,
            grid: args.grid,
            sigma: args.sigma,
            steps: args.steps,
            ..Settings::default()
        };
        let prob = RegistrationProblem::from_images(&fixed, &moving, settings)?;
        let o = check_problem(&mut r, &prob)?;
        let tag = format!("k={} m={m}", args.jet_order);
        let rows = [
            ("max grad rel err", o.grad, args.tol),
            ("pairing drift", o.pairing, PAIRING_TOL),
            ("transpose identity", o.duality, DUALITY_TOL),
        ];
        for (name, value, tol) in rows {
            let ok = value < tol;
            println!("{tag}: {name} {value:.3e} < {tol:e}: {}", verdict(ok));
            if !ok {
                failed.push(format!("{tag} {name}"));
            }
        }
    }
    if failed.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}
