//! Fixed-step RK4 integration of the jet-particle flow, its first variation,
//! and the discrete adjoint of the same scheme.
//!
//! The adjoint pass is the exact transpose of the linearised RK4 step, with
//! the stage states recomputed from the stored nodes. Gradients obtained from
//! it are therefore exact derivatives of the discrete forward map, and the
//! pairing `<lambda_n, delta_n>` with a co-integrated tangent is constant up
//! to round-off.

use serde::Serialize;

use crate::dynamics::state_derivative;
use crate::kernel::KernelSpec;
use crate::variation::{adjoint_apply, tangent_apply};
use crate::{AdjointState, Error, JetState, Result, TangentState};

/// Default number of RK4 steps on `[0, 1]`.
pub const DEFAULT_STEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Uniform time nodes from `0` to `duration`.
    pub times: Vec<f64>,
    pub states: Vec<JetState>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn initial(&self) -> &JetState {
        &self.states[0]
    }

    pub fn last(&self) -> &JetState {
        self.states.last().expect("trajectory has at least one node")
    }

    pub fn export(&self) -> TrajectoryExport {
        TrajectoryExport {
            schema_version: 1,
            order: self.states[0].k(),
            particles: self.states[0].len(),
            times: self.times.clone(),
            states: self.states.iter().map(JetState::flatten).collect(),
        }
    }
}

/// JSON form of a trajectory: time nodes plus packed flat states.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryExport {
    pub schema_version: u32,
    pub order: u8,
    pub particles: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// The four RK4 stage states `z, z + h/2 k1, z + h/2 k2, z + h k3` and the
/// stage slopes.
pub(crate) struct Stages {
    pub(crate) y: [JetState; 4],
    pub(crate) k: [JetState; 4],
}

pub(crate) fn stages(z: &JetState, h: f64, spec: &KernelSpec) -> Stages {
    let k1 = state_derivative(z, spec);
    let y2 = z.plus(0.5 * h, &k1);
    let k2 = state_derivative(&y2, spec);
    let y3 = z.plus(0.5 * h, &k2);
    let k3 = state_derivative(&y3, spec);
    let y4 = z.plus(h, &k3);
    let k4 = state_derivative(&y4, spec);
    Stages {
        y: [z.clone(), y2, y3, y4],
        k: [k1, k2, k3, k4],
    }
}

pub(crate) fn combine(z: &JetState, h: f64, k: &[JetState; 4]) -> JetState {
    let mut next = z.clone();
    next.axpy(h / 6.0, &k[0]);
    next.axpy(h / 3.0, &k[1]);
    next.axpy(h / 3.0, &k[2]);
    next.axpy(h / 6.0, &k[3]);
    next
}

pub fn rk4_step(z: &JetState, h: f64, spec: &KernelSpec) -> JetState {
    combine(z, h, &stages(z, h, spec).k)
}

fn is_finite(z: &JetState) -> bool {
    z.as_flat_full().iter().all(|v| v.is_finite())
}

/// Integrate over `[0, duration]` with `steps` uniform RK4 steps. A negative
/// duration runs the flow backwards in time.
pub fn integrate(state0: &JetState, duration: f64, steps: usize, spec: &KernelSpec) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    state0.validate()?;
    let h = duration / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(state0.clone());
    for n in 0..steps {
        let next = rk4_step(&states[n], h, spec);
        let t = duration * (n + 1) as f64 / steps as f64;
        if !is_finite(&next) {
            return Err(Error::BlowUp { node: n + 1, time: t });
        }
        times.push(t);
        states.push(next);
    }
    Ok(Trajectory { times, states })
}

/// Forward flow on `[0, 1]`, storing every node.
pub fn integrate_forward(state0: &JetState, steps: usize, spec: &KernelSpec) -> Result<Trajectory> {
    integrate(state0, 1.0, steps, spec)
}

/// First variation of the discrete flow: `delta_n = d z_n / d z_0 . delta0`
/// at every node.
pub fn integrate_tangent(traj: &Trajectory, delta0: &TangentState, spec: &KernelSpec) -> Result<Vec<TangentState>> {
    traj.initial().check_compatible(delta0)?;
    let h = traj.dt();
    let mut out = Vec::with_capacity(traj.times.len());
    out.push(delta0.clone());
    for n in 0..traj.steps() {
        let st = stages(&traj.states[n], h, spec);
        let d = &out[n];
        let dk1 = tangent_apply(&st.y[0], d, spec)?;
        let dk2 = tangent_apply(&st.y[1], &d.plus(0.5 * h, &dk1), spec)?;
        let dk3 = tangent_apply(&st.y[2], &d.plus(0.5 * h, &dk2), spec)?;
        let dk4 = tangent_apply(&st.y[3], &d.plus(h, &dk3), spec)?;
        let next = combine(d, h, &[dk1, dk2, dk3, dk4]);
        if !is_finite(&next) {
            return Err(Error::BlowUp {
                node: n + 1,
                time: traj.times[n + 1],
            });
        }
        out.push(next);
    }
    Ok(out)
}

/// Transpose of the linearised RK4 step at `z`: maps a covector on `z_{n+1}`
/// to one on `z_n`.
fn adjoint_step(z: &JetState, h: f64, lam: &AdjointState, spec: &KernelSpec) -> Result<AdjointState> {
    let st = stages(z, h, spec);
    // transpose(T) x = -adjoint_apply(x)
    let pull = |y: &JetState, x: &AdjointState| -> Result<AdjointState> { Ok(adjoint_apply(y, x, spec)?.scaled(-1.0)) };
    let mut out = lam.clone();
    let gk4 = lam.scaled(h / 6.0);
    let mut gk3 = lam.scaled(h / 3.0);
    let mut gk2 = lam.scaled(h / 3.0);
    let mut gk1 = lam.scaled(h / 6.0);

    let gy4 = pull(&st.y[3], &gk4)?;
    out.axpy(1.0, &gy4);
    gk3.axpy(h, &gy4);

    let gy3 = pull(&st.y[2], &gk3)?;
    out.axpy(1.0, &gy3);
    gk2.axpy(0.5 * h, &gy3);

    let gy2 = pull(&st.y[1], &gk2)?;
    out.axpy(1.0, &gy2);
    gk1.axpy(0.5 * h, &gy2);

    let gy1 = pull(&st.y[0], &gk1)?;
    out.axpy(1.0, &gy1);
    out.symmetrize();
    Ok(out)
}

/// Adjoint covectors at every node, from `lam1` at the last node back to the
/// first. Entry `n` pairs with the tangent at node `n`.
pub fn integrate_adjoint_path(traj: &Trajectory, lam1: &AdjointState, spec: &KernelSpec) -> Result<Vec<AdjointState>> {
    traj.last().check_compatible(lam1)?;
    let h = traj.dt();
    let s = traj.steps();
    let mut path = vec![lam1.zeros_like(); s + 1];
    path[s] = lam1.clone();
    for n in (0..s).rev() {
        let prev = adjoint_step(&traj.states[n], h, &path[n + 1], spec)?;
        if !is_finite(&prev) {
            return Err(Error::BlowUp {
                node: n,
                time: traj.times[n],
            });
        }
        path[n] = prev;
    }
    Ok(path)
}

/// Pull a covector on the final state back to the initial state.
pub fn integrate_adjoint_backward(traj: &Trajectory, lam1: &AdjointState, spec: &KernelSpec) -> Result<AdjointState> {
    traj.last().check_compatible(lam1)?;
    let h = traj.dt();
    let mut lam = lam1.clone();
    for n in (0..traj.steps()).rev() {
        lam = adjoint_step(&traj.states[n], h, &lam, spec)?;
        if !is_finite(&lam) {
            return Err(Error::BlowUp {
                node: n,
                time: traj.times[n],
            });
        }
    }
    Ok(lam)
}
