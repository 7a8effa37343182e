//! End-to-end registration: shoot jet-particles from a regular grid, match
//! the fixed image at the end state, and optimise the initial momenta.
//!
//! The objective is `e(z0) = H(z0) + F(z(1))`. Along a geodesic the kinetic
//! energy equals the conserved Hamiltonian, so no time quadrature is needed.
//! Its gradient with respect to the momenta is `dH/dmomenta` at `z0` plus the
//! momentum part of the matching gradient pulled back by the adjoint pass.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::{hamiltonian, velocity_jets};
use crate::image::{gaussian_smooth, ImageField, Interpolant, Rect, ScalarImage};
use crate::jet::JetStateFile;
use crate::lbfgs::{lbfgs_minimize, LbfgsOptions, Status, TraceEntry};
use crate::matching::{match_endpoint_gradient, match_value, precompute_fixed, FixedSamples, MatchConfig};
use crate::ode::{integrate_adjoint_backward, integrate_forward, Trajectory, DEFAULT_STEPS};
use crate::tensor::symmetrize3;
use crate::{Error, JetOrder, JetState, KernelSpec, Result};

/// Version tag written into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// User-facing knobs of a registration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub jet_order: u8,
    pub match_order: u8,
    /// Particles per axis.
    pub grid: usize,
    /// Kernel width in world units.
    pub sigma: f64,
    pub sigma_match: f64,
    pub steps: usize,
    /// Gaussian pre-smoothing in pixels.
    pub smooth: f64,
    pub optimizer: LbfgsOptions,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            jet_order: 2,
            match_order: 2,
            grid: 4,
            sigma: 0.25,
            sigma_match: 0.1,
            steps: DEFAULT_STEPS,
            smooth: 1.5,
            optimizer: LbfgsOptions {
                max_iter: 100,
                ..LbfgsOptions::default()
            },
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        let jet = JetOrder::try_from(self.jet_order)?;
        if self.match_order > 2 {
            return Err(Error::InvalidArgument(format!(
                "match order must be 0, 1 or 2, got {}",
                self.match_order
            )));
        }
        if self.match_order > jet.k() {
            return Err(Error::OrderMismatch {
                match_order: self.match_order,
                jet_order: jet.k(),
            });
        }
        if self.grid == 0 || self.steps == 0 {
            return Err(Error::InvalidArgument("grid and steps must be >= 1".into()));
        }
        if !(self.smooth >= 0.0) {
            return Err(Error::InvalidArgument("smoothing must be >= 0".into()));
        }
        KernelSpec::new(self.sigma)?;
        Ok(())
    }
}

pub struct RegistrationProblem {
    pub fixed: Box<dyn ImageField>,
    pub moving: Box<dyn ImageField>,
    pub samples: FixedSamples,
    pub spec: KernelSpec,
    pub matching: MatchConfig,
    /// Grid state at rest; only its momenta are optimised.
    pub initial: JetState,
    pub settings: Settings,
}

impl RegistrationProblem {
    /// Problem over `domain` with already-prepared image fields.
    pub fn new(
        fixed: Box<dyn ImageField>,
        moving: Box<dyn ImageField>,
        domain: Rect,
        settings: Settings,
    ) -> Result<Self> {
        settings.validate()?;
        let order = JetOrder::try_from(settings.jet_order)?;
        let initial = JetState::init_grid(&domain, settings.grid, order)?;
        let samples = precompute_fixed(fixed.as_ref(), &initial.q);
        let matching = MatchConfig::for_grid(settings.match_order, domain, settings.grid, settings.sigma_match)?;
        Ok(Self {
            fixed,
            moving,
            samples,
            spec: KernelSpec::new(settings.sigma)?,
            matching,
            initial,
            settings,
        })
    }

    /// Smooth both rasters, fit spline interpolants, and build the problem on
    /// the fixed image's domain.
    pub fn from_images(fixed: &ScalarImage, moving: &ScalarImage, settings: Settings) -> Result<Self> {
        settings.validate()?;
        if fixed.domain != moving.domain {
            return Err(Error::ShapeMismatch(format!(
                "fixed domain {:?} differs from moving domain {:?}",
                fixed.domain, moving.domain
            )));
        }
        let f = Interpolant::fit(&gaussian_smooth(fixed, settings.smooth));
        let m = Interpolant::fit(&gaussian_smooth(moving, settings.smooth));
        Self::new(Box::new(f), Box::new(m), fixed.domain, settings)
    }

    pub fn momentum_len(&self) -> usize {
        self.initial.momentum_len()
    }

    pub fn state_with(&self, momenta: &[f64]) -> Result<JetState> {
        let mut z0 = self.initial.clone();
        z0.set_momenta_flat(momenta)?;
        Ok(z0)
    }

    /// Packed momenta of a saved initial state, which must sit on this
    /// problem's grid with the same jet order.
    pub fn momenta_of(&self, state: &JetState) -> Result<Vec<f64>> {
        if state.order != self.initial.order || state.len() != self.initial.len() {
            return Err(Error::ShapeMismatch(format!(
                "state has {} order-{} particles, the problem has {} order-{}",
                state.len(),
                state.k(),
                self.initial.len(),
                self.initial.k()
            )));
        }
        let scale = self.matching.domain.width().max(self.matching.domain.height());
        let off = state
            .q
            .iter()
            .zip(&self.initial.q)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max);
        if off > 1e-9 * scale {
            return Err(Error::ShapeMismatch(format!(
                "state positions are off the problem grid by {off:e}"
            )));
        }
        Ok(state.momenta_flat())
    }

    pub fn shoot(&self, momenta: &[f64]) -> Result<Trajectory> {
        integrate_forward(&self.state_with(momenta)?, self.settings.steps, &self.spec)
    }

    /// Matching term at the end of a trajectory.
    pub fn match_at(&self, end: &JetState) -> Result<f64> {
        match_value(&self.samples, self.moving.as_ref(), end, &self.matching)
    }

    /// `(H(z0), F(z(1)))` for the given momenta.
    pub fn energy_terms(&self, momenta: &[f64]) -> Result<(f64, f64)> {
        let traj = self.shoot(momenta)?;
        Ok((hamiltonian(traj.initial(), &self.spec), self.match_at(traj.last())?))
    }

    pub fn energy(&self, momenta: &[f64]) -> Result<f64> {
        let (h, f) = self.energy_terms(momenta)?;
        Ok(h + f)
    }

    pub fn energy_and_gradient(&self, momenta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let traj = self.shoot(momenta)?;
        let z0 = traj.initial();
        let end = traj.last();
        let h = hamiltonian(z0, &self.spec);
        let f = self.match_at(end)?;

        let lam1 = match_endpoint_gradient(&self.samples, self.moving.as_ref(), end, &self.matching)?;
        let mut grad = integrate_adjoint_backward(&traj, &lam1, &self.spec)?;

        // dH/dp = u(q_i), dH/dmu1 = Du(q_i), dH/dmu2 = D^2 u(q_i)
        let jets = velocity_jets(z0, &self.spec, z0.k() as usize);
        for (i, j) in jets.iter().enumerate() {
            for a in 0..2 {
                grad.p[i][a] += j.u[a];
            }
            if z0.k() >= 1 {
                for a in 0..2 {
                    for b in 0..2 {
                        grad.mu1[i][a][b] += j.du[a][b];
                    }
                }
            }
            if z0.k() >= 2 {
                let mut xi2 = j.d2u;
                symmetrize3(&mut xi2);
                for a in 0..2 {
                    for b in 0..2 {
                        for c in 0..2 {
                            grad.mu2[i][a][b][c] += xi2[a][b][c];
                        }
                    }
                }
            }
        }
        Ok((h + f, grad.momentum_covector_flat()))
    }
}

/// Outcome of [`register`].
#[derive(Debug, Clone, Serialize)]
pub struct RegistrationResult {
    pub schema_version: u32,
    pub settings: Settings,
    /// Optimal initial state (grid positions and momenta).
    pub initial: JetStateFile,
    /// End state of the optimal flow.
    pub final_state: JetStateFile,
    pub final_energy: f64,
    #[serde(rename = "final_H")]
    pub final_h: f64,
    #[serde(rename = "final_F")]
    pub final_f: f64,
    /// Matching term at zero momenta, for reference.
    #[serde(rename = "identity_F")]
    pub identity_f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    pub clamp_count: usize,
    pub trace: Vec<TraceEntry>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
    #[serde(skip)]
    pub momenta: Vec<f64>,
}

impl RegistrationResult {
    pub fn trace_csv(&self) -> String {
        trace_csv(&self.trace)
    }
}

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut s = String::from("iter,energy,grad_norm,step,evaluations\n");
    for t in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            t.iter, t.energy, t.grad_norm, t.step, t.evaluations
        );
    }
    s
}

/// Optimise all momentum blocks from zero.
pub fn register(prob: &RegistrationProblem) -> Result<RegistrationResult> {
    register_from(prob, &vec![0.0; prob.momentum_len()])
}

/// Optimise starting from the packed momenta `x0`, e.g. those of an earlier run.
pub fn register_from(prob: &RegistrationProblem, x0: &[f64]) -> Result<RegistrationResult> {
    if x0.len() != prob.momentum_len() {
        return Err(Error::ShapeMismatch(format!(
            "initial momenta have length {}, expected {}",
            x0.len(),
            prob.momentum_len()
        )));
    }
    let mut hard_error = None;
    let objective = |x: &[f64]| match prob.energy_and_gradient(x) {
        Ok(v) => v,
        Err(Error::BlowUp { .. }) => (f64::INFINITY, vec![0.0; x.len()]),
        Err(e) => {
            hard_error.get_or_insert(e);
            (f64::NAN, vec![0.0; x.len()])
        }
    };
    let opt = lbfgs_minimize(objective, x0, &prob.settings.optimizer);
    if let Some(e) = hard_error {
        return Err(e);
    }
    let opt = opt?;
    let traj = prob.shoot(&opt.x)?;
    let final_h = hamiltonian(traj.initial(), &prob.spec);
    let final_f = prob.match_at(traj.last())?;
    let identity_f = prob.match_at(&prob.initial)?;
    Ok(RegistrationResult {
        schema_version: SCHEMA_VERSION,
        settings: prob.settings,
        initial: JetStateFile::new(traj.initial(), &prob.spec),
        final_state: JetStateFile::new(traj.last(), &prob.spec),
        final_energy: final_h + final_f,
        final_h,
        final_f,
        identity_f,
        grad_norm: opt.g.iter().fold(0.0, |m, v| m.max(v.abs())),
        iterations: opt.iterations(),
        evaluations: opt.evaluations,
        status: opt.status,
        clamp_count: prob.moving.clamp_count(),
        trace: opt.trace,
        trajectory: Some(traj),
        momenta: opt.x,
    })
}
