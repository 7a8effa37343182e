//! The velocity field generated by a jet state, and transport of passive
//! points, images and grids along the flow.
//!
//! Passive points are integrated together with the particle state using the
//! same RK4 scheme: at each stage a point sees the field of the matching
//! particle stage state. With the step count of the trajectory the particle
//! states are reproduced exactly, so a point started on a particle stays on it.

use std::fmt::Write as _;

use serde::Serialize;

use crate::dynamics::velocity_jet_at;
use crate::image::{ImageField, Interpolant, Rect, ScalarImage};
use crate::kernel::KernelSpec;
use crate::ode::{combine, stages, Trajectory};
use crate::par::map_indices;
use crate::tensor::{det, Mat2, Vec2, IDENTITY};
use crate::{Error, JetState, Result, DIM};

/// Velocity `u(x)` of the field generated by `state`.
pub fn velocity_at(state: &JetState, x: &Vec2, spec: &KernelSpec) -> Vec2 {
    velocity_jet_at(state, x, spec, 0).u
}

/// Velocity and its spatial Jacobian `[du]^a_b = d_b u^a`.
pub fn velocity_and_gradient(state: &JetState, x: &Vec2, spec: &KernelSpec) -> (Vec2, Mat2) {
    let j = velocity_jet_at(state, x, spec, 1);
    (j.u, j.du)
}

/// Velocity samples on an `n x n` cell-centred lattice over `extent`.
pub fn velocity_grid(state: &JetState, spec: &KernelSpec, extent: &Rect, n: usize) -> Vec<(Vec2, Vec2)> {
    let pts = lattice(extent, n);
    map_indices(pts.len(), |i| (pts[i], velocity_at(state, &pts[i], spec)))
}

fn lattice(extent: &Rect, n: usize) -> Vec<Vec2> {
    let (hx, hy) = (extent.width() / n as f64, extent.height() / n as f64);
    let mut pts = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            pts.push([extent.x0 + (col as f64 + 0.5) * hx, extent.y0 + (row as f64 + 0.5) * hy]);
        }
    }
    pts
}

/// A passive point, optionally carrying the flow Jacobian.
#[derive(Clone, Copy)]
struct Tracer {
    x: Vec2,
    jac: Mat2,
}

impl Tracer {
    fn plus(&self, a: f64, d: &Tracer) -> Tracer {
        let mut out = *self;
        for r in 0..DIM {
            out.x[r] += a * d.x[r];
            for c in 0..DIM {
                out.jac[r][c] += a * d.jac[r][c];
            }
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.x.iter().chain(self.jac.iter().flatten()).all(|v| v.is_finite())
    }
}

fn tracer_rate(state: &JetState, t: &Tracer, spec: &KernelSpec, with_jac: bool) -> Tracer {
    if !with_jac {
        return Tracer {
            x: velocity_at(state, &t.x, spec),
            jac: [[0.0; DIM]; DIM],
        };
    }
    let (u, du) = velocity_and_gradient(state, &t.x, spec);
    let mut dj = [[0.0; DIM]; DIM];
    for a in 0..DIM {
        for b in 0..DIM {
            for c in 0..DIM {
                dj[a][b] += du[a][c] * t.jac[c][b];
            }
        }
    }
    Tracer { x: u, jac: dj }
}

/// Integrate tracers together with the particle state over `duration` and
/// return them at the end.
fn co_integrate(
    state0: &JetState,
    duration: f64,
    steps: usize,
    spec: &KernelSpec,
    tracers: Vec<Tracer>,
    with_jac: bool,
) -> Result<Vec<Tracer>> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    let h = duration / steps as f64;
    let mut z = state0.clone();
    let mut cur = tracers;
    for n in 0..steps {
        let st = stages(&z, h, spec);
        let next = map_indices(cur.len(), |i| {
            let t = &cur[i];
            let k1 = tracer_rate(&st.y[0], t, spec, with_jac);
            let k2 = tracer_rate(&st.y[1], &t.plus(0.5 * h, &k1), spec, with_jac);
            let k3 = tracer_rate(&st.y[2], &t.plus(0.5 * h, &k2), spec, with_jac);
            let k4 = tracer_rate(&st.y[3], &t.plus(h, &k3), spec, with_jac);
            t.plus(h / 6.0, &k1)
                .plus(h / 3.0, &k2)
                .plus(h / 3.0, &k3)
                .plus(h / 6.0, &k4)
        });
        let time = duration * (n + 1) as f64 / steps as f64;
        if !next.iter().all(Tracer::is_finite) {
            return Err(Error::BlowUp { node: n + 1, time });
        }
        cur = next;
        z = combine(&z, h, &st.k);
    }
    Ok(cur)
}

fn points_to_tracers(pts: &[Vec2]) -> Vec<Tracer> {
    pts.iter().map(|&x| Tracer { x, jac: IDENTITY }).collect()
}

/// Forward map `phi_1(pts)` of the flow whose initial state is the first node
/// of `traj`, with `steps` RK4 steps.
pub fn advect_points(traj: &Trajectory, pts: &[Vec2], spec: &KernelSpec, steps: usize) -> Result<Vec<Vec2>> {
    let out = co_integrate(traj.initial(), 1.0, steps, spec, points_to_tracers(pts), false)?;
    Ok(out.iter().map(|t| t.x).collect())
}

/// Inverse map `phi_1^{-1}(pts)`: the flow run backwards from the last node.
pub fn advect_points_inverse(traj: &Trajectory, pts: &[Vec2], spec: &KernelSpec, steps: usize) -> Result<Vec<Vec2>> {
    let out = co_integrate(traj.last(), -1.0, steps, spec, points_to_tracers(pts), false)?;
    Ok(out.iter().map(|t| t.x).collect())
}

/// `I1 o phi` sampled at the pixel centres of a `width x height` raster over
/// the moving image's domain.
pub fn warp_image(
    traj: &Trajectory,
    moving: &Interpolant,
    out_resolution: (usize, usize),
    spec: &KernelSpec,
) -> Result<ScalarImage> {
    let (w, h) = out_resolution;
    let mut img = ScalarImage::constant(w, h, 0.0)?.with_domain(*moving.domain())?;
    let pts: Vec<Vec2> = (0..w * h).map(|i| img.pixel_center(i % w, i / w)).collect();
    let warped = advect_points(traj, &pts, spec, traj.steps())?;
    img.pixels = map_indices(warped.len(), |i| moving.value(&warped[i]).clamp(0.0, 1.0));
    Ok(img)
}

/// Same as [`warp_image`] with the inverse map, i.e. `I o phi^{-1}`.
pub fn warp_image_inverse(
    traj: &Trajectory,
    moving: &Interpolant,
    out_resolution: (usize, usize),
    spec: &KernelSpec,
) -> Result<ScalarImage> {
    let (w, h) = out_resolution;
    let mut img = ScalarImage::constant(w, h, 0.0)?.with_domain(*moving.domain())?;
    let pts: Vec<Vec2> = (0..w * h).map(|i| img.pixel_center(i % w, i / w)).collect();
    let warped = advect_points_inverse(traj, &pts, spec, traj.steps())?;
    img.pixels = map_indices(warped.len(), |i| moving.value(&warped[i]).clamp(0.0, 1.0));
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridVertex {
    pub x: f64,
    pub y: f64,
    /// `ln det D phi`; NaN if the Jacobian determinant is not positive.
    pub logjac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    pub line_id: usize,
    pub t: f64,
    pub vertices: Vec<GridVertex>,
}

/// Advected grid lines at `t = 0` and `t = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFigure {
    pub lines: Vec<Polyline>,
}

impl GridFigure {
    /// Polylines at the final time.
    pub fn final_lines(&self) -> impl Iterator<Item = &Polyline> {
        let t = self.lines.iter().map(|l| l.t).fold(f64::MIN, f64::max);
        self.lines.iter().filter(move |l| l.t == t)
    }

    pub fn min_logjac(&self) -> f64 {
        self.final_lines()
            .flat_map(|l| l.vertices.iter())
            .map(|v| if v.logjac.is_nan() { f64::NEG_INFINITY } else { v.logjac })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("line_id,t,x,y,logjac\n");
        for l in &self.lines {
            for v in &l.vertices {
                let _ = writeln!(s, "{},{},{},{},{}", l.line_id, l.t, v.x, v.y, v.logjac);
            }
        }
        s
    }
}

/// Deform `n_lines` horizontal and `n_lines` vertical lines spanning `extent`,
/// each sampled at `samples_per_line` points, and colour every vertex by the
/// log-Jacobian determinant transported along with it. Horizontal lines get
/// ids `0..n_lines`, vertical lines `n_lines..2 n_lines`.
pub fn grid_figure(
    traj: &Trajectory,
    n_lines: usize,
    samples_per_line: usize,
    spec: &KernelSpec,
    extent: &Rect,
) -> Result<GridFigure> {
    if n_lines < 2 || samples_per_line < 2 {
        return Err(Error::InvalidArgument(
            "grid figures need at least 2 lines and 2 samples per line".into(),
        ));
    }
    extent.validate()?;
    let frac = |i: usize, n: usize| i as f64 / (n - 1) as f64;
    let mut pts = Vec::with_capacity(2 * n_lines * samples_per_line);
    for l in 0..n_lines {
        let y = extent.y0 + frac(l, n_lines) * extent.height();
        for s in 0..samples_per_line {
            pts.push([extent.x0 + frac(s, samples_per_line) * extent.width(), y]);
        }
    }
    for l in 0..n_lines {
        let x = extent.x0 + frac(l, n_lines) * extent.width();
        for s in 0..samples_per_line {
            pts.push([x, extent.y0 + frac(s, samples_per_line) * extent.height()]);
        }
    }
    let t0 = points_to_tracers(&pts);
    let end = co_integrate(traj.initial(), 1.0, traj.steps(), spec, t0.clone(), true)?;
    let mut lines = vec![];
    for (t, frame) in [(0.0, &t0), (1.0, &end)] {
        for (id, chunk) in frame.chunks(samples_per_line).enumerate() {
            lines.push(Polyline {
                line_id: id,
                t,
                vertices: chunk
                    .iter()
                    .map(|tr| GridVertex {
                        x: tr.x[0],
                        y: tr.x[1],
                        logjac: det(&tr.jac).ln(),
                    })
                    .collect(),
            });
        }
    }
    Ok(GridFigure { lines })
}

/// Flow Jacobian `D phi_1` at each point.
pub fn jacobians(traj: &Trajectory, pts: &[Vec2], spec: &KernelSpec) -> Result<Vec<(Vec2, Mat2)>> {
    let out = co_integrate(traj.initial(), 1.0, traj.steps(), spec, points_to_tracers(pts), true)?;
    Ok(out.iter().map(|t| (t.x, t.jac)).collect())
}
