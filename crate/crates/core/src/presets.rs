//! Single-particle momentum presets showing the elementary deformations a
//! jet-particle can generate.

use serde::{Deserialize, Serialize};

use crate::flowmap::{grid_figure, GridFigure};
use crate::image::Rect;
use crate::ode::{integrate_forward, Trajectory};
use crate::tensor::{det, Vec2};
use crate::{Error, JetOrder, JetState, KernelSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    None,
    Translation,
    Expansion,
    Rotation,
    Stretch,
    Shear,
    SecondXx,
    SecondYy,
    SecondXy,
}

impl Preset {
    /// The eight non-trivial presets.
    pub const FIGURE: [Preset; 8] = [
        Preset::Translation,
        Preset::Expansion,
        Preset::Rotation,
        Preset::Stretch,
        Preset::Shear,
        Preset::SecondXx,
        Preset::SecondYy,
        Preset::SecondXy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::None => "none",
            Preset::Translation => "translation",
            Preset::Expansion => "expansion",
            Preset::Rotation => "rotation",
            Preset::Stretch => "stretch",
            Preset::Shear => "shear",
            Preset::SecondXx => "second_xx",
            Preset::SecondYy => "second_yy",
            Preset::SecondXy => "second_xy",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        std::iter::once(Preset::None)
            .chain(Self::FIGURE)
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Unknown {
                what: "preset",
                name: name.to_string(),
            })
    }

    /// Second-order particle at `center` carrying this preset's momentum.
    ///
    /// First-order presets set `mu1 = 0.5 sigma^2 G`, which makes the velocity
    /// gradient at the particle equal to `0.5 G` at `t = 0`. A positive
    /// multiple of the identity spreads the surrounding grid apart.
    pub fn state(self, center: Vec2, sigma: f64) -> JetState {
        let mut s = JetState::at_rest(JetOrder::Two, vec![center]);
        let a = 0.5 * sigma * sigma;
        let b = 0.1 * sigma * sigma * sigma;
        match self {
            Preset::None => {}
            Preset::Translation => s.p[0] = [0.25, 0.0],
            Preset::Expansion => s.mu1[0] = [[a, 0.0], [0.0, a]],
            Preset::Rotation => s.mu1[0] = [[0.0, -a], [a, 0.0]],
            Preset::Stretch => s.mu1[0] = [[a, 0.0], [0.0, -a]],
            Preset::Shear => s.mu1[0] = [[0.0, a], [0.0, 0.0]],
            Preset::SecondXx => s.mu2[0][0][0][0] = b,
            Preset::SecondYy => s.mu2[0][0][1][1] = b,
            Preset::SecondXy => {
                s.mu2[0][0][0][1] = b;
                s.mu2[0][0][1][0] = b;
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct PresetRun {
    pub preset: Preset,
    pub trajectory: Trajectory,
    pub grid: GridFigure,
    /// `ln det D phi` at the particle, read from its carried Jacobian.
    pub particle_logjac: f64,
}

/// Shoot one preset particle at the centre of `extent` and deform a square
/// grid of `n_lines` lines per direction covering `extent`.
pub fn shoot_preset(
    preset: Preset,
    sigma: f64,
    steps: usize,
    extent: &Rect,
    n_lines: usize,
    samples_per_line: usize,
) -> Result<PresetRun> {
    let spec = KernelSpec::new(sigma)?;
    extent.validate()?;
    let c = [0.5 * (extent.x0 + extent.x1), 0.5 * (extent.y0 + extent.y1)];
    let traj = integrate_forward(&preset.state(c, sigma), steps, &spec)?;
    let grid = grid_figure(&traj, n_lines, samples_per_line, &spec, extent)?;
    let particle_logjac = det(&traj.last().q1[0]).ln();
    Ok(PresetRun {
        preset,
        trajectory: traj,
        grid,
        particle_logjac,
    })
}
