//! Closed-form test images sampled on a square raster over the unit square.

use serde::{Deserialize, Serialize};

use crate::image::{AnalyticImage, ImageField, ScalarImage};
use crate::tensor::Vec2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// `x + y`, unnormalised.
    Linear,
    /// `(x + y)^2`, unnormalised.
    Quadratic,
    /// `sin(6 pi x) + x^2`, unnormalised.
    Trig,
    /// Gaussian bump.
    Blob,
    /// Soft-edged horizontal bar.
    Bar,
    /// Soft-edged square.
    Square,
    /// Bar rotated by `angle`.
    RotatedBar,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 7] = [
        Self::Linear,
        Self::Quadratic,
        Self::Trig,
        Self::Blob,
        Self::Bar,
        Self::Square,
        Self::RotatedBar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Quadratic => "quadratic",
            Self::Trig => "trig",
            Self::Blob => "blob",
            Self::Bar => "bar",
            Self::Square => "square",
            Self::RotatedBar => "rotated_bar",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Unknown {
                what: "synthetic image kind",
                name: name.to_string(),
            })
    }
}

/// Shape parameters for the normalised kinds. Ignored by the analytic kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub center: Vec2,
    /// Translation applied to the shape.
    pub offset: Vec2,
    /// Standard deviation of the blob.
    pub blob_width: f64,
    /// Half extents of the bar along its long and short axes.
    pub bar_half: Vec2,
    pub square_half: f64,
    /// Rotation of `rotated_bar`, radians.
    pub angle: f64,
    /// Width of the soft edge.
    pub edge: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            center: [0.5, 0.5],
            offset: [0.0, 0.0],
            blob_width: 0.1,
            bar_half: [0.3, 0.1],
            square_half: 0.2,
            angle: std::f64::consts::FRAC_PI_4,
            edge: 0.03,
        }
    }
}

fn soft_box(dx: f64, dy: f64, hx: f64, hy: f64, edge: f64) -> f64 {
    let s = |t: f64| 0.5 * (1.0 + (t / edge).tanh());
    s(hx - dx.abs()) * s(hy - dy.abs())
}

fn shape_value(kind: SyntheticKind, p: &SyntheticParams, x: &Vec2) -> f64 {
    let dx = x[0] - p.center[0] - p.offset[0];
    let dy = x[1] - p.center[1] - p.offset[1];
    match kind {
        SyntheticKind::Blob => (-(dx * dx + dy * dy) / (2.0 * p.blob_width * p.blob_width)).exp(),
        SyntheticKind::Bar => soft_box(dx, dy, p.bar_half[0], p.bar_half[1], p.edge),
        SyntheticKind::Square => soft_box(dx, dy, p.square_half, p.square_half, p.edge),
        SyntheticKind::RotatedBar => {
            let (s, c) = p.angle.sin_cos();
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            soft_box(u, v, p.bar_half[0], p.bar_half[1], p.edge)
        }
        SyntheticKind::Linear => AnalyticImage::Linear.value(x),
        SyntheticKind::Quadratic => AnalyticImage::Quadratic.value(x),
        SyntheticKind::Trig => AnalyticImage::Trig.value(x),
    }
}

/// Sample `kind` at the pixel centres of a `resolution x resolution` raster on
/// the unit square. Shape kinds are min-max normalised onto `[0, 1]`; the
/// analytic kinds keep their raw values and are flagged as unnormalised.
pub fn synthetic(kind: SyntheticKind, resolution: usize, params: &SyntheticParams) -> Result<ScalarImage> {
    if resolution < 16 {
        return Err(Error::InvalidArgument(format!(
            "synthetic images need resolution >= 16, got {resolution}"
        )));
    }
    let mut img = ScalarImage::constant(resolution, resolution, 0.0)?;
    for row in 0..resolution {
        for col in 0..resolution {
            let x = img.pixel_center(col, row);
            img.pixels[row * resolution + col] = shape_value(kind, params, &x);
        }
    }
    Ok(match kind {
        SyntheticKind::Linear | SyntheticKind::Quadratic | SyntheticKind::Trig => {
            img.normalized = false;
            img
        }
        _ => img.min_max_normalized(),
    })
}

/// Same as [`synthetic`] with default parameters, looked up by name.
pub fn synthetic_named(name: &str, resolution: usize) -> Result<ScalarImage> {
    synthetic(SyntheticKind::parse(name)?, resolution, &SyntheticParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_kinds_keep_raw_values() {
        let img = synthetic_named("linear", 16).unwrap();
        assert!(!img.normalized);
        let c = img.pixel_center(15, 15);
        assert!((img.get(15, 15) - (c[0] + c[1])).abs() < 1e-15);
        let p = SyntheticParams::default();
        assert_eq!(shape_value(SyntheticKind::Linear, &p, &[0.0, 0.0]), 0.0);
        assert_eq!(shape_value(SyntheticKind::Linear, &p, &[1.0, 1.0]), 2.0);
        assert!((shape_value(SyntheticKind::Trig, &p, &[0.25, 0.0]) + 0.9375).abs() < 1e-12);
    }

    #[test]
    fn shapes_are_normalised() {
        for kind in [
            SyntheticKind::Blob,
            SyntheticKind::Bar,
            SyntheticKind::Square,
            SyntheticKind::RotatedBar,
        ] {
            let img = synthetic(kind, 32, &SyntheticParams::default()).unwrap();
            assert!(img.normalized);
            let max = img.pixels.iter().cloned().fold(f64::MIN, f64::max);
            let min = img.pixels.iter().cloned().fold(f64::MAX, f64::min);
            assert_eq!((min, max), (0.0, 1.0));
        }
    }

    #[test]
    fn blob_peaks_at_centre() {
        // even resolution puts the centre between pixels; odd puts it on one
        let img = synthetic(SyntheticKind::Blob, 33, &SyntheticParams::default()).unwrap();
        assert_eq!(img.get(16, 16), 1.0);
        assert_eq!(img.get(15, 16), img.get(17, 16));
    }

    #[test]
    fn bad_requests() {
        assert!(synthetic_named("linear", 15).is_err());
        assert!(matches!(synthetic_named("spiral", 32), Err(Error::Unknown { .. })));
    }
}
