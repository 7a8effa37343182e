//! Convergence of the matching functionals towards the exact integral as the
//! sample grid is refined.
//!
//! Every level evaluates `F_h` at the identity jet state on an `n x n`
//! cell-centred grid (`h = 1/n`) over the unit square with unit weight, and
//! compares it with a high-order quadrature of the same integral.

use serde::{Deserialize, Serialize};

use crate::image::{AnalyticImage, ImageField, ImageJet, Rect};
use crate::matching::{match_value, oracle_integral, precompute_fixed, MatchConfig};
use crate::tensor::Vec2;
use crate::{Error, JetOrder, JetState, Result};

/// `x -> inner(x - offset)`.
#[derive(Debug, Clone, Copy)]
pub struct Translated<F> {
    pub inner: F,
    pub offset: Vec2,
}

impl<F: ImageField> ImageField for Translated<F> {
    fn jet(&self, x: &Vec2, order: usize) -> ImageJet {
        self.inner.jet(&[x[0] - self.offset[0], x[1] - self.offset[1]], order)
    }
}

/// Second image of the study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partner {
    /// `I1 = 0`, so `F = integral of I0^2`.
    Zero,
    /// `I1` is `I0` shifted by the given offset.
    Shifted(Vec2),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// Grid exponent: `h = 2^-level`.
    pub level: u32,
    pub h: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    pub oracle: f64,
    pub err0: f64,
    pub err1: f64,
    pub err2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub kind: AnalyticImage,
    pub partner: Partner,
    pub oracle: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Smallest level used in the slope fits.
    pub fit_from: u32,
    pub slope0: f64,
    pub slope1: f64,
    pub slope2: f64,
}

impl ConvergenceStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h,F0,F1,F2,oracle,err0,err1,err2\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.level, r.h, r.f0, r.f1, r.f2, r.oracle, r.err0, r.err1, r.err2
            ));
        }
        s
    }
}

/// Least-squares slope of `log err` against `log h`. Zero errors carry no
/// rate information and are skipped; NaN if fewer than two points remain.
pub fn fit_slope(hs: &[f64], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errs)
        .filter(|(_, e)| **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Functional values of every order on the `n x n` identity grid.
pub fn functional_values(fixed: &dyn ImageField, moving: &dyn ImageField, n: usize) -> Result<[f64; 3]> {
    let state = JetState::init_grid(&Rect::unit(), n, JetOrder::Two)?;
    let samples = precompute_fixed(fixed, &state.q);
    let mut out = [0.0; 3];
    for (m, slot) in out.iter_mut().enumerate() {
        let cfg = MatchConfig::for_grid(m as u8, Rect::unit(), n, 1.0)?;
        *slot = match_value(&samples, moving, &state, &cfg)?;
    }
    Ok(out)
}

/// Evaluate levels `1..=max_level` and fit slopes over `fit_from..=max_level`.
pub fn convergence_study(
    kind: AnalyticImage,
    partner: Partner,
    max_level: u32,
    fit_from: u32,
    quad_res: usize,
) -> Result<ConvergenceStudy> {
    if max_level == 0 || fit_from == 0 || fit_from >= max_level || max_level > 12 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= fit_from < max_level <= 12, got {fit_from} and {max_level}"
        )));
    }
    let moving: Box<dyn ImageField> = match partner {
        Partner::Zero => Box::new(AnalyticImage::Zero),
        Partner::Shifted(offset) => Box::new(Translated { inner: kind, offset }),
    };
    let oracle = oracle_integral(&kind, moving.as_ref(), &Rect::unit(), quad_res)?;
    let mut rows = vec![];
    for level in 1..=max_level {
        let n = 1usize << level;
        let [f0, f1, f2] = functional_values(&kind, moving.as_ref(), n)?;
        rows.push(ConvergenceRow {
            level,
            h: 1.0 / n as f64,
            f0,
            f1,
            f2,
            oracle,
            err0: (f0 - oracle).abs(),
            err1: (f1 - oracle).abs(),
            err2: (f2 - oracle).abs(),
        });
    }
    let fit: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.level >= fit_from).collect();
    let hs: Vec<f64> = fit.iter().map(|r| r.h).collect();
    let slope = |f: fn(&ConvergenceRow) -> f64| fit_slope(&hs, &fit.iter().map(|r| f(r)).collect::<Vec<_>>());
    Ok(ConvergenceStudy {
        kind,
        partner,
        oracle,
        fit_from,
        slope0: slope(|r| r.err0),
        slope1: slope(|r| r.err1),
        slope2: slope(|r| r.err2),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let hs = [0.5, 0.25, 0.125];
        let errs: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powi(4)).collect();
        assert!((fit_slope(&hs, &errs) - 4.0).abs() < 1e-12);
        assert!(fit_slope(&hs, &[0.0, 0.0, 1.0]).is_nan());
    }

    #[test]
    fn translated_field_shifts_argument() {
        let t = Translated {
            inner: AnalyticImage::Linear,
            offset: [0.1, 0.2],
        };
        assert!((t.value(&[0.5, 0.5]) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn bad_levels_rejected() {
        assert!(convergence_study(AnalyticImage::Trig, Partner::Zero, 3, 3, 512).is_err());
    }
}
