//! Taylor-expanded image-matching functionals evaluated at particle jets.
//!
//! Sample points are the initial particle positions on a cell-centred grid,
//! so `phi(x)`, `D phi(x)` and `D^2 phi(x)` are read directly from the `q`,
//! `q1` and `q2` blocks of the end state. With `f = I0 - I1 o phi`, each cell
//! of area `A` and side lengths `h_a` contributes
//!
//! ```text
//! order 0:  A f^2
//! order 1:  A f^2 + sum_a (A h_a^2 / 12) (d_a f)^2
//! order 2:  A f^2 + sum_a (A h_a^2 / 12) ((d_a f)^2 + f d_aa f)
//! ```
//!
//! which is the midpoint rule plus its second-order Taylor correction. The
//! total is divided by `sigma_match`.

use serde::{Deserialize, Serialize};

use crate::image::{ImageField, ImageJet, Rect};
use crate::par::map_indices;
use crate::tensor::{Vec2, ZERO2, ZERO_MAT, ZERO_TEN3};
use crate::{AdjointState, Error, JetState, Result, DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// 0, 1 (first-order truncation) or 2.
    pub match_order: u8,
    /// Grid spacing per axis.
    pub spacing: Vec2,
    pub sigma_match: f64,
    pub domain: Rect,
}

impl MatchConfig {
    pub fn new(match_order: u8, spacing: Vec2, sigma_match: f64, domain: Rect) -> Result<Self> {
        let cfg = Self {
            match_order,
            spacing,
            sigma_match,
            domain,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config for an `n x n` cell-centred grid over `domain`.
    pub fn for_grid(match_order: u8, domain: Rect, n: usize, sigma_match: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid size must be >= 1".into()));
        }
        Self::new(
            match_order,
            [domain.width() / n as f64, domain.height() / n as f64],
            sigma_match,
            domain,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.match_order > 2 {
            return Err(Error::UnsupportedOrder(self.match_order as usize));
        }
        if !(self.spacing.iter().all(|h| *h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        if !(self.sigma_match > 0.0 && self.sigma_match.is_finite()) {
            return Err(Error::InvalidArgument("sigma_match must be positive".into()));
        }
        self.domain.validate()
    }

    fn cell_area(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }

    /// Weight `A h_a^2 / 12` of the per-axis correction terms.
    fn axis_weight(&self, a: usize) -> f64 {
        self.cell_area() * self.spacing[a] * self.spacing[a] / 12.0
    }

    fn check(&self, end: &JetState, fixed: &FixedSamples) -> Result<()> {
        self.validate()?;
        if self.match_order > end.k() {
            return Err(Error::OrderMismatch {
                match_order: self.match_order,
                jet_order: end.k(),
            });
        }
        if end.len() != fixed.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} particles but {} fixed samples",
                end.len(),
                fixed.len()
            )));
        }
        Ok(())
    }
}

/// Fixed-image value, gradient and Hessian at every sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSamples {
    pub points: Vec<Vec2>,
    pub jets: Vec<ImageJet>,
}

impl FixedSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn precompute_fixed(fixed: &dyn ImageField, points: &[Vec2]) -> FixedSamples {
    let jets = map_indices(points.len(), |i| fixed.jet(&points[i], 2));
    FixedSamples {
        points: points.to_vec(),
        jets,
    }
}

/// Residual quantities at one sample point.
struct Local {
    r: f64,
    e: Vec2,
    c: Vec2,
}

fn local(order: u8, f: &ImageJet, m: &ImageJet, end: &JetState, i: usize) -> Local {
    let r = f.value - m.value;
    let mut e = ZERO2;
    let mut c = ZERO2;
    if order >= 1 {
        let a_mat = &end.q1[i];
        for a in 0..DIM {
            e[a] = f.grad[a];
            for b in 0..DIM {
                e[a] -= m.grad[b] * a_mat[b][a];
            }
        }
    }
    if order >= 2 {
        let a_mat = &end.q1[i];
        let b_ten = &end.q2[i];
        for a in 0..DIM {
            c[a] = f.hess[a][a];
            for b in 0..DIM {
                for g in 0..DIM {
                    c[a] -= m.hess[b][g] * a_mat[b][a] * a_mat[g][a];
                }
                c[a] -= m.grad[b] * b_ten[b][a][a];
            }
        }
    }
    Local { r, e, c }
}

/// Value of the matching functional at the end state.
pub fn match_value(fixed: &FixedSamples, moving: &dyn ImageField, end: &JetState, cfg: &MatchConfig) -> Result<f64> {
    cfg.check(end, fixed)?;
    let order = cfg.match_order;
    let area = cfg.cell_area();
    let w = [cfg.axis_weight(0), cfg.axis_weight(1)];
    let terms = map_indices(end.len(), |i| {
        let m = moving.jet(&end.q[i], order as usize);
        let l = local(order, &fixed.jets[i], &m, end, i);
        let mut v = area * l.r * l.r;
        for a in 0..DIM {
            if order >= 1 {
                v += w[a] * l.e[a] * l.e[a];
            }
            if order >= 2 {
                v += w[a] * l.r * l.c[a];
            }
        }
        v
    });
    Ok(terms.iter().sum::<f64>() / cfg.sigma_match)
}

/// Gradient of [`match_value`] with respect to `q`, `q1` and `q2` of the end
/// state. Momentum blocks of the result are zero.
pub fn match_endpoint_gradient(
    fixed: &FixedSamples,
    moving: &dyn ImageField,
    end: &JetState,
    cfg: &MatchConfig,
) -> Result<AdjointState> {
    cfg.check(end, fixed)?;
    let order = cfg.match_order;
    let area = cfg.cell_area();
    let w = [cfg.axis_weight(0), cfg.axis_weight(1)];
    let s = 1.0 / cfg.sigma_match;
    let k = end.k();
    let rows = map_indices(end.len(), |i| {
        let m = moving.jet(&end.q[i], order as usize + 1);
        let l = local(order, &fixed.jets[i], &m, end, i);
        let (g, hs, t3) = (m.grad, m.hess, m.third);
        let mut dq = ZERO2;
        let mut da = ZERO_MAT;
        let mut db = ZERO_TEN3;
        for eps in 0..DIM {
            dq[eps] = -2.0 * area * l.r * g[eps];
        }
        if order >= 1 {
            let a_mat = &end.q1[i];
            for a in 0..DIM {
                for eps in 0..DIM {
                    let mut de = 0.0;
                    for b in 0..DIM {
                        de -= hs[b][eps] * a_mat[b][a];
                    }
                    dq[eps] += 2.0 * w[a] * l.e[a] * de;
                }
                for b in 0..DIM {
                    da[b][a] += 2.0 * w[a] * l.e[a] * (-g[b]);
                }
            }
        }
        if order >= 2 {
            let a_mat = &end.q1[i];
            let b_ten = &end.q2[i];
            for a in 0..DIM {
                for eps in 0..DIM {
                    let mut dc = 0.0;
                    for b in 0..DIM {
                        for gm in 0..DIM {
                            dc -= t3[b][gm][eps] * a_mat[b][a] * a_mat[gm][a];
                        }
                        dc -= hs[b][eps] * b_ten[b][a][a];
                    }
                    dq[eps] += w[a] * (-g[eps] * l.c[a] + l.r * dc);
                }
                for b in 0..DIM {
                    let mut dcda = 0.0;
                    for gm in 0..DIM {
                        dcda -= 2.0 * hs[b][gm] * a_mat[gm][a];
                    }
                    da[b][a] += w[a] * l.r * dcda;
                    db[b][a][a] += w[a] * l.r * (-g[b]);
                }
            }
        }
        (dq, da, db)
    });
    let mut out = end.zeros_like();
    for (i, (dq, da, db)) in rows.into_iter().enumerate() {
        out.q[i] = [dq[0] * s, dq[1] * s];
        if k >= 1 {
            for a in 0..DIM {
                for b in 0..DIM {
                    out.q1[i][a][b] = da[a][b] * s;
                }
            }
        }
        if k >= 2 {
            for a in 0..DIM {
                for b in 0..DIM {
                    for c in 0..DIM {
                        out.q2[i][a][b][c] = db[a][b][c] * s;
                    }
                }
            }
        }
    }
    Ok(out)
}

// Four-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Minimum panels per axis accepted by [`oracle_integral`].
pub const ORACLE_MIN_RES: usize = 512;

/// Reference value of `integral over domain of (I0 - I1)^2` by composite
/// four-point Gauss-Legendre quadrature on `quad_res x quad_res` panels.
pub fn oracle_integral(i0: &dyn ImageField, i1: &dyn ImageField, domain: &Rect, quad_res: usize) -> Result<f64> {
    if quad_res < ORACLE_MIN_RES {
        return Err(Error::InvalidArgument(format!(
            "quad_res must be >= {ORACLE_MIN_RES}, got {quad_res}"
        )));
    }
    domain.validate()?;
    let hx = domain.width() / quad_res as f64;
    let hy = domain.height() / quad_res as f64;
    let rows = map_indices(quad_res, |row| {
        let mut acc = 0.0;
        for col in 0..quad_res {
            let cx = domain.x0 + (col as f64 + 0.5) * hx;
            let cy = domain.y0 + (row as f64 + 0.5) * hy;
            for (nx, wx) in GL_NODES.iter().zip(GL_WEIGHTS) {
                for (ny, wy) in GL_NODES.iter().zip(GL_WEIGHTS) {
                    let x = [cx + 0.5 * hx * nx, cy + 0.5 * hy * ny];
                    let d = i0.value(&x) - i1.value(&x);
                    acc += wx * wy * d * d;
                }
            }
        }
        acc
    });
    Ok(rows.iter().sum::<f64>() * 0.25 * hx * hy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::AnalyticImage;
    use crate::JetOrder;

    fn one_point(order: u8) -> (FixedSamples, JetState, MatchConfig) {
        let end = JetState::at_rest(JetOrder::Two, vec![[0.5, 0.5]]);
        let fixed = precompute_fixed(&AnalyticImage::Linear, &end.q);
        let cfg = MatchConfig::for_grid(order, Rect::unit(), 1, 1.0).unwrap();
        (fixed, end, cfg)
    }

    #[test]
    fn linear_image_single_point_is_exact_at_order_two() {
        let (fixed, end, cfg) = one_point(2);
        let v = match_value(&fixed, &AnalyticImage::Zero, &end, &cfg).unwrap();
        assert!((v - 7.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn order_zero_is_midpoint_rule() {
        let (fixed, end, cfg) = one_point(0);
        let v = match_value(&fixed, &AnalyticImage::Zero, &end, &cfg).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn perfect_match_is_zero() {
        for order in 0..=2 {
            let (fixed, end, cfg) = one_point(order);
            let v = match_value(&fixed, &AnalyticImage::Linear, &end, &cfg).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn order_mismatch_is_rejected() {
        let end = JetState::at_rest(JetOrder::Zero, vec![[0.5, 0.5]]);
        let fixed = precompute_fixed(&AnalyticImage::Linear, &end.q);
        let cfg = MatchConfig::for_grid(2, Rect::unit(), 1, 1.0).unwrap();
        let err = match_value(&fixed, &AnalyticImage::Zero, &end, &cfg).unwrap_err();
        assert_eq!(err.to_string(), "match order 2 exceeds jet order 0");
        assert!(match_endpoint_gradient(&fixed, &AnalyticImage::Zero, &end, &cfg).is_err());
    }

    #[test]
    fn order_zero_gradient_has_no_jet_blocks() {
        let (fixed, mut end, cfg) = one_point(0);
        end.q[0] = [0.3, 0.6];
        let g = match_endpoint_gradient(&fixed, &AnalyticImage::Quadratic, &end, &cfg).unwrap();
        assert!(g.q1.iter().all(|m| *m == ZERO_MAT));
        assert!(g.q2.iter().all(|t| *t == ZERO_TEN3));
        assert!(g.q[0] != ZERO2);
    }

    #[test]
    fn oracle_of_linear_image() {
        let v = oracle_integral(&AnalyticImage::Linear, &AnalyticImage::Zero, &Rect::unit(), 512).unwrap();
        assert!((v - 7.0 / 6.0).abs() < 1e-12);
        assert!(oracle_integral(&AnalyticImage::Linear, &AnalyticImage::Zero, &Rect::unit(), 8).is_err());
    }
}
