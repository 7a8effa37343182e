//! Grayscale rasters, Gaussian pre-smoothing, and interpolating cubic
//! B-splines with analytic derivatives.
//!
//! World convention: an image covers a rectangle whose longer side is `[0, 1]`.
//! Pixel `(col, row)` is centred at `x0 + (col + 0.5) dx`, `y0 + (row + 0.5) dy`;
//! rows run along +y.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::tensor::{Mat2, Ten3, Vec2, ZERO2, ZERO_MAT, ZERO_TEN3};
use crate::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite())
            && self.width() > 0.0
            && self.height() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("degenerate domain {self:?}")))
        }
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn clamp(&self, p: &Vec2) -> Vec2 {
        [p[0].clamp(self.x0, self.x1), p[1].clamp(self.y0, self.y1)]
    }

    /// Domain for a `width x height` raster: longer side spans `[0, 1]`.
    pub fn for_raster(width: usize, height: usize) -> Self {
        let m = width.max(height) as f64;
        Self::new(0.0, 0.0, width as f64 / m, height as f64 / m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities.
    pub pixels: Vec<f64>,
    pub domain: Rect,
    /// `false` when intensities may leave `[0, 1]` (convergence-study images).
    pub normalized: bool,
}

impl ScalarImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width < 4 || height < 4 {
            return Err(Error::InvalidArgument(format!(
                "images must be at least 4x4, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            domain: Rect::for_raster(width, height),
            normalized: true,
        })
    }

    pub fn constant(width: usize, height: usize, v: f64) -> Result<Self> {
        Self::new(width, height, vec![v; width * height])
    }

    pub fn with_domain(mut self, domain: Rect) -> Result<Self> {
        domain.validate()?;
        self.domain = domain;
        Ok(self)
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn pixel_size(&self) -> (f64, f64) {
        (
            self.domain.width() / self.width as f64,
            self.domain.height() / self.height as f64,
        )
    }

    /// World coordinates of a pixel centre.
    pub fn pixel_center(&self, col: usize, row: usize) -> Vec2 {
        let (dx, dy) = self.pixel_size();
        [
            self.domain.x0 + (col as f64 + 0.5) * dx,
            self.domain.y0 + (row as f64 + 0.5) * dy,
        ]
    }

    /// Rescale intensities linearly onto `[0, 1]`. Constant images map to 0.
    pub fn min_max_normalized(mut self) -> Self {
        let (lo, hi) = self
            .pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        for v in self.pixels.iter_mut() {
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
        self.normalized = true;
        self
    }

    pub fn flipped_horizontal(&self) -> Self {
        let mut out = self.clone();
        for row in 0..self.height {
            for col in 0..self.width {
                out.pixels[row * self.width + col] = self.get(self.width - 1 - col, row);
            }
        }
        out
    }

    pub fn flipped_vertical(&self) -> Self {
        let mut out = self.clone();
        for row in 0..self.height {
            for col in 0..self.width {
                out.pixels[row * self.width + col] = self.get(col, self.height - 1 - row);
            }
        }
        out
    }
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let k = i.rem_euclid(period);
    if k >= n as isize {
        (period - 1 - k) as usize
    } else {
        k as usize
    }
}

/// Normalised sampled Gaussian, `w[k]` for offsets `0..=radius`.
pub fn gaussian_weights(sigma_px: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_px).ceil() as usize;
    let mut w: Vec<f64> = (0..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma_px * sigma_px)).exp())
        .collect();
    let total = w[0] + 2.0 * w[1..].iter().sum::<f64>();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

fn convolve_line(src: &[f64], w: &[f64], out: &mut [f64]) {
    let n = src.len();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        // Outermost pairs first; each pair adds its two samples before
        // weighting so that mirrored inputs produce identical sums.
        for k in (1..w.len()).rev() {
            let a = src[reflect(i as isize - k as isize, n)];
            let b = src[reflect(i as isize + k as isize, n)];
            acc += w[k] * (a + b);
        }
        *o = acc + w[0] * src[i];
    }
}

/// Separable Gaussian blur with reflecting boundaries; `sigma_px = 0` is a no-op.
pub fn gaussian_smooth(img: &ScalarImage, sigma_px: f64) -> ScalarImage {
    if sigma_px <= 0.0 {
        return img.clone();
    }
    let w = gaussian_weights(sigma_px);
    let (nx, ny) = (img.width, img.height);
    let mut tmp = vec![0.0; nx * ny];
    for row in 0..ny {
        convolve_line(
            &img.pixels[row * nx..(row + 1) * nx],
            &w,
            &mut tmp[row * nx..(row + 1) * nx],
        );
    }
    let mut out = img.clone();
    let mut col_in = vec![0.0; ny];
    let mut col_out = vec![0.0; ny];
    for col in 0..nx {
        for row in 0..ny {
            col_in[row] = tmp[row * nx + col];
        }
        convolve_line(&col_in, &w, &mut col_out);
        for row in 0..ny {
            out.pixels[row * nx + col] = col_out[row];
        }
    }
    out
}

/// Value and spatial derivatives of an image at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageJet {
    pub value: f64,
    pub grad: Vec2,
    pub hess: Mat2,
    /// Third derivatives; only filled when order 3 is requested.
    pub third: Ten3,
}

impl ImageJet {
    pub fn zero() -> Self {
        Self {
            value: 0.0,
            grad: ZERO2,
            hess: ZERO_MAT,
            third: ZERO_TEN3,
        }
    }
}

/// A scalar field that can be evaluated with derivatives up to order 3.
pub trait ImageField: Sync {
    fn jet(&self, x: &Vec2, order: usize) -> ImageJet;

    fn value(&self, x: &Vec2) -> f64 {
        self.jet(x, 0).value
    }

    /// Evaluations that fell outside the field's domain and were clamped.
    fn clamp_count(&self) -> usize {
        0
    }
}

/// In-place interpolating cubic B-spline prefilter with natural boundaries.
///
/// The signal is extended by point reflection about its end samples, so the
/// end coefficients equal the end samples and the interior solves the
/// tridiagonal system `c[i-1] + 4 c[i] + c[i+1] = 6 s[i]`. Linear signals are
/// reproduced exactly.
fn prefilter_line(s: &mut [f64]) {
    let n = s.len();
    let m = n - 2;
    // Thomas sweep over the interior; rhs folds in the known end values
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for i in 0..m {
        let mut rhs = 6.0 * s[i + 1];
        if i == 0 {
            rhs -= s[0];
        }
        if i == m - 1 {
            rhs -= s[n - 1];
        }
        let (c_prev, d_prev) = if i == 0 { (0.0, 0.0) } else { (cp[i - 1], dp[i - 1]) };
        let denom = 4.0 - c_prev;
        cp[i] = 1.0 / denom;
        dp[i] = (rhs - d_prev) / denom;
    }
    for i in (0..m).rev() {
        let next = if i + 1 < m { s[i + 2] } else { 0.0 };
        s[i + 1] = dp[i] - cp[i] * next;
    }
}

/// Node `i` of the point-reflected extension as `a * c[j0] + b * c[j1]`.
fn extend(i: isize, n: usize) -> [(usize, f64); 2] {
    let last = n as isize - 1;
    if i < 0 {
        [(0, 2.0), ((-i) as usize, -1.0)]
    } else if i > last {
        [(last as usize, 2.0), ((2 * last - i) as usize, -1.0)]
    } else {
        [(i as usize, 1.0), (i as usize, 0.0)]
    }
}

/// Cubic B-spline weights and their derivatives for fractional offset `t`,
/// for the nodes `floor - 1 ..= floor + 2`.
fn bspline_weights(t: f64, order: usize) -> [[f64; 4]; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    let mut w = [[0.0; 4]; 4];
    w[0] = [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ];
    if order >= 1 {
        w[1] = [
            -0.5 * s * s,
            0.5 * (3.0 * t2 - 4.0 * t),
            0.5 * (-3.0 * t2 + 2.0 * t + 1.0),
            0.5 * t2,
        ];
    }
    if order >= 2 {
        w[2] = [s, 3.0 * t - 2.0, 1.0 - 3.0 * t, t];
    }
    if order >= 3 {
        w[3] = [-1.0, 3.0, -3.0, 1.0];
    }
    w
}

/// Interpolating cubic B-spline over a raster.
///
/// Reproduces pixel values at pixel centres. Coefficients are extended past
/// the edges by point reflection, which makes the second derivative vanish at
/// the boundary nodes. Points outside the world domain are clamped onto its
/// boundary and counted.
#[derive(Debug)]
pub struct Interpolant {
    width: usize,
    height: usize,
    coeffs: Vec<f64>,
    domain: Rect,
    clamped: AtomicUsize,
}

impl Clone for Interpolant {
    fn clone(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            coeffs: self.coeffs.clone(),
            domain: self.domain,
            clamped: AtomicUsize::new(self.clamp_count()),
        }
    }
}

impl Interpolant {
    pub fn fit(img: &ScalarImage) -> Self {
        let (nx, ny) = (img.width, img.height);
        let mut c = img.pixels.clone();
        for row in c.chunks_mut(nx) {
            prefilter_line(row);
        }
        let mut col = vec![0.0; ny];
        for x in 0..nx {
            for y in 0..ny {
                col[y] = c[y * nx + x];
            }
            prefilter_line(&mut col);
            for y in 0..ny {
                c[y * nx + x] = col[y];
            }
        }
        Self {
            width: nx,
            height: ny,
            coeffs: c,
            domain: img.domain,
            clamped: AtomicUsize::new(0),
        }
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of evaluations that fell outside the domain and were clamped.
    pub fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn reset_clamp_count(&self) {
        self.clamped.store(0, Ordering::Relaxed);
    }

    /// Value, gradient and Hessian.
    pub fn eval2(&self, x: &Vec2) -> (f64, Vec2, Mat2) {
        let j = self.jet(x, 2);
        (j.value, j.grad, j.hess)
    }
}

impl ImageField for Interpolant {
    fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    fn jet(&self, x: &Vec2, order: usize) -> ImageJet {
        let order = order.min(3);
        let p = if self.domain.contains(x) {
            *x
        } else {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            self.domain.clamp(x)
        };
        let dx = self.domain.width() / self.width as f64;
        let dy = self.domain.height() / self.height as f64;
        let u = (p[0] - self.domain.x0) / dx - 0.5;
        let v = (p[1] - self.domain.y0) / dy - 0.5;
        let iu = u.floor();
        let iv = v.floor();
        let wx = bspline_weights(u - iu, order);
        let wy = bspline_weights(v - iv, order);
        let (iu, iv) = (iu as isize, iv as isize);

        // partial sums over x for every y node and x-derivative order
        let mut rows = [[0.0; 4]; 4];
        for (n, row) in rows.iter_mut().enumerate() {
            let ys = extend(iv - 1 + n as isize, self.height);
            for m in 0..4 {
                let xs = extend(iu - 1 + m as isize, self.width);
                let mut c = 0.0;
                for &(y, wy) in &ys {
                    for &(x, wx) in &xs {
                        c += wy * wx * self.coeffs[y * self.width + x];
                    }
                }
                for (a, r) in row.iter_mut().enumerate().take(order + 1) {
                    *r += wx[a][m] * c;
                }
            }
        }
        // d[a][b]: a derivatives in x, b in y (world units)
        let mut d = [[0.0; 4]; 4];
        for a in 0..=order {
            for b in 0..=(order - a) {
                let mut s = 0.0;
                for n in 0..4 {
                    s += wy[b][n] * rows[n][a];
                }
                d[a][b] = s / (dx.powi(a as i32) * dy.powi(b as i32));
            }
        }
        let mut jet = ImageJet::zero();
        jet.value = d[0][0];
        if order >= 1 {
            jet.grad = [d[1][0], d[0][1]];
        }
        if order >= 2 {
            jet.hess = [[d[2][0], d[1][1]], [d[1][1], d[0][2]]];
        }
        if order >= 3 {
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        let ny = a + b + c;
                        jet.third[a][b][c] = d[3 - ny][ny];
                    }
                }
            }
        }
        jet
    }
}

/// Closed-form test images with exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticImage {
    Zero,
    /// `x + y`
    Linear,
    /// `(x + y)^2`
    Quadratic,
    /// `sin(6 pi x) + x^2`
    Trig,
}

impl AnalyticImage {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Self::Zero),
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            "trig" => Ok(Self::Trig),
            _ => Err(Error::Unknown {
                what: "analytic image",
                name: name.to_string(),
            }),
        }
    }
}

impl ImageField for AnalyticImage {
    fn jet(&self, x: &Vec2, order: usize) -> ImageJet {
        let (px, py) = (x[0], x[1]);
        let mut j = ImageJet::zero();
        match self {
            AnalyticImage::Zero => {}
            AnalyticImage::Linear => {
                j.value = px + py;
                j.grad = [1.0, 1.0];
            }
            AnalyticImage::Quadratic => {
                let s = px + py;
                j.value = s * s;
                j.grad = [2.0 * s, 2.0 * s];
                j.hess = [[2.0, 2.0], [2.0, 2.0]];
            }
            AnalyticImage::Trig => {
                let w = 6.0 * std::f64::consts::PI;
                let (sn, cs) = (w * px).sin_cos();
                j.value = sn + px * px;
                j.grad = [w * cs + 2.0 * px, 0.0];
                j.hess = [[-w * w * sn + 2.0, 0.0], [0.0, 0.0]];
                j.third[0][0][0] = -w * w * w * cs;
            }
        }
        if order < 3 {
            j.third = ZERO_TEN3;
        }
        if order < 2 {
            j.hess = ZERO_MAT;
        }
        if order < 1 {
            j.grad = ZERO2;
        }
        j
    }
}
