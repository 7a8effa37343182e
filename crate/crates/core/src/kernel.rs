//! Isotropic Gaussian reproducing kernel `K(x) = exp(-|x|^2 / 2 sigma^2)` and
//! its partial derivatives.
//!
//! The matrix kernel is this scalar times the identity. Because the Gaussian
//! factorises over axes, a mixed partial derivative is a product of 1-D
//! derivatives, each of which is a scaled probabilists' Hermite polynomial:
//!
//! `d^n/dt^n exp(-t^2 / 2 s^2) = (-1/s)^n He_n(t/s) exp(-t^2 / 2 s^2)`
//!
//! with `He_{n+1}(u) = u He_n(u) - n He_{n-1}(u)`.

use serde::{Deserialize, Serialize};

use crate::tensor::Vec2;
use crate::{Error, Result, DIM};

/// Highest supported total derivative order.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    sigma: f64,
}

impl KernelSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// A derivative multi-index given as an ordered list of axes.
///
/// Evaluation only depends on how often each axis occurs, so any permutation
/// of `axes` denotes the same derivative.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    axes: Vec<usize>,
}

impl MultiIndex {
    pub fn new(axes: &[usize]) -> Result<Self> {
        if let Some(&a) = axes.iter().find(|&&a| a >= DIM) {
            return Err(Error::InvalidArgument(format!("axis {a} out of range")));
        }
        Ok(Self { axes: axes.to_vec() })
    }

    pub fn order(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    /// Occurrence count of each axis.
    pub fn counts(&self) -> [usize; DIM] {
        let mut c = [0; DIM];
        for &a in &self.axes {
            c[a] += 1;
        }
        c
    }
}

/// `d^n/dt^n exp(-t^2 / 2 sigma^2)` for `n = 0..=MAX_ORDER`.
fn axis_derivatives(t: f64, sigma: f64) -> [f64; MAX_ORDER + 1] {
    let u = t / sigma;
    let g = (-0.5 * u * u).exp();
    let mut he = [0.0; MAX_ORDER + 1];
    he[0] = 1.0;
    he[1] = u;
    for n in 1..MAX_ORDER {
        he[n + 1] = u * he[n] - n as f64 * he[n - 1];
    }
    let mut out = [0.0; MAX_ORDER + 1];
    let mut scale = 1.0;
    for n in 0..=MAX_ORDER {
        out[n] = scale * he[n] * g;
        scale *= -1.0 / sigma;
    }
    out
}

fn check_finite(x: &Vec2) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("non-finite kernel argument {x:?}")))
    }
}

pub fn kernel_scalar(x: &Vec2, spec: &KernelSpec) -> Result<f64> {
    check_finite(x)?;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((-r2 / (2.0 * spec.sigma * spec.sigma)).exp())
}

pub fn kernel_deriv(x: &Vec2, idx: &MultiIndex, spec: &KernelSpec) -> Result<f64> {
    if idx.order() > MAX_ORDER {
        return Err(Error::UnsupportedOrder(idx.order()));
    }
    check_finite(x)?;
    let counts = idx.counts();
    let mut v = 1.0;
    for a in 0..DIM {
        v *= axis_derivatives(x[a], spec.sigma)[counts[a]];
    }
    Ok(v)
}

/// All kernel derivatives up to a given total order for one offset `xi - xj`.
///
/// Entries are stored by axis counts, so lookups are permutation-invariant by
/// construction.
#[derive(Debug, Clone)]
pub struct PairTable {
    vals: [[f64; MAX_ORDER + 1]; MAX_ORDER + 1],
    max_order: usize,
}

impl PairTable {
    pub fn new(xi: &Vec2, xj: &Vec2, spec: &KernelSpec, max_order: usize) -> Result<Self> {
        if max_order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(max_order));
        }
        let x = [xi[0] - xj[0], xi[1] - xj[1]];
        check_finite(&x)?;
        Ok(Self::for_offset(&x, spec, max_order))
    }

    /// Unchecked constructor for the dynamics hot loops.
    pub(crate) fn for_offset(x: &Vec2, spec: &KernelSpec, max_order: usize) -> Self {
        let gx = axis_derivatives(x[0], spec.sigma);
        let gy = axis_derivatives(x[1], spec.sigma);
        let mut vals = [[0.0; MAX_ORDER + 1]; MAX_ORDER + 1];
        for a in 0..=max_order {
            for b in 0..=(max_order - a) {
                vals[a][b] = gx[a] * gy[b];
            }
        }
        Self { vals, max_order }
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Derivative with `nx` differentiations along axis 0 and `ny` along axis 1.
    #[inline]
    pub fn at(&self, nx: usize, ny: usize) -> f64 {
        debug_assert!(nx + ny <= self.max_order);
        self.vals[nx][ny]
    }

    /// Derivative along the listed axes.
    #[inline]
    pub fn d(&self, axes: &[usize]) -> f64 {
        let ny: usize = axes.iter().sum();
        self.at(axes.len() - ny, ny)
    }

    pub fn get(&self, idx: &MultiIndex) -> Result<f64> {
        if idx.order() > self.max_order {
            return Err(Error::UnsupportedOrder(idx.order()));
        }
        let c = idx.counts();
        Ok(self.at(c[0], c[1]))
    }
}
