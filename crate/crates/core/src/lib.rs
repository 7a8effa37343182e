//! Diffeomorphic image registration with jet-particles.
//!
//! A deformation is parameterised by finitely many particles that carry, in
//! addition to a position, the first and second derivatives of the flow at
//! that point. Their momenta evolve under a Hamiltonian geodesic flow driven by
//! an isotropic Gaussian reproducing kernel. Registration shoots the particles
//! from a regular grid, compares images with a Taylor-expanded matching
//! functional evaluated at the particle jets, and optimises the initial momenta
//! with L-BFGS using gradients from an adjoint pass.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel`]: Gaussian kernel and its partial derivatives up to order 6.
//! - [`jet`]: jet-particle phase space, grid initialisation, flattening.
//! - [`dynamics`]: Hamiltonian, `xi` fields and the equations of motion.
//! - [`variation`]: first-variation (tangent) and adjoint operators.
//! - [`ode`]: fixed-step RK4 forward flow, tangent flow and discrete adjoint.
//! - [`image`] and [`synthetic`]: rasters, smoothing, cubic B-spline interpolation,
//!   closed-form test images; [`io`] reads and writes PGM/PNG files.
//! - [`matching`]: matching functionals of order 0, 1 and 2 and their gradients.
//! - [`flowmap`]: velocity field, point transport, image warping, grid figures.
//! - [`lbfgs`] and [`register`]: the optimiser and the end-to-end registration.
//! - [`presets`] and [`convergence`]: single-particle deformation presets and the
//!   matching-functional convergence study.

// Tensor code indexes components explicitly; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod dynamics;
mod error;
pub mod flowmap;
pub mod image;
#[cfg(feature = "io")]
pub mod io;
pub mod jet;
pub mod kernel;
pub mod lbfgs;
pub mod matching;
pub mod ode;
mod par;
pub mod presets;
pub mod register;
pub mod synthetic;
pub mod tensor;
pub mod variation;

pub use error::{Error, Result};
pub use jet::{AdjointState, JetOrder, JetState, TangentState};
pub use kernel::KernelSpec;

/// Spatial dimension. All experiments are planar.
pub const DIM: usize = 2;
