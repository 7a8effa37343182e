//! Jet-particle phase space.
//!
//! A state of `N` particles of order `k` holds, per particle,
//!
//! | block | shape     | meaning                                    | present |
//! |-------|-----------|--------------------------------------------|---------|
//! | `q`   | `d`       | position `q^a`                             | always  |
//! | `q1`  | `d x d`   | flow Jacobian `[q1]^a_b`                   | `k >= 1`|
//! | `q2`  | `d x d x d` | flow Hessian `[q2]^a_{bc}`, sym. in `b,c` | `k = 2` |
//! | `p`   | `d`       | momentum `p_a`                             | always  |
//! | `mu1` | `d x d`   | first-order momentum `[mu1]_a^b`           | `k >= 1`|
//! | `mu2` | `d x d x d` | second-order momentum `[mu2]_a^{bc}`, sym. | `k = 2` |
//!
//! Absent blocks are empty vectors. The same struct doubles as a tangent
//! vector ([`TangentState`]) and as a covector ([`AdjointState`]); the pairing
//! between the two is the plain sum of products over every stored entry,
//! including both off-diagonal entries of the symmetric blocks.
//!
//! The flat coordinate vector orders blocks as `q, q1, q2, p, mu1, mu2`,
//! particle-major, row-major within tensors, with symmetric blocks packed to
//! their `b <= c` entries.

use serde::{Deserialize, Serialize};

use crate::image::Rect;
use crate::kernel::KernelSpec;
use crate::tensor::{sym_pairs, symmetrize3, Mat2, Ten3, Vec2, IDENTITY, SYM_PAIRS, ZERO2, ZERO_MAT, ZERO_TEN3};
use crate::{Error, Result, DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum JetOrder {
    Zero,
    One,
    Two,
}

impl JetOrder {
    pub fn k(self) -> u8 {
        match self {
            JetOrder::Zero => 0,
            JetOrder::One => 1,
            JetOrder::Two => 2,
        }
    }
}

impl TryFrom<u8> for JetOrder {
    type Error = Error;

    fn try_from(k: u8) -> Result<Self> {
        match k {
            0 => Ok(JetOrder::Zero),
            1 => Ok(JetOrder::One),
            2 => Ok(JetOrder::Two),
            _ => Err(Error::InvalidArgument(format!("jet order must be 0, 1 or 2, got {k}"))),
        }
    }
}

impl From<JetOrder> for u8 {
    fn from(o: JetOrder) -> u8 {
        o.k()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JetState {
    pub order: JetOrder,
    pub q: Vec<Vec2>,
    pub q1: Vec<Mat2>,
    pub q2: Vec<Ten3>,
    pub p: Vec<Vec2>,
    pub mu1: Vec<Mat2>,
    pub mu2: Vec<Ten3>,
}

/// First variation of a [`JetState`]; same layout.
pub type TangentState = JetState;

/// Covector on the jet phase space; same layout, paired entrywise.
pub type AdjointState = JetState;

impl JetState {
    /// All blocks zero, with the blocks required by `order` allocated.
    pub fn zeros(order: JetOrder, n: usize) -> Self {
        let k = order.k();
        Self {
            order,
            q: vec![ZERO2; n],
            q1: if k >= 1 { vec![ZERO_MAT; n] } else { vec![] },
            q2: if k >= 2 { vec![ZERO_TEN3; n] } else { vec![] },
            p: vec![ZERO2; n],
            mu1: if k >= 1 { vec![ZERO_MAT; n] } else { vec![] },
            mu2: if k >= 2 { vec![ZERO_TEN3; n] } else { vec![] },
        }
    }

    /// Particles at rest at `positions` with identity Jacobians.
    pub fn at_rest(order: JetOrder, positions: Vec<Vec2>) -> Self {
        let mut s = Self::zeros(order, positions.len());
        s.q = positions;
        for m in s.q1.iter_mut() {
            *m = IDENTITY;
        }
        s
    }

    /// Cell-centre lattice with `n_per_axis` particles per axis over `domain`,
    /// row-major (x varies fastest).
    pub fn init_grid(domain: &Rect, n_per_axis: usize, order: JetOrder) -> Result<Self> {
        if n_per_axis == 0 {
            return Err(Error::InvalidArgument("n_per_axis must be >= 1".into()));
        }
        domain.validate()?;
        let hx = domain.width() / n_per_axis as f64;
        let hy = domain.height() / n_per_axis as f64;
        let mut pos = Vec::with_capacity(n_per_axis * n_per_axis);
        for row in 0..n_per_axis {
            for col in 0..n_per_axis {
                pos.push([domain.x0 + (col as f64 + 0.5) * hx, domain.y0 + (row as f64 + 0.5) * hy]);
            }
        }
        Ok(Self::at_rest(order, pos))
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn k(&self) -> u8 {
        self.order.k()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.order, self.len())
    }

    /// Checks block presence, lengths and finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let k = self.k();
        let expect = |name: &str, got: usize, present: bool| -> Result<()> {
            let want = if present { n } else { 0 };
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "block {name} has {got} entries, expected {want} for order {k}"
                )));
            }
            Ok(())
        };
        expect("p", self.p.len(), true)?;
        expect("q1", self.q1.len(), k >= 1)?;
        expect("mu1", self.mu1.len(), k >= 1)?;
        expect("q2", self.q2.len(), k >= 2)?;
        expect("mu2", self.mu2.len(), k >= 2)?;
        if !self.as_flat_full().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("state has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.order != other.order || self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "order {} with {} particles vs order {} with {} particles",
                self.k(),
                self.len(),
                other.k(),
                other.len()
            )));
        }
        Ok(())
    }

    /// Symmetrise `q2` and `mu2` in their last two indices.
    pub fn symmetrize(&mut self) {
        self.q2.iter_mut().for_each(symmetrize3);
        self.mu2.iter_mut().for_each(symmetrize3);
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        fn go(dst: &mut [f64], src: &[f64], a: f64) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
        go(self.q.as_flattened_mut(), other.q.as_flattened(), a);
        go(self.p.as_flattened_mut(), other.p.as_flattened(), a);
        go(
            self.q1.as_flattened_mut().as_flattened_mut(),
            other.q1.as_flattened().as_flattened(),
            a,
        );
        go(
            self.mu1.as_flattened_mut().as_flattened_mut(),
            other.mu1.as_flattened().as_flattened(),
            a,
        );
        go(
            self.q2.as_flattened_mut().as_flattened_mut().as_flattened_mut(),
            other.q2.as_flattened().as_flattened().as_flattened(),
            a,
        );
        go(
            self.mu2.as_flattened_mut().as_flattened_mut().as_flattened_mut(),
            other.mu2.as_flattened().as_flattened().as_flattened(),
            a,
        );
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.zeros_like();
        out.axpy(a, self);
        out
    }

    /// `self + a * other` as a new state.
    pub fn plus(&self, a: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(a, other);
        out
    }

    /// Entrywise pairing over every stored entry.
    pub fn dot(&self, other: &Self) -> f64 {
        self.as_flat_full()
            .iter()
            .zip(other.as_flat_full())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Every stored entry in block order, symmetric blocks unpacked.
    pub fn as_flat_full(&self) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend(self.q.as_flattened());
        v.extend(self.q1.as_flattened().as_flattened());
        v.extend(self.q2.as_flattened().as_flattened().as_flattened());
        v.extend(self.p.as_flattened());
        v.extend(self.mu1.as_flattened().as_flattened());
        v.extend(self.mu2.as_flattened().as_flattened().as_flattened());
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.as_flat_full().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Length of the packed coordinate vector.
    pub fn flat_len(order: JetOrder, n: usize) -> usize {
        let k = order.k();
        let per = |present: bool, size: usize| if present { size } else { 0 };
        let config = DIM + per(k >= 1, DIM * DIM) + per(k >= 2, DIM * SYM_PAIRS);
        2 * n * config
    }

    /// Packed coordinate vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::flat_len(self.order, self.len()));
        push_configuration(&mut v, &self.q, &self.q1, &self.q2);
        push_configuration(&mut v, &self.p, &self.mu1, &self.mu2);
        v
    }

    pub fn unflatten(v: &[f64], order: JetOrder, n: usize) -> Result<Self> {
        let want = Self::flat_len(order, n);
        if v.len() != want {
            return Err(Error::ShapeMismatch(format!(
                "flat vector has length {}, expected {want}",
                v.len()
            )));
        }
        let mut s = Self::zeros(order, n);
        let mut it = v.iter().copied();
        read_configuration(&mut it, &mut s.q, &mut s.q1, &mut s.q2);
        read_configuration(&mut it, &mut s.p, &mut s.mu1, &mut s.mu2);
        Ok(s)
    }

    /// Packed gradient of a covector: for a packed symmetric coordinate with
    /// `b < c` the gradient is the sum of the two full entries.
    pub fn flatten_covector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::flat_len(self.order, self.len()));
        push_covector(&mut v, &self.q, &self.q1, &self.q2);
        push_covector(&mut v, &self.p, &self.mu1, &self.mu2);
        v
    }

    /// Number of packed momentum coordinates (`p`, `mu1`, `mu2`).
    pub fn momentum_len(&self) -> usize {
        Self::flat_len(self.order, self.len()) / 2
    }

    pub fn momenta_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.momentum_len());
        push_configuration(&mut v, &self.p, &self.mu1, &self.mu2);
        v
    }

    pub fn set_momenta_flat(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.momentum_len() {
            return Err(Error::ShapeMismatch(format!(
                "momentum vector has length {}, expected {}",
                v.len(),
                self.momentum_len()
            )));
        }
        let mut it = v.iter().copied();
        read_configuration(&mut it, &mut self.p, &mut self.mu1, &mut self.mu2);
        Ok(())
    }

    /// Packed momentum part of a covector.
    pub fn momentum_covector_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.momentum_len());
        push_covector(&mut v, &self.p, &self.mu1, &self.mu2);
        v
    }
}

fn push_configuration(v: &mut Vec<f64>, a: &[Vec2], b: &[Mat2], c: &[Ten3]) {
    v.extend(a.as_flattened());
    v.extend(b.as_flattened().as_flattened());
    for t in c {
        for row in t {
            for (i, j) in sym_pairs() {
                v.push(row[i][j]);
            }
        }
    }
}

fn push_covector(v: &mut Vec<f64>, a: &[Vec2], b: &[Mat2], c: &[Ten3]) {
    v.extend(a.as_flattened());
    v.extend(b.as_flattened().as_flattened());
    for t in c {
        for row in t {
            for (i, j) in sym_pairs() {
                v.push(if i == j { row[i][i] } else { row[i][j] + row[j][i] });
            }
        }
    }
}

fn read_configuration(it: &mut impl Iterator<Item = f64>, a: &mut [Vec2], b: &mut [Mat2], c: &mut [Ten3]) {
    for x in a.as_flattened_mut() {
        *x = it.next().unwrap();
    }
    for x in b.as_flattened_mut().as_flattened_mut() {
        *x = it.next().unwrap();
    }
    for t in c.iter_mut() {
        for row in t.iter_mut() {
            for (i, j) in sym_pairs() {
                let x = it.next().unwrap();
                row[i][j] = x;
                row[j][i] = x;
            }
        }
    }
}

/// JSON form of a shooting state together with the kernel width it was
/// computed for. Absent blocks serialise as empty arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetStateFile {
    pub order: JetOrder,
    pub sigma: f64,
    pub q: Vec<Vec2>,
    #[serde(default)]
    pub q1: Vec<Mat2>,
    #[serde(default)]
    pub q2: Vec<Ten3>,
    pub p: Vec<Vec2>,
    #[serde(default)]
    pub mu1: Vec<Mat2>,
    #[serde(default)]
    pub mu2: Vec<Ten3>,
}

impl JetStateFile {
    pub fn new(state: &JetState, spec: &KernelSpec) -> Self {
        Self {
            order: state.order,
            sigma: spec.sigma(),
            q: state.q.clone(),
            q1: state.q1.clone(),
            q2: state.q2.clone(),
            p: state.p.clone(),
            mu1: state.mu1.clone(),
            mu2: state.mu2.clone(),
        }
    }

    pub fn into_parts(self) -> Result<(JetState, KernelSpec)> {
        let spec = KernelSpec::new(self.sigma)?;
        let state = JetState {
            order: self.order,
            q: self.q,
            q1: self.q1,
            q2: self.q2,
            p: self.p,
            mu1: self.mu1,
            mu2: self.mu2,
        };
        state.validate()?;
        Ok((state, spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_single_particle() {
        let s = JetState::init_grid(&Rect::unit(), 1, JetOrder::Two).unwrap();
        assert_eq!(s.q, vec![[0.5, 0.5]]);
        assert_eq!(s.q1, vec![IDENTITY]);
        assert_eq!(s.q2, vec![ZERO_TEN3]);
        assert_eq!(s.p, vec![ZERO2]);
    }

    #[test]
    fn grid_two_per_axis_row_major() {
        let s = JetState::init_grid(&Rect::unit(), 2, JetOrder::Zero).unwrap();
        assert_eq!(s.q, vec![[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]);
        assert!(s.q1.is_empty());
    }

    #[test]
    fn grid_eight_per_axis() {
        let s = JetState::init_grid(&Rect::unit(), 8, JetOrder::Zero).unwrap();
        assert_eq!(s.len(), 64);
        let h = 1.0 / 8.0;
        for (a, pa) in s.q.iter().enumerate() {
            for pb in &s.q[a + 1..] {
                let gap = (pa[0] - pb[0]).abs().max((pa[1] - pb[1]).abs());
                assert!(gap >= h - 1e-12);
            }
        }
    }

    #[test]
    fn grid_errors() {
        assert!(JetState::init_grid(&Rect::unit(), 0, JetOrder::Zero).is_err());
        let degenerate = Rect::new(0.0, 0.0, 0.0, 1.0);
        assert!(JetState::init_grid(&degenerate, 2, JetOrder::Zero).is_err());
    }

    #[test]
    fn flat_lengths() {
        assert_eq!(JetState::flat_len(JetOrder::Zero, 1), 4);
        assert_eq!(JetState::flat_len(JetOrder::One, 1), 12);
        assert_eq!(JetState::flat_len(JetOrder::Two, 1), 24);
        let s = JetState::zeros(JetOrder::Two, 3);
        assert_eq!(s.flatten().len(), 72);
        assert_eq!(s.momentum_len(), 36);
    }

    #[test]
    fn unflatten_rejects_bad_length() {
        assert!(matches!(
            JetState::unflatten(&[0.0; 5], JetOrder::Zero, 1),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn covector_packing_sums_off_diagonals() {
        let mut s = JetState::zeros(JetOrder::Two, 1);
        s.mu2[0][1] = [[1.0, 2.0], [3.0, 4.0]];
        let v = s.momentum_covector_flat();
        // p (2), mu1 (4), mu2 row 0 (3), mu2 row 1 (3)
        assert_eq!(&v[9..12], &[1.0, 5.0, 4.0]);
    }

    #[test]
    fn order_serde_as_integer() {
        let j = serde_json::to_string(&JetOrder::Two).unwrap();
        assert_eq!(j, "2");
        assert!(serde_json::from_str::<JetOrder>("3").is_err());
    }
}
