//! Fixed-size planar tensors.
//!
//! Index order always follows the mathematical index order: `Mat2[a][b]`
//! holds the component with first index `a`, `Ten3[a][b][c]` the one with
//! indices `a, b, c`, regardless of whether those indices are upper or lower.

use crate::DIM;

pub type Vec2 = [f64; DIM];
pub type Mat2 = [[f64; DIM]; DIM];
pub type Ten3 = [[[f64; DIM]; DIM]; DIM];
pub type Ten4 = [[[[f64; DIM]; DIM]; DIM]; DIM];

pub const ZERO2: Vec2 = [0.0; DIM];
pub const ZERO_MAT: Mat2 = [[0.0; DIM]; DIM];
pub const ZERO_TEN3: Ten3 = [[[0.0; DIM]; DIM]; DIM];
pub const ZERO_TEN4: Ten4 = [[[[0.0; DIM]; DIM]; DIM]; DIM];

pub const IDENTITY: Mat2 = {
    let mut m = [[0.0; DIM]; DIM];
    let mut a = 0;
    while a < DIM {
        m[a][a] = 1.0;
        a += 1;
    }
    m
};

/// Number of independent entries of a tensor symmetric in its last two indices,
/// per leading index.
pub const SYM_PAIRS: usize = DIM * (DIM + 1) / 2;

/// The `(b, c)` pairs with `b <= c`, in packed storage order.
pub fn sym_pairs() -> impl Iterator<Item = (usize, usize)> {
    (0..DIM).flat_map(|b| (b..DIM).map(move |c| (b, c)))
}

/// Symmetrise a tensor in its last two indices.
pub fn symmetrize3(t: &mut Ten3) {
    for row in t.iter_mut() {
        for b in 0..DIM {
            for c in (b + 1)..DIM {
                let m = 0.5 * (row[b][c] + row[c][b]);
                row[b][c] = m;
                row[c][b] = m;
            }
        }
    }
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = ZERO_MAT;
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn sub(a: &Vec2, b: &Vec2) -> Vec2 {
    let mut out = ZERO2;
    for k in 0..DIM {
        out[k] = a[k] - b[k];
    }
    out
}

pub fn norm2(a: &Vec2) -> f64 {
    a.iter().map(|v| v * v).sum()
}
