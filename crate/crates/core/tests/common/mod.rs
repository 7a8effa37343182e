#![allow(dead_code, clippy::needless_range_loop)]

use jetreg::tensor::{symmetrize3, IDENTITY};
use jetreg::{JetOrder, JetState, DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn order(k: u8) -> JetOrder {
    JetOrder::try_from(k).unwrap()
}

fn u(r: &mut ChaCha8Rng, s: f64) -> f64 {
    r.gen_range(-s..s)
}

/// Random state with particles spread over a few kernel widths, Jacobians near
/// the identity and momenta of moderate size.
pub fn random_state(r: &mut ChaCha8Rng, k: u8, n: usize, sigma: f64) -> JetState {
    let mut s = JetState::zeros(order(k), n);
    for i in 0..n {
        s.q[i] = [u(r, 1.5 * sigma), u(r, 1.5 * sigma)];
        s.p[i] = [u(r, 1.0), u(r, 1.0)];
    }
    for m in s.q1.iter_mut() {
        for a in 0..DIM {
            for b in 0..DIM {
                m[a][b] = IDENTITY[a][b] + u(r, 0.3);
            }
        }
    }
    for m in s.mu1.iter_mut() {
        for a in 0..DIM {
            for b in 0..DIM {
                m[a][b] = u(r, sigma);
            }
        }
    }
    for t in s.q2.iter_mut() {
        fill3(r, t, 0.5);
        symmetrize3(t);
    }
    for t in s.mu2.iter_mut() {
        fill3(r, t, 0.5 * sigma * sigma);
        symmetrize3(t);
    }
    s
}

/// Random direction with every block populated (symmetric where required).
pub fn random_direction(r: &mut ChaCha8Rng, like: &JetState, scale: f64) -> JetState {
    let mut d = like.zeros_like();
    for v in d.q.iter_mut().chain(d.p.iter_mut()) {
        *v = [u(r, scale), u(r, scale)];
    }
    for m in d.q1.iter_mut().chain(d.mu1.iter_mut()) {
        for a in 0..DIM {
            for b in 0..DIM {
                m[a][b] = u(r, scale);
            }
        }
    }
    for t in d.q2.iter_mut().chain(d.mu2.iter_mut()) {
        fill3(r, t, scale);
        symmetrize3(t);
    }
    d
}

fn fill3(r: &mut ChaCha8Rng, t: &mut [[[f64; DIM]; DIM]; DIM], s: f64) {
    for a in 0..DIM {
        for b in 0..DIM {
            for c in 0..DIM {
                t[a][b][c] = u(r, s);
            }
        }
    }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    num / den
}

use jetreg::image::{ImageField, ImageJet};

/// Smooth field with every derivative up to order three non-trivial.
pub struct Wavy;

impl ImageField for Wavy {
    fn jet(&self, x: &[f64; 2], order: usize) -> ImageJet {
        let (px, py) = (x[0], x[1]);
        let (s3, c3) = (3.0 * px).sin_cos();
        let (s2, c2) = (2.0 * py).sin_cos();
        let mut j = ImageJet::zero();
        // f = sin(3x) cos(2y) + 0.5 x y^2
        j.value = s3 * c2 + 0.5 * px * py * py;
        if order >= 1 {
            j.grad = [3.0 * c3 * c2 + 0.5 * py * py, -2.0 * s3 * s2 + px * py];
        }
        if order >= 2 {
            let xy = -6.0 * c3 * s2 + py;
            j.hess = [[-9.0 * s3 * c2, xy], [xy, -4.0 * s3 * c2 + px]];
        }
        if order >= 3 {
            let xxx = -27.0 * c3 * c2;
            let xxy = 18.0 * s3 * s2;
            let xyy = -12.0 * c3 * c2 + 1.0;
            let yyy = 8.0 * s3 * s2;
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        j.third[a][b][c] = [xxx, xxy, xyy, yyy][a + b + c];
                    }
                }
            }
        }
        j
    }
}
