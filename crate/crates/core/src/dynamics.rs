//! Jet-particle Hamiltonian and equations of motion.
//!
//! With `K^{ab}(x) = delta^{ab} k(x)` every kernel contraction collapses the
//! paired component indices, so the formulas below sum over one component
//! index less than their tensor form. `D[..]` denotes a partial derivative of
//! the scalar kernel `k` evaluated at `q_i - q_j`.
//!
//! The velocity field generated by a state is
//!
//! `u^a(x) = sum_j p_ja k(x - q_j) - [mu1_j]_a^c d_c k(x - q_j) + [mu2_j]_a^{cd} d_cd k(x - q_j)`
//!
//! and `q_dot = u(q_i)`, `xi1 = Du(q_i)`, `xi2 = D^2 u(q_i)`.

use crate::kernel::{KernelSpec, PairTable};
use crate::par::map_indices;
use crate::tensor::{symmetrize3, Mat2, Ten3, Ten4, Vec2, ZERO2, ZERO_MAT, ZERO_TEN3, ZERO_TEN4};
use crate::{JetState, DIM};

/// `xi^{(k)} = dH / d mu^{(k)}`, evaluated per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct XiField {
    /// `xi1[i][a][b] = [xi1_i]^a_b`
    pub xi1: Vec<Mat2>,
    /// `xi2[i][a][b][c] = [xi2_i]^a_{bc}`, symmetric in `b, c`
    pub xi2: Vec<Ten3>,
}

/// Momenta of one particle viewed as a source of the velocity field.
/// Blocks beyond the source order are zero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Source {
    pub order: u8,
    pub p: Vec2,
    pub mu1: Mat2,
    pub mu2: Ten3,
}

impl Source {
    pub fn of(state: &JetState, j: usize) -> Self {
        Self {
            order: state.k(),
            p: state.p[j],
            mu1: state.mu1.get(j).copied().unwrap_or(ZERO_MAT),
            mu2: state.mu2.get(j).copied().unwrap_or(ZERO_TEN3),
        }
    }
}

/// Derivatives of the velocity field at a point, up to order 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityJet {
    pub u: Vec2,
    /// `du[a][b] = d_b u^a`
    pub du: Mat2,
    /// `d2u[a][b][c] = d_bc u^a`
    pub d2u: Ten3,
    /// `d3u[a][b][c][d] = d_bcd u^a`
    pub d3u: Ten4,
}

impl Default for VelocityJet {
    fn default() -> Self {
        Self {
            u: ZERO2,
            du: ZERO_MAT,
            d2u: ZERO_TEN3,
            d3u: ZERO_TEN4,
        }
    }
}

#[inline]
fn bump(mut c: [usize; DIM], axis: usize) -> [usize; DIM] {
    c[axis] += 1;
    c
}

#[inline]
fn at(t: &PairTable, c: [usize; DIM]) -> f64 {
    t.at(c[0], c[1])
}

/// Component `a` of the field generated by `src`, differentiated by the axis
/// counts `base`.
#[inline]
pub(crate) fn source_component(t: &PairTable, src: &Source, a: usize, base: [usize; DIM]) -> f64 {
    let mut v = src.p[a] * at(t, base);
    if src.order >= 1 {
        for c in 0..DIM {
            v -= src.mu1[a][c] * at(t, bump(base, c));
        }
    }
    if src.order >= 2 {
        for c in 0..DIM {
            for d in 0..DIM {
                v += src.mu2[a][c][d] * at(t, bump(bump(base, c), d));
            }
        }
    }
    v
}

impl VelocityJet {
    /// Adds `scale` times the contribution of `src` through table `t`, with
    /// every derivative shifted by the axis counts `shift`, up to `deriv`
    /// spatial derivatives.
    pub(crate) fn accumulate(&mut self, t: &PairTable, src: &Source, deriv: usize, shift: [usize; DIM], scale: f64) {
        for a in 0..DIM {
            self.u[a] += scale * source_component(t, src, a, shift);
            if deriv < 1 {
                continue;
            }
            for b in 0..DIM {
                let sb = bump(shift, b);
                self.du[a][b] += scale * source_component(t, src, a, sb);
                if deriv < 2 {
                    continue;
                }
                for c in 0..DIM {
                    let sc = bump(sb, c);
                    self.d2u[a][b][c] += scale * source_component(t, src, a, sc);
                    if deriv < 3 {
                        continue;
                    }
                    for d in 0..DIM {
                        self.d3u[a][b][c][d] += scale * source_component(t, src, a, bump(sc, d));
                    }
                }
            }
        }
    }
}

/// Velocity field derivatives at an arbitrary point `x`, up to `deriv <= 3`.
pub fn velocity_jet_at(state: &JetState, x: &Vec2, spec: &KernelSpec, deriv: usize) -> VelocityJet {
    assert!(deriv <= 3, "velocity jets are available up to order 3");
    let order = state.k() as usize + deriv;
    let mut jet = VelocityJet::default();
    for j in 0..state.len() {
        let off = [x[0] - state.q[j][0], x[1] - state.q[j][1]];
        let t = PairTable::for_offset(&off, spec, order);
        jet.accumulate(&t, &Source::of(state, j), deriv, [0; DIM], 1.0);
    }
    jet
}

/// Velocity field jets at every particle position.
pub fn velocity_jets(state: &JetState, spec: &KernelSpec, deriv: usize) -> Vec<VelocityJet> {
    map_indices(state.len(), |i| velocity_jet_at(state, &state.q[i], spec, deriv))
}

pub fn hamiltonian(state: &JetState, spec: &KernelSpec) -> f64 {
    let k = state.k();
    let n = state.len();
    let max_order = 2 * k as usize;
    let rows = map_indices(n, |i| {
        let si = Source::of(state, i);
        let mut h = 0.0;
        for j in 0..n {
            let sj = Source::of(state, j);
            let t = PairTable::for_offset(
                &[state.q[i][0] - state.q[j][0], state.q[i][1] - state.q[j][1]],
                spec,
                max_order,
            );
            for a in 0..DIM {
                // p p
                h += 0.5 * si.p[a] * sj.p[a] * t.d(&[]);
                if k >= 1 {
                    for g in 0..DIM {
                        // p mu1
                        h -= si.p[a] * sj.mu1[a][g] * t.d(&[g]);
                        for d in 0..DIM {
                            // mu1 mu1
                            h -= 0.5 * si.mu1[a][d] * sj.mu1[a][g] * t.d(&[d, g]);
                        }
                    }
                }
                if k >= 2 {
                    for g in 0..DIM {
                        for d in 0..DIM {
                            // p mu2
                            h += si.p[a] * sj.mu2[a][g][d] * t.d(&[d, g]);
                            for e in 0..DIM {
                                // mu1 mu2
                                h += si.mu1[a][e] * sj.mu2[a][g][d] * t.d(&[e, g, d]);
                                for f in 0..DIM {
                                    // mu2 mu2
                                    h += 0.5 * si.mu2[a][e][f] * sj.mu2[a][g][d] * t.d(&[g, d, e, f]);
                                }
                            }
                        }
                    }
                }
            }
        }
        h
    });
    rows.iter().sum()
}

pub fn xi_from_state(state: &JetState, spec: &KernelSpec) -> XiField {
    if state.k() == 0 {
        return XiField {
            xi1: vec![],
            xi2: vec![],
        };
    }
    let jets = velocity_jets(state, spec, state.k() as usize);
    xi_from_jets(state, &jets)
}

fn xi_from_jets(state: &JetState, jets: &[VelocityJet]) -> XiField {
    let xi1 = jets.iter().map(|j| j.du).collect();
    let xi2 = if state.k() >= 2 {
        jets.iter()
            .map(|j| {
                let mut t = j.d2u;
                symmetrize3(&mut t);
                t
            })
            .collect()
    } else {
        vec![]
    };
    XiField { xi1, xi2 }
}

/// Momentum force `p_dot_i = T00 + T01 + T02 + T12 + T11 + T22` for the pair
/// `(i, j)`, given the kernel table at `q_i - q_j`.
fn momentum_force(t: &PairTable, si: &Source, sj: &Source, k: u8) -> Vec2 {
    let mut out = ZERO2;
    for (al, slot) in out.iter_mut().enumerate() {
        let mut v = 0.0;
        for g in 0..DIM {
            v -= si.p[g] * sj.p[g] * t.d(&[al]);
        }
        if k >= 1 {
            for d in 0..DIM {
                for g in 0..DIM {
                    v += (si.p[d] * sj.mu1[d][g] - sj.p[d] * si.mu1[d][g]) * t.d(&[g, al]);
                }
            }
            for e in 0..DIM {
                for d in 0..DIM {
                    for g in 0..DIM {
                        v += si.mu1[e][d] * sj.mu1[e][g] * t.d(&[d, g, al]);
                    }
                }
            }
        }
        if k >= 2 {
            for e in 0..DIM {
                for g in 0..DIM {
                    for d in 0..DIM {
                        let w = t.d(&[g, d, al]);
                        v -= (si.p[e] * sj.mu2[e][g][d] + sj.p[e] * si.mu2[e][g][d]) * w;
                    }
                }
            }
            for f in 0..DIM {
                for e in 0..DIM {
                    for g in 0..DIM {
                        for d in 0..DIM {
                            let w = t.d(&[e, g, d, al]);
                            v -= (si.mu1[f][e] * sj.mu2[f][g][d] - sj.mu1[f][e] * si.mu2[f][g][d]) * w;
                        }
                    }
                }
            }
            for z in 0..DIM {
                for e in 0..DIM {
                    for f in 0..DIM {
                        for g in 0..DIM {
                            for d in 0..DIM {
                                v -= si.mu2[z][e][f] * sj.mu2[z][g][d] * t.d(&[e, d, g, f, al]);
                            }
                        }
                    }
                }
            }
        }
        *slot = v;
    }
    out
}

/// `[q1_dot]^a_b = [xi1]^a_c [q1]^c_b`
pub(crate) fn q1_rate(xi1: &Mat2, q1: &Mat2) -> Mat2 {
    let mut out = ZERO_MAT;
    for a in 0..DIM {
        for b in 0..DIM {
            for c in 0..DIM {
                out[a][b] += xi1[a][c] * q1[c][b];
            }
        }
    }
    out
}

/// `[q2_dot]^a_{bc} = [xi2]^a_{de} [q1]^d_b [q1]^e_c + [xi1]^a_d [q2]^d_{bc}`,
/// symmetrised so round-off never breaks the `b, c` symmetry.
pub(crate) fn q2_rate(xi1: &Mat2, xi2: &Ten3, q1: &Mat2, q2: &Ten3) -> Ten3 {
    let mut out = ZERO_TEN3;
    for a in 0..DIM {
        for b in 0..DIM {
            for c in 0..DIM {
                let mut v = 0.0;
                for d in 0..DIM {
                    for e in 0..DIM {
                        v += xi2[a][d][e] * q1[d][b] * q1[e][c];
                    }
                    v += xi1[a][d] * q2[d][b][c];
                }
                out[a][b][c] = v;
            }
        }
    }
    symmetrize3(&mut out);
    out
}

/// `mu1_dot = -ad*_xi mu`, first-order part.
pub(crate) fn mu1_rate(mu1: &Mat2, mu2: &Ten3, xi1: &Mat2, xi2: &Ten3) -> Mat2 {
    let mut out = ZERO_MAT;
    for a in 0..DIM {
        for b in 0..DIM {
            let mut v = 0.0;
            for g in 0..DIM {
                v += mu1[a][g] * xi1[b][g] - mu1[g][b] * xi1[g][a];
                for d in 0..DIM {
                    v += mu2[a][d][g] * xi2[b][d][g];
                    v -= mu2[d][b][g] * xi2[d][a][g];
                    v -= mu2[d][g][b] * xi2[d][g][a];
                }
            }
            out[a][b] = v;
        }
    }
    out
}

/// `mu2_dot = -ad*_xi mu`, second-order part, symmetrised in the upper pair.
pub(crate) fn mu2_rate(mu2: &Ten3, xi1: &Mat2) -> Ten3 {
    let mut out = ZERO_TEN3;
    for a in 0..DIM {
        for b in 0..DIM {
            for g in 0..DIM {
                let mut v = 0.0;
                for d in 0..DIM {
                    v += mu2[a][d][g] * xi1[b][d];
                    v += mu2[a][b][d] * xi1[g][d];
                    v -= mu2[d][b][g] * xi1[d][a];
                }
                out[a][b][g] = v;
            }
        }
    }
    symmetrize3(&mut out);
    out
}

/// Right-hand side of the jet-particle equations of motion.
pub fn state_derivative(state: &JetState, spec: &KernelSpec) -> JetState {
    let k = state.k();
    let n = state.len();
    let deriv = k as usize;
    let table_order = 2 * k as usize + 1;
    let rows = map_indices(n, |i| {
        let si = Source::of(state, i);
        let mut jet = VelocityJet::default();
        let mut force = ZERO2;
        for j in 0..n {
            let sj = Source::of(state, j);
            let t = PairTable::for_offset(
                &[state.q[i][0] - state.q[j][0], state.q[i][1] - state.q[j][1]],
                spec,
                table_order,
            );
            jet.accumulate(&t, &sj, deriv, [0; DIM], 1.0);
            let f = momentum_force(&t, &si, &sj, k);
            force[0] += f[0];
            force[1] += f[1];
        }
        (jet, force)
    });

    let mut out = state.zeros_like();
    for (i, (jet, force)) in rows.into_iter().enumerate() {
        out.q[i] = jet.u;
        out.p[i] = force;
        if k >= 1 {
            let mut xi2 = jet.d2u;
            symmetrize3(&mut xi2);
            let (q2, mu2) = if k >= 2 {
                (state.q2[i], state.mu2[i])
            } else {
                (ZERO_TEN3, ZERO_TEN3)
            };
            out.q1[i] = q1_rate(&jet.du, &state.q1[i]);
            out.mu1[i] = mu1_rate(&state.mu1[i], &mu2, &jet.du, &xi2);
            if k >= 2 {
                out.q2[i] = q2_rate(&jet.du, &xi2, &state.q1[i], &q2);
                out.mu2[i] = mu2_rate(&mu2, &jet.du);
            }
        }
    }
    out
}
