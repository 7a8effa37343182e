//! First-variation (tangent) and adjoint operators of the jet-particle flow.
//!
//! Both operators factor the right-hand side through the velocity jets
//! `U_i = (u, Du, D^2u, D^3u)(q_i)`:
//!
//! - `q_dot = u`, `xi1 = Du`, `xi2 = D^2u`,
//! - `p_dot_c = -sum_a ( p_a d_c u^a + [mu1]_a^b d_bc u^a + [mu2]_a^{bd} d_bdc u^a )`,
//! - `q1_dot`, `q2_dot`, `mu1_dot`, `mu2_dot` are local in `(xi, q1, q2, mu)`.
//!
//! The tangent linearises `U_i` in the source momenta and in `q_i - q_j`, then
//! applies the product rule to the local maps. The adjoint transposes every
//! local map by hand and scatters the jet covectors back onto sources and
//! positions pair by pair, giving `lambda_dot = -M^T lambda` in `O(N^2)`.

use crate::dynamics::{mu1_rate, mu2_rate, q1_rate, q2_rate, source_component, velocity_jets, Source, VelocityJet};
use crate::kernel::{KernelSpec, PairTable};
use crate::par::map_indices;
use crate::tensor::{symmetrize3, Mat2, Ten3, Vec2, ZERO2, ZERO_MAT, ZERO_TEN3};
use crate::{AdjointState, JetState, Result, TangentState, DIM};

#[inline]
fn bump(mut c: [usize; DIM], axis: usize) -> [usize; DIM] {
    c[axis] += 1;
    c
}

fn pair_table(state: &JetState, i: usize, j: usize, spec: &KernelSpec) -> PairTable {
    let k = state.k() as usize;
    PairTable::for_offset(
        &[state.q[i][0] - state.q[j][0], state.q[i][1] - state.q[j][1]],
        spec,
        2 * k + 2,
    )
}

fn mu_or_zero<T: Copy>(v: &[T], i: usize, zero: T) -> T {
    v.get(i).copied().unwrap_or(zero)
}

/// Rate of the first-variation system at `state` in direction `delta`.
pub fn tangent_apply(state: &JetState, delta: &TangentState, spec: &KernelSpec) -> Result<TangentState> {
    state.check_compatible(delta)?;
    let k = state.k();
    let n = state.len();
    let deriv = k as usize + 1;

    let rows = map_indices(n, |i| {
        let mut jet = VelocityJet::default();
        let mut djet = VelocityJet::default();
        for j in 0..n {
            let t = pair_table(state, i, j, spec);
            let sj = Source::of(state, j);
            jet.accumulate(&t, &sj, deriv, [0; DIM], 1.0);
            djet.accumulate(&t, &Source::of(delta, j), deriv, [0; DIM], 1.0);
            if i != j {
                for e in 0..DIM {
                    let dq = delta.q[i][e] - delta.q[j][e];
                    if dq != 0.0 {
                        djet.accumulate(&t, &sj, deriv, bump([0; DIM], e), dq);
                    }
                }
            }
        }
        (jet, djet)
    });

    let mut out = state.zeros_like();
    for (i, (jet, djet)) in rows.into_iter().enumerate() {
        let si = Source::of(state, i);
        let di = Source::of(delta, i);
        out.q[i] = djet.u;

        let mut dp = ZERO2;
        for (g, slot) in dp.iter_mut().enumerate() {
            let mut v = 0.0;
            for a in 0..DIM {
                v += di.p[a] * jet.du[a][g] + si.p[a] * djet.du[a][g];
                if k >= 1 {
                    for b in 0..DIM {
                        v += di.mu1[a][b] * jet.d2u[a][b][g] + si.mu1[a][b] * djet.d2u[a][b][g];
                    }
                }
                if k >= 2 {
                    for b in 0..DIM {
                        for d in 0..DIM {
                            v += di.mu2[a][b][d] * jet.d3u[a][b][d][g] + si.mu2[a][b][d] * djet.d3u[a][b][d][g];
                        }
                    }
                }
            }
            *slot = -v;
        }
        out.p[i] = dp;

        if k >= 1 {
            let (xi1, dxi1) = (jet.du, djet.du);
            let (xi2, dxi2) = if k >= 2 {
                (jet.d2u, djet.d2u)
            } else {
                (ZERO_TEN3, ZERO_TEN3)
            };
            let q1 = state.q1[i];
            let dq1 = delta.q1[i];
            let dq1_rate = q1_rate(&dxi1, &q1);
            let dq1_rate2 = q1_rate(&xi1, &dq1);
            for a in 0..DIM {
                for b in 0..DIM {
                    out.q1[i][a][b] = dq1_rate[a][b] + dq1_rate2[a][b];
                }
            }

            let mu2 = mu_or_zero(&state.mu2, i, ZERO_TEN3);
            let dmu2 = mu_or_zero(&delta.mu2, i, ZERO_TEN3);
            let r1 = mu1_rate(&delta.mu1[i], &dmu2, &xi1, &xi2);
            let r2 = mu1_rate(&state.mu1[i], &mu2, &dxi1, &dxi2);
            for a in 0..DIM {
                for b in 0..DIM {
                    out.mu1[i][a][b] = r1[a][b] + r2[a][b];
                }
            }

            if k >= 2 {
                let q2 = state.q2[i];
                let dq2 = delta.q2[i];
                let mut r = q2_rate(&dxi1, &dxi2, &q1, &q2);
                let r_q2 = q2_rate(&xi1, &ZERO_TEN3, &q1, &dq2);
                for a in 0..DIM {
                    for b in 0..DIM {
                        for c in 0..DIM {
                            let mut v = r_q2[a][b][c];
                            for d in 0..DIM {
                                for e in 0..DIM {
                                    v += xi2[a][d][e] * (dq1[d][b] * q1[e][c] + q1[d][b] * dq1[e][c]);
                                }
                            }
                            r[a][b][c] += v;
                        }
                    }
                }
                out.q2[i] = r;

                let m1 = mu2_rate(&dmu2, &xi1);
                let m2 = mu2_rate(&mu2, &dxi1);
                for a in 0..DIM {
                    for b in 0..DIM {
                        for c in 0..DIM {
                            out.mu2[i][a][b][c] = m1[a][b][c] + m2[a][b][c];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Covector on the velocity jet of one particle plus the covector that the
/// local maps send directly back onto that particle's own blocks.
struct LocalPullback {
    w: VelocityJet,
    q1: Mat2,
    q2: Ten3,
    p: Vec2,
    mu1: Mat2,
    mu2: Ten3,
}

fn local_pullback(state: &JetState, lam: &AdjointState, jet: &VelocityJet, i: usize) -> LocalPullback {
    let k = state.k();
    let si = Source::of(state, i);
    let mut w = VelocityJet::default();
    let mut out = LocalPullback {
        w: VelocityJet::default(),
        q1: ZERO_MAT,
        q2: ZERO_TEN3,
        p: ZERO2,
        mu1: ZERO_MAT,
        mu2: ZERO_TEN3,
    };

    // q_dot = u
    w.u = lam.q[i];

    // p_dot
    for g in 0..DIM {
        let lp = lam.p[i][g];
        for a in 0..DIM {
            w.du[a][g] -= lp * si.p[a];
            out.p[a] -= lp * jet.du[a][g];
            if k >= 1 {
                for b in 0..DIM {
                    w.d2u[a][b][g] -= lp * si.mu1[a][b];
                    out.mu1[a][b] -= lp * jet.d2u[a][b][g];
                }
            }
            if k >= 2 {
                for b in 0..DIM {
                    for d in 0..DIM {
                        w.d3u[a][b][d][g] -= lp * si.mu2[a][b][d];
                        out.mu2[a][b][d] -= lp * jet.d3u[a][b][d][g];
                    }
                }
            }
        }
    }

    if k >= 1 {
        let xi1 = jet.du;
        let q1 = state.q1[i];

        // q1_dot = xi1 q1
        let l1 = lam.q1[i];
        for a in 0..DIM {
            for g in 0..DIM {
                for b in 0..DIM {
                    w.du[a][g] += l1[a][b] * q1[g][b];
                    out.q1[g][b] += l1[a][b] * xi1[a][g];
                }
            }
        }

        // mu1_dot
        let lm = lam.mu1[i];
        let mu1 = si.mu1;
        for a in 0..DIM {
            for c in 0..DIM {
                let mut v = 0.0;
                let mut x = 0.0;
                for e in 0..DIM {
                    v += lm[a][e] * xi1[e][c] - lm[e][c] * xi1[a][e];
                    x += lm[e][a] * mu1[e][c] - lm[c][e] * mu1[a][e];
                }
                out.mu1[a][c] += v;
                w.du[a][c] += x;
            }
        }
        if k >= 2 {
            let xi2 = jet.d2u;
            let mu2 = si.mu2;
            for a in 0..DIM {
                for d in 0..DIM {
                    for g in 0..DIM {
                        let mut v = 0.0;
                        let mut x = 0.0;
                        for e in 0..DIM {
                            v += lm[a][e] * xi2[e][d][g] - lm[e][d] * xi2[a][e][g] - lm[e][g] * xi2[a][d][e];
                            x += lm[e][a] * mu2[e][d][g] - lm[d][e] * mu2[a][e][g] - lm[g][e] * mu2[a][d][e];
                        }
                        out.mu2[a][d][g] += v;
                        w.d2u[a][d][g] += x;
                    }
                }
            }

            // q2_dot = xi2 q1 q1 + xi1 q2
            let l2 = lam.q2[i];
            let q2 = state.q2[i];
            for a in 0..DIM {
                for b in 0..DIM {
                    for c in 0..DIM {
                        let l = l2[a][b][c];
                        if l == 0.0 {
                            continue;
                        }
                        for d in 0..DIM {
                            for e in 0..DIM {
                                w.d2u[a][d][e] += l * q1[d][b] * q1[e][c];
                                out.q1[d][b] += l * xi2[a][d][e] * q1[e][c];
                                out.q1[e][c] += l * xi2[a][d][e] * q1[d][b];
                            }
                            w.du[a][d] += l * q2[d][b][c];
                            out.q2[d][b][c] += l * xi1[a][d];
                        }
                    }
                }
            }

            // mu2_dot = sym(R(mu2, xi1))
            let mut ls = lam.mu2[i];
            symmetrize3(&mut ls);
            for a in 0..DIM {
                for d in 0..DIM {
                    for g in 0..DIM {
                        let mut v = 0.0;
                        for e in 0..DIM {
                            v += ls[a][e][g] * xi1[e][d] + ls[a][d][e] * xi1[e][g] - ls[e][d][g] * xi1[a][e];
                        }
                        out.mu2[a][d][g] += v;
                    }
                }
            }
            for b in 0..DIM {
                for d in 0..DIM {
                    let mut x = 0.0;
                    for a in 0..DIM {
                        for e in 0..DIM {
                            x += ls[a][b][e] * mu2[a][d][e] + ls[a][e][b] * mu2[a][e][d] - ls[d][a][e] * mu2[b][a][e];
                        }
                    }
                    w.du[b][d] += x;
                }
            }
        }
    }
    out.w = w;
    out
}

/// `sum_L W^L[a] D(L + shift)` over the jet orders `0..=deriv`.
fn contract_kernel(w: &VelocityJet, t: &PairTable, a: usize, shift: [usize; DIM], deriv: usize) -> f64 {
    let at = |c: [usize; DIM]| t.at(c[0], c[1]);
    let mut v = w.u[a] * at(shift);
    if deriv < 1 {
        return v;
    }
    for b in 0..DIM {
        let sb = bump(shift, b);
        v += w.du[a][b] * at(sb);
        if deriv < 2 {
            continue;
        }
        for c in 0..DIM {
            let sc = bump(sb, c);
            v += w.d2u[a][b][c] * at(sc);
            if deriv < 3 {
                continue;
            }
            for d in 0..DIM {
                v += w.d3u[a][b][c][d] * at(bump(sc, d));
            }
        }
    }
    v
}

/// `sum_L W^L[a] * (d_{L+shift} of the field of src)`.
fn contract_source(w: &VelocityJet, t: &PairTable, src: &Source, a: usize, shift: [usize; DIM], deriv: usize) -> f64 {
    let mut v = w.u[a] * source_component(t, src, a, shift);
    if deriv < 1 {
        return v;
    }
    for b in 0..DIM {
        let sb = bump(shift, b);
        v += w.du[a][b] * source_component(t, src, a, sb);
        if deriv < 2 {
            continue;
        }
        for c in 0..DIM {
            let sc = bump(sb, c);
            v += w.d2u[a][b][c] * source_component(t, src, a, sc);
            if deriv < 3 {
                continue;
            }
            for d in 0..DIM {
                v += w.d3u[a][b][c][d] * source_component(t, src, a, bump(sc, d));
            }
        }
    }
    v
}

/// Rate of the adjoint system, `lambda_dot = -M(state)^T lambda`, where `M` is
/// the linear map realised by [`tangent_apply`]. Symmetric blocks of the
/// result are symmetrised.
pub fn adjoint_apply(state: &JetState, lam: &AdjointState, spec: &KernelSpec) -> Result<AdjointState> {
    state.check_compatible(lam)?;
    let k = state.k();
    let n = state.len();
    let deriv = k as usize + 1;

    let jets = velocity_jets(state, spec, deriv);
    let locals: Vec<LocalPullback> = map_indices(n, |i| local_pullback(state, lam, &jets[i], i));

    // For each source j: covector on its momenta and the position forces g_ij.
    let columns = map_indices(n, |j| {
        let sj = Source::of(state, j);
        let mut p = ZERO2;
        let mut mu1 = ZERO_MAT;
        let mut mu2 = ZERO_TEN3;
        let mut g = vec![ZERO2; n];
        for (i, loc) in locals.iter().enumerate() {
            let t = pair_table(state, i, j, spec);
            for a in 0..DIM {
                p[a] += contract_kernel(&loc.w, &t, a, [0; DIM], deriv);
                if k >= 1 {
                    for c in 0..DIM {
                        mu1[a][c] -= contract_kernel(&loc.w, &t, a, bump([0; DIM], c), deriv);
                    }
                }
                if k >= 2 {
                    for c in 0..DIM {
                        for d in 0..DIM {
                            mu2[a][c][d] += contract_kernel(&loc.w, &t, a, bump(bump([0; DIM], c), d), deriv);
                        }
                    }
                }
            }
            if i != j {
                for e in 0..DIM {
                    let mut v = 0.0;
                    for a in 0..DIM {
                        v += contract_source(&loc.w, &t, &sj, a, bump([0; DIM], e), deriv);
                    }
                    g[i][e] = v;
                }
            }
        }
        (p, mu1, mu2, g)
    });

    let mut out = state.zeros_like();
    for (i, loc) in locals.iter().enumerate() {
        out.p[i] = loc.p;
        if k >= 1 {
            out.q1[i] = loc.q1;
            out.mu1[i] = loc.mu1;
        }
        if k >= 2 {
            out.q2[i] = loc.q2;
            out.mu2[i] = loc.mu2;
        }
    }
    for (j, (p, mu1, mu2, g)) in columns.into_iter().enumerate() {
        for a in 0..DIM {
            out.p[j][a] += p[a];
        }
        if k >= 1 {
            for a in 0..DIM {
                for c in 0..DIM {
                    out.mu1[j][a][c] += mu1[a][c];
                }
            }
        }
        if k >= 2 {
            for a in 0..DIM {
                for c in 0..DIM {
                    for d in 0..DIM {
                        out.mu2[j][a][c][d] += mu2[a][c][d];
                    }
                }
            }
        }
        for (i, gi) in g.iter().enumerate() {
            for e in 0..DIM {
                out.q[i][e] += gi[e];
                out.q[j][e] -= gi[e];
            }
        }
    }
    let mut out = out.scaled(-1.0);
    out.symmetrize();
    Ok(out)
}
