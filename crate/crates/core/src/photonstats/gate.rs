//! Post-selected linear-optical controlled-phase gate with partially
//! distinguishable photons.
//!
//! Dual-rail qubits: the control photon occupies `c0`/`c1`, the target
//! `t0`/`t1`. Rails `c1` and `t1` meet on a splitter of transmission 1/3;
//! `c0` and `t0` are attenuated to 1/3 by splitters dumping into vacuum
//! modes. Post-selecting one photon per qubit implements CZ with success
//! probability 1/9 when the photons are identical.

use crate::error::{Error, Result};
use crate::C64;

const C0: usize = 0;
const C1: usize = 1;
const T0: usize = 2;
const T1: usize = 3;
const SPATIAL: usize = 6;
/// Internal states: the control photon's mode and its orthogonal complement.
const MODES: usize = 2 * SPATIAL;

fn mode(spatial: usize, internal: usize) -> usize {
    spatial * 2 + internal
}

/// Single-photon transfer matrix `U[out][in]` over spatial modes.
fn spatial_unitary() -> [[f64; SPATIAL]; SPATIAL] {
    let t = (1.0f64 / 3.0).sqrt();
    let r = (2.0f64 / 3.0).sqrt();
    let mut u = [[0.0; SPATIAL]; SPATIAL];
    // (a, b) through a splitter [[√T, √R], [−√R, √T]]
    for (a, b) in [(C1, T1), (C0, 4), (T0, 5)] {
        u[a][a] = t;
        u[a][b] = r;
        u[b][a] = -r;
        u[b][b] = t;
    }
    u
}

fn propagate(u: &[[f64; SPATIAL]; SPATIAL], input: &[C64; MODES]) -> [C64; MODES] {
    let mut out = [C64::new(0.0, 0.0); MODES];
    for o in 0..SPATIAL {
        for i in 0..SPATIAL {
            if u[o][i] != 0.0 {
                for s in 0..2 {
                    out[mode(o, s)] += input[mode(i, s)] * u[o][i];
                }
            }
        }
    }
    out
}

/// Post-selected output amplitudes, indexed `[(c·2 + s_c)·4 + t·2 + s_t][input]`
/// with `c, t` the logical outputs and `s` the internal states.
fn postselected_map(overlap: f64) -> [[C64; 4]; 16] {
    let u = spatial_unitary();
    let mut v = [[C64::new(0.0, 0.0); 4]; 16];
    for ci in 0..2 {
        for ti in 0..2 {
            let mut control = [C64::new(0.0, 0.0); MODES];
            control[mode([C0, C1][ci], 0)] = C64::new(1.0, 0.0);
            let mut target = [C64::new(0.0, 0.0); MODES];
            target[mode([T0, T1][ti], 0)] = C64::new(overlap.sqrt(), 0.0);
            target[mode([T0, T1][ti], 1)] = C64::new((1.0 - overlap).sqrt(), 0.0);
            let x = propagate(&u, &control);
            let y = propagate(&u, &target);
            for co in 0..2 {
                for sc in 0..2 {
                    for to in 0..2 {
                        for st in 0..2 {
                            let a = mode([C0, C1][co], sc);
                            let b = mode([T0, T1][to], st);
                            // ⟨0|a_a a_b a†_x a†_y|0⟩ for a ≠ b
                            let amp = x[a] * y[b] + x[b] * y[a];
                            v[(co * 2 + sc) * 4 + to * 2 + st][ci * 2 + ti] = amp;
                        }
                    }
                }
            }
        }
    }
    v
}

/// Process fidelity of the post-selected gate with CZ for photons whose
/// two-photon interference visibility (`|⟨ψ_c|ψ_t⟩|²`) is `overlap`.
///
/// The post-selected channel is built by tracing the internal degree of
/// freedom out of the linear-optics output; its Choi matrix is normalized
/// to unit trace and projected on the maximally entangled state of CZ.
pub fn cz_process_fidelity(overlap: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::invalid("overlap", "must lie in [0, 1]"));
    }
    let v = postselected_map(overlap);
    // choi[(in, out), (in', out')] = Σ_internal V[(out, s), in]·conj(V[(out', s), in'])
    let mut choi = [[C64::new(0.0, 0.0); 16]; 16];
    for input in 0..4 {
        for input2 in 0..4 {
            for c in 0..2 {
                for t in 0..2 {
                    for c2 in 0..2 {
                        for t2 in 0..2 {
                            let mut acc = C64::new(0.0, 0.0);
                            for sc in 0..2 {
                                for st in 0..2 {
                                    acc += v[(c * 2 + sc) * 4 + t * 2 + st][input]
                                        * v[(c2 * 2 + sc) * 4 + t2 * 2 + st][input2].conj();
                                }
                            }
                            choi[input * 4 + c * 2 + t][input2 * 4 + c2 * 2 + t2] = acc;
                        }
                    }
                }
            }
        }
    }
    let trace: f64 = (0..16).map(|i| choi[i][i].re).sum();
    let ideal = [1.0, 1.0, 1.0, -1.0];
    let mut f = C64::new(0.0, 0.0);
    for a in 0..4 {
        for b in 0..4 {
            f += choi[a * 4 + a][b * 4 + b] * (ideal[a] * ideal[b]);
        }
    }
    Ok((f.re / (4.0 * trace)).clamp(0.0, 1.0))
}

/// `(1 + M)/(4 − 2M)`, the closed form of [`cz_process_fidelity`].
pub fn cz_process_fidelity_closed_form(overlap: f64) -> f64 {
    (1.0 + overlap) / (4.0 - 2.0 * overlap)
}
