//! Quantum-jump unravelling of the master equation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{build_hamiltonian, Generator, NodeOps, Real2};
use super::integrator::Stepper;
use super::master::DEFAULT_TOLERANCE;
use super::SystemParams;
use crate::error::{Error, Result};
use crate::pulse::SampledField;
use crate::rng::StreamFactory;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpOptions {
    pub n_pulses: usize,
    pub seed: u64,
    /// Spacing between consecutive pulses, ps. Only used to place emission
    /// times on a common axis.
    #[serde(default = "default_rep_period")]
    pub rep_period_ps: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_rep_period() -> f64 {
    1e6 / 82.0
}

fn default_tol() -> f64 {
    DEFAULT_TOLERANCE
}

impl JumpOptions {
    pub fn new(n_pulses: usize, seed: u64) -> Self {
        JumpOptions {
            n_pulses,
            seed,
            rep_period_ps: default_rep_period(),
            tol: default_tol(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rep_period_ps > 0.0 && self.rep_period_ps.is_finite()) {
            return Err(Error::invalid("rep_period_ps", "must be positive"));
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(Error::invalid("tolerance", format!("must be in (0, 1e-2), got {}", self.tol)));
        }
        Ok(())
    }
}

/// A radiative jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Emission {
    pub pulse: usize,
    /// `pulse·rep_period + t`, with `t` on the field's own time axis.
    pub time_ps: f64,
}

type Ket = [C64; 2];

fn apply(m: &Real2, v: &Ket) -> Ket {
    [v[0] * m[0][0] + v[1] * m[0][1], v[0] * m[1][0] + v[1] * m[1][1]]
}

fn norm_sqr(v: &Ket) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

/// `dψ/dt = −i·H_eff·ψ`, `H_eff = H − (i/2)·Σ L†L`.
fn effective_rhs(ops: &NodeOps, radiative: f64, dephasing: f64, v: &Ket) -> Ket {
    let hv = apply(&ops.h, v);
    let mut loss = [C64::new(0.0, 0.0); 2];
    for l in [&ops.l_down, &ops.l_up] {
        let lv = apply(l, v);
        let ltlv = [lv[0] * l[0][0] + lv[1] * l[1][0], lv[0] * l[0][1] + lv[1] * l[1][1]];
        loss[0] += ltlv[0];
        loss[1] += ltlv[1];
    }
    // Γ|e⟩⟨e| and (γ*/2)·σ_z² = γ*/2
    loss[1] += v[1] * radiative;
    loss[0] += v[0] * (0.5 * dephasing);
    loss[1] += v[1] * (0.5 * dephasing);
    [
        C64::new(hv[0].im, -hv[0].re) - loss[0] * 0.5,
        C64::new(hv[1].im, -hv[1].re) - loss[1] * 0.5,
    ]
}

enum Channel {
    Radiative,
    Dephasing,
    Phonon,
}

fn pick_channel(ops: &NodeOps, radiative: f64, dephasing: f64, v: &Ket, u: f64) -> (Channel, Ket) {
    let s = (0.5 * dephasing).sqrt();
    let candidates = [
        (Channel::Radiative, [C64::new(0.0, 0.0), v[1] * radiative.sqrt()]),
        (Channel::Dephasing, [v[0] * s, -v[1] * s]),
        (Channel::Phonon, apply(&ops.l_down, v)),
        (Channel::Phonon, apply(&ops.l_up, v)),
    ];
    // state after a radiative jump is |g⟩
    let total: f64 = candidates.iter().map(|(_, w)| norm_sqr(w)).sum();
    let mut acc = 0.0;
    let target = u * total;
    let mut last = None;
    for (ch, w) in candidates {
        let p = norm_sqr(&w);
        if p == 0.0 {
            continue;
        }
        acc += p;
        if acc >= target {
            return (ch, w);
        }
        last = Some((ch, w));
    }
    last.unwrap_or((Channel::Radiative, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]))
}

fn normalize(v: &mut Ket) {
    let n = norm_sqr(v).sqrt();
    v[0] /= n;
    v[1] /= n;
}

/// Draw a pure initial state from the eigen-decomposition of `ρ(0)`.
fn initial_ket(params: &SystemParams, rng: &mut ChaCha8Rng) -> Result<Ket> {
    let rho = params.initial()?;
    let [lo, hi] = rho.eigenvalues();
    let lambda = if rng.random::<f64>() < hi { hi } else { lo };
    let a = rho.0[0][0].re;
    let b = rho.0[0][1];
    let mut v = if b.norm() > 1e-15 {
        [b, C64::new(lambda - a, 0.0)]
    } else if (lambda - a).abs() <= (lambda - rho.0[1][1].re).abs() {
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
    } else {
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]
    };
    normalize(&mut v);
    Ok(v)
}

type Propagator = [[C64; 2]; 2];

/// No-jump propagators `exp(−i∫H_eff)` for every grid interval.
fn interval_propagators(gen: &Generator, tol: f64) -> Result<Vec<Propagator>> {
    let mut stepper = Stepper::new(tol, gen.dt);
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    (0..gen.len() - 1)
        .map(|k| {
            // both columns at once: (u00, u10, u01, u11)
            let mut y = [one, zero, zero, one];
            stepper.advance(
                |t, y: &[C64; 4]| {
                    let ops = gen.ops_in(k, t);
                    let a = effective_rhs(&ops, gen.radiative, gen.dephasing, &[y[0], y[1]]);
                    let b = effective_rhs(&ops, gen.radiative, gen.dephasing, &[y[2], y[3]]);
                    [a[0], a[1], b[0], b[1]]
                },
                gen.time(k),
                gen.time(k + 1),
                &mut y,
            )?;
            Ok([[y[0], y[2]], [y[1], y[3]]])
        })
        .collect()
}

fn propagate(u: &Propagator, v: &Ket) -> Ket {
    [u[0][0] * v[0] + u[0][1] * v[1], u[1][0] * v[0] + u[1][1] * v[1]]
}

fn run_one(
    gen: &Generator,
    props: &[Propagator],
    params: &SystemParams,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut emissions = Vec::new();
    let mut psi = initial_ket(params, rng)?;
    let mut threshold: f64 = rng.random();
    let rhs = |k: usize| move |t: f64, v: &Ket| effective_rhs(&gen.ops_in(k, t), gen.radiative, gen.dephasing, v);

    for k in 0..gen.len() - 1 {
        let mut t_a = gen.time(k);
        let t_b = gen.time(k + 1);
        let mut partial = false;
        loop {
            let start = psi;
            if partial {
                Stepper::new(tol, gen.dt).advance(rhs(k), t_a, t_b, &mut psi)?;
            } else {
                psi = propagate(&props[k], &psi);
            }
            let (n_a, n_b) = (norm_sqr(&start), norm_sqr(&psi));
            if n_b > threshold {
                break;
            }
            // norm crossed the threshold inside [t_a, t_b]
            let s = if n_a > n_b { ((n_a - threshold) / (n_a - n_b)).clamp(0.0, 1.0) } else { 1.0 };
            let t_jump = t_a + s * (t_b - t_a);
            psi = start;
            if t_jump > t_a {
                Stepper::new(tol, gen.dt).advance(rhs(k), t_a, t_jump, &mut psi)?;
            }
            normalize(&mut psi);
            let ops = gen.ops_in(k, t_jump);
            let (channel, mut next) = pick_channel(&ops, gen.radiative, gen.dephasing, &psi, rng.random());
            match channel {
                Channel::Radiative => {
                    emissions.push(t_jump);
                    next = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
                }
                Channel::Dephasing | Channel::Phonon => normalize(&mut next),
            }
            psi = next;
            threshold = rng.random();
            t_a = t_jump;
            partial = true;
            if t_a >= t_b {
                break;
            }
        }
        // keep the unnormalized norm away from underflow on long grids
        let n = norm_sqr(&psi);
        if n < 1e-200 {
            return Err(Error::InvariantViolation { t_ps: t_b, what: "no-jump norm", value: n });
        }
    }

    // the drive is over: whatever is left in |e⟩ decays radiatively
    let p_e = psi[1].norm_sqr() / norm_sqr(&psi);
    if gen.radiative > 0.0 && rng.random::<f64>() < p_e {
        let delay: f64 = Exp::new(gen.radiative).expect("positive rate").sample(rng);
        emissions.push(gen.time(gen.len() - 1) + delay);
    }
    Ok(emissions)
}

/// Simulate `opts.n_pulses` independent excitation cycles and return every
/// radiative emission in pulse order.
///
/// Each pulse starts from the configured initial state and draws from its
/// own random stream, so results are independent of the thread count.
pub fn jump_trajectory(field: &SampledField, params: &SystemParams, opts: &JumpOptions) -> Result<Vec<Emission>> {
    params.validate()?;
    opts.validate()?;
    let ham = build_hamiltonian(field)?;
    let gen = Generator::new(&ham, params);
    let props = interval_propagators(&gen, opts.tol)?;
    let streams = StreamFactory::new(opts.seed);
    let per_pulse: Vec<Vec<f64>> = (0..opts.n_pulses)
        .into_par_iter()
        .map(|i| run_one(&gen, &props, params, opts.tol, &mut streams.stream(i as u64)))
        .collect::<Result<_>>()?;
    Ok(per_pulse
        .into_iter()
        .enumerate()
        .flat_map(|(pulse, times)| {
            times.into_iter().map(move |t| Emission {
                pulse,
                time_ps: pulse as f64 * opts.rep_period_ps + t,
            })
        })
        .collect())
}

/// Number of photons emitted after each pulse.
pub fn photons_per_pulse(field: &SampledField, params: &SystemParams, opts: &JumpOptions) -> Result<Vec<u32>> {
    let mut counts = vec![0u32; opts.n_pulses];
    for e in jump_trajectory(field, params, opts)? {
        counts[e.pulse] += 1;
    }
    Ok(counts)
}
