use std::io::Write;

use serde::Serialize;

use super::density::DensityMatrix;
use super::dressed::{adiabaticity_series, dressed_frame};
use super::hamiltonian::{build_hamiltonian, Generator, NodeOps, Real2};
use super::integrator::Stepper;
use super::SystemParams;
use crate::error::{Error, Result};
use crate::pulse::{trapezoid, SampledField};
use crate::C64;

/// Default per-step local error tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Density-matrix time series sampled on the field grid.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub rho: Vec<DensityMatrix>,
    pub omega: Vec<f64>,
    pub delta: Vec<f64>,
    pub radiative_rate: f64,
}

/// Worst-case invariant deviations over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hygiene {
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    /// `max |1 − tr ρ²|`; only meaningful for closed evolution.
    pub max_purity_defect: f64,
}

impl Hygiene {
    pub fn merge(self, other: Hygiene) -> Hygiene {
        Hygiene {
            max_trace_error: self.max_trace_error.max(other.max_trace_error),
            max_hermiticity_error: self.max_hermiticity_error.max(other.max_hermiticity_error),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
            max_purity_defect: self.max_purity_defect.max(other.max_purity_defect),
        }
    }
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t0 + k as f64 * self.dt).collect()
    }

    pub fn p_e(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r.p_e()).collect()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.rho.last().expect("trajectory is never empty")
    }

    pub fn final_pe(&self) -> f64 {
        self.final_state().p_e()
    }

    /// Expected photons per pulse: `Γ∫P_e dt` over the grid plus the
    /// population still excited at the end, which decays radiatively once
    /// the drive is over.
    ///
    /// Equals `P_e(end)` when `Γ = 0`. This is the quantity behind the
    /// fluorescence count rate and does not depend on how far the grid
    /// extends past the pulse.
    pub fn photon_yield(&self) -> f64 {
        self.final_pe() + self.radiative_rate * trapezoid(self.p_e(), self.dt)
    }

    /// Populations of the instantaneous dressed states, `(P₊, P₋)`.
    pub fn dressed_populations(&self) -> (Vec<f64>, Vec<f64>) {
        self.rho
            .iter()
            .zip(self.omega.iter().zip(&self.delta))
            .map(|(r, (&o, &d))| {
                let f = dressed_frame(o, d);
                (r.population_of(f.plus), r.population_of(f.minus))
            })
            .unzip()
    }

    pub fn adiabaticity(&self) -> Vec<f64> {
        adiabaticity_series(&self.omega, &self.delta, self.dt)
    }

    pub fn hygiene(&self) -> Hygiene {
        let mut h = Hygiene {
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_purity_defect: 0.0,
        };
        for r in &self.rho {
            h.max_trace_error = h.max_trace_error.max((r.trace() - 1.0).norm());
            h.max_hermiticity_error = h.max_hermiticity_error.max(r.hermiticity_error());
            h.min_eigenvalue = h.min_eigenvalue.min(r.min_eigenvalue());
            h.max_purity_defect = h.max_purity_defect.max((1.0 - r.purity()).abs());
        }
        h
    }

    /// `t_ps,p_e,p_g,re_coh,im_coh,p_plus,p_minus,adiabaticity`; the
    /// coherence column is `⟨e|ρ|g⟩`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_ps,p_e,p_g,re_coh,im_coh,p_plus,p_minus,adiabaticity")?;
        let (plus, minus) = self.dressed_populations();
        let adiabatic = self.adiabaticity();
        for (k, r) in self.rho.iter().enumerate() {
            let c = r.coherence();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.t0 + k as f64 * self.dt,
                r.p_e(),
                r.p_g(),
                c.re,
                c.im,
                plus[k],
                minus[k],
                adiabatic[k]
            )?;
        }
        Ok(())
    }
}

#[inline]
fn commutator_term(h: &Real2, r: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    // −i[H, ρ]
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let hr = h[i][0] * r[0][j] + h[i][1] * r[1][j];
            let rh = r[i][0] * h[0][j] + r[i][1] * h[1][j];
            let c = hr - rh;
            out[i][j] = C64::new(c.im, -c.re);
        }
    }
    out
}

#[inline]
fn add_dissipator(l: &Real2, r: &[[C64; 2]; 2], out: &mut [[C64; 2]; 2]) {
    // LρLᵀ − ½{LᵀL, ρ} for real L
    let mut ltl = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            ltl[i][j] = l[0][i] * l[0][j] + l[1][i] * l[1][j];
        }
    }
    if ltl[0][0] == 0.0 && ltl[1][1] == 0.0 {
        return;
    }
    let mut lr = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            lr[i][j] = l[i][0] * r[0][j] + l[i][1] * r[1][j];
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            let jump = lr[i][0] * l[j][0] + lr[i][1] * l[j][1];
            let anti = (r[i][0] * ltl[0][j] + r[i][1] * ltl[1][j])
                + (r[0][j] * ltl[i][0] + r[1][j] * ltl[i][1]);
            out[i][j] += jump - anti * 0.5;
        }
    }
}

/// Right-hand side of the Lindblad equation with operators `ops`.
#[inline]
pub(crate) fn lindblad_rhs(ops: &NodeOps, radiative: f64, dephasing: f64, y: &[C64; 4]) -> [C64; 4] {
    let r = [[y[0], y[1]], [y[2], y[3]]];
    let mut out = commutator_term(&ops.h, &r);
    if radiative != 0.0 {
        out[0][0] += r[1][1] * radiative;
        out[1][1] -= r[1][1] * radiative;
        out[0][1] -= r[0][1] * (0.5 * radiative);
        out[1][0] -= r[1][0] * (0.5 * radiative);
    }
    if dephasing != 0.0 {
        out[0][1] -= r[0][1] * dephasing;
        out[1][0] -= r[1][0] * dephasing;
    }
    add_dissipator(&ops.l_down, &r, &mut out);
    add_dissipator(&ops.l_up, &r, &mut out);
    [out[0][0], out[0][1], out[1][0], out[1][1]]
}

/// Integrate the master equation
/// `dρ/dt = −i[H,ρ] + Γ·D[|g⟩⟨e|]ρ + (γ*/2)·D[σ_z]ρ + γ_↓·D[|−⟩⟨+|]ρ + γ_↑·D[|+⟩⟨−|]ρ`
/// across the field grid.
///
/// Each grid interval is integrated with adaptive Dormand–Prince steps at
/// local tolerance `tol`, so the state lands exactly on every sample.
pub fn evolve(field: &SampledField, params: &SystemParams, tol: f64) -> Result<StateTrajectory> {
    params.validate()?;
    if !(tol > 0.0 && tol < 1e-2) {
        return Err(Error::invalid("tolerance", format!("must be in (0, 1e-2), got {tol}")));
    }
    let ham = build_hamiltonian(field)?;
    let gen = Generator::new(&ham, params);
    let initial = params.initial()?;

    let rho = if params.is_closed() && 1.0 - initial.purity() < 1e-12 {
        evolve_pure(&gen, &initial, tol)?
    } else {
        evolve_mixed(&gen, &initial, tol)?
    };
    Ok(StateTrajectory {
        t0: ham.t0,
        dt: ham.dt,
        rho,
        omega: ham.omega,
        delta: ham.delta,
        radiative_rate: params.radiative_rate_per_ps,
    })
}

fn evolve_mixed(gen: &Generator, initial: &DensityMatrix, tol: f64) -> Result<Vec<DensityMatrix>> {
    let guard = (10.0 * tol).max(1e-12);
    let mut rho = Vec::with_capacity(gen.len());
    rho.push(*initial);
    let mut y = initial.flat();
    let mut stepper = Stepper::new(tol, gen.dt);
    for k in 0..gen.len() - 1 {
        let (t_a, t_b) = (gen.time(k), gen.time(k + 1));
        stepper.advance(
            |t, y| lindblad_rhs(&gen.ops_in(k, t), gen.radiative, gen.dephasing, y),
            t_a,
            t_b,
            &mut y,
        )?;
        let state = DensityMatrix::from_flat(&y);
        if let Err(Error::InvariantViolation { what, value, .. }) = state.validate(guard) {
            return Err(Error::InvariantViolation { t_ps: t_b, what, value });
        }
        rho.push(state);
    }
    Ok(rho)
}

/// Unitary evolution of a pure state. The state vector is integrated
/// instead of ρ and renormalized at every sample, so the stored states are
/// pure to rounding; a Runge–Kutta step on ρ only conserves the trace.
fn evolve_pure(gen: &Generator, initial: &DensityMatrix, tol: f64) -> Result<Vec<DensityMatrix>> {
    let mut rho = Vec::with_capacity(gen.len());
    rho.push(*initial);
    let mut psi = initial.state_vector();
    let mut stepper = Stepper::new(tol, gen.dt);
    for k in 0..gen.len() - 1 {
        stepper.advance(
            |t, y: &[C64; 2]| {
                let h = gen.ops_in(k, t).h;
                // −iHψ
                let a = y[0] * h[0][0] + y[1] * h[0][1];
                let b = y[0] * h[1][0] + y[1] * h[1][1];
                [C64::new(a.im, -a.re), C64::new(b.im, -b.re)]
            },
            gen.time(k),
            gen.time(k + 1),
            &mut psi,
        )?;
        let norm = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
        psi = [psi[0] / norm, psi[1] / norm];
        rho.push(DensityMatrix::from_state_vector(psi));
    }
    Ok(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::PhononParams;
    use crate::pulse::PulseSpec;
    use std::f64::consts::PI;

    #[test]
    fn pulse_area_theorem() {
        for area in [0.5, 1.0, 2.0, 3.0] {
            let field = PulseSpec::sech(3.0, area).synthesize().unwrap();
            let traj = evolve(&field, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap();
            let expect = (area * PI / 2.0).sin().powi(2);
            assert!((traj.final_pe() - expect).abs() < 1e-4, "{area}: {}", traj.final_pe());
            let h = traj.hygiene();
            assert!(h.max_purity_defect < 1e-8, "{h:?}");
        }
    }

    #[test]
    fn closed_chirped_evolution_stays_pure_and_matches_density_path() {
        for gdd in [-64.0, 64.0] {
            let field = PulseSpec::sech(3.0, 3.0).with_gdd(gdd).synthesize().unwrap();
            let traj = evolve(&field, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap();
            assert!(traj.hygiene().max_purity_defect < 1e-12, "{:?}", traj.hygiene());
            let gen = Generator::new(&build_hamiltonian(&field).unwrap(), &SystemParams::closed());
            let mixed = evolve_mixed(&gen, &DensityMatrix::ground(), DEFAULT_TOLERANCE).unwrap();
            for (a, b) in traj.rho.iter().zip(&mixed) {
                assert!((a.p_e() - b.p_e()).abs() < 1e-5);
                assert!((a.coherence() - b.coherence()).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn gaussian_area_theorem() {
        let field = PulseSpec::gaussian(2.0, 1.0).synthesize().unwrap();
        let traj = evolve(&field, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap();
        assert!((traj.final_pe() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn free_radiative_decay() {
        let field = PulseSpec::sech(3.0, 0.0).synthesize().unwrap();
        let mut params = SystemParams::closed().with_radiative_rate(0.01);
        params.initial_state.p_e = 1.0;
        let traj = evolve(&field, &params, 1e-10).unwrap();
        let span = traj.dt * (traj.len() - 1) as f64;
        assert!((traj.final_pe() - (-0.01 * span).exp()).abs() < 1e-8);
        // everything emitted or still to be emitted
        assert!((traj.photon_yield() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn dephasing_kills_coherence() {
        let field = PulseSpec::sech(3.0, 0.0).synthesize().unwrap();
        let mut params = SystemParams::closed();
        params.pure_dephasing_per_ps = 0.05;
        params.initial_state = crate::dynamics::InitialState { p_e: 0.5, coherence: [0.5, 0.0] };
        let traj = evolve(&field, &params, 1e-10).unwrap();
        let span = traj.dt * (traj.len() - 1) as f64;
        let c = traj.final_state().coherence().norm();
        assert!((c - 0.5 * (-0.05 * span).exp()).abs() < 1e-8);
        assert!((traj.final_pe() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn detuning_sign_symmetry_when_closed() {
        let pos = PulseSpec::sech(3.0, 1.7).with_gdd(20.0).synthesize().unwrap();
        let neg = PulseSpec::sech(3.0, 1.7).with_gdd(-20.0).synthesize().unwrap();
        let a = evolve(&pos, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap();
        let b = evolve(&neg, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap();
        assert!((a.final_pe() - b.final_pe()).abs() < 1e-5);
    }

    #[test]
    fn rap_follows_lower_dressed_state() {
        let field = PulseSpec::sech(3.0, 2.5).with_gdd(32.0).synthesize().unwrap();
        let traj = evolve(&field, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap();
        let (_, minus) = traj.dressed_populations();
        assert!(minus[0] > 0.999);
        assert!(minus[traj.len() / 2] > 0.99);
        assert!(traj.final_pe() > 0.99);
    }

    #[test]
    fn positive_chirp_beats_negative_with_phonons() {
        let params = SystemParams::quantum_dot();
        let pos = PulseSpec::sech(3.0, 2.0).with_gdd(32.0).synthesize().unwrap();
        let neg = PulseSpec::sech(3.0, 2.0).with_gdd(-32.0).synthesize().unwrap();
        let a = evolve(&pos, &params, DEFAULT_TOLERANCE).unwrap().photon_yield();
        let b = evolve(&neg, &params, DEFAULT_TOLERANCE).unwrap().photon_yield();
        assert!(a >= 0.9, "{a}");
        assert!(a > b, "{a} vs {b}");
    }

    #[test]
    fn tolerance_halving_converges() {
        let field = PulseSpec::sech(3.0, 2.0).with_gdd(-32.0).synthesize().unwrap();
        let params = SystemParams::quantum_dot();
        let a = evolve(&field, &params, DEFAULT_TOLERANCE).unwrap().photon_yield();
        let b = evolve(&field, &params, DEFAULT_TOLERANCE / 2.0).unwrap().photon_yield();
        assert!((a - b).abs() < DEFAULT_TOLERANCE * 10.0, "{a} {b}");
    }

    #[test]
    fn cold_bath_only_hurts_negative_chirp() {
        let cold = PhononParams { temperature_k: 0.0, ..PhononParams::QUANTUM_DOT_4K };
        let params = SystemParams::closed().with_phonons(cold);
        let pos = PulseSpec::sech(3.0, 3.0).with_gdd(32.0).synthesize().unwrap();
        let a = evolve(&pos, &params, DEFAULT_TOLERANCE).unwrap().final_pe();
        let closed = evolve(&pos, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap().final_pe();
        assert!((a - closed).abs() < 1e-3, "{a} vs {closed}");
    }

    #[test]
    fn rejects_bad_tolerance() {
        let field = PulseSpec::sech(3.0, 1.0).synthesize().unwrap();
        assert!(evolve(&field, &SystemParams::closed(), 0.0).is_err());
    }

    #[test]
    fn csv_columns() {
        let field = PulseSpec::sech(3.0, 1.0).with_gdd(10.0).synthesize().unwrap();
        let traj = evolve(&field, &SystemParams::quantum_dot(), DEFAULT_TOLERANCE).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t_ps,p_e,p_g,re_coh,im_coh,p_plus,p_minus,adiabaticity");
        assert_eq!(lines.next().unwrap().split(',').count(), 8);
    }
}
