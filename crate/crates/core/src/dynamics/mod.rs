//! Driven, dissipative two-level dynamics.
//!
//! The rotating-frame Hamiltonian is
//! `H(t) = −Δ(t)|e⟩⟨e| + (Ω(t)/2)(|e⟩⟨g| + |g⟩⟨e|)` with `ħ = 1`. Besides
//! radiative decay and pure dephasing, acoustic phonons relax the system
//! between the instantaneous dressed states `|±⟩`: emission drives
//! `|+⟩ → |−⟩`, absorption drives `|−⟩ → |+⟩`.

mod density;
mod dressed;
mod hamiltonian;
mod integrator;
mod jump;
mod master;
mod phonon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

pub use density::DensityMatrix;
pub use dressed::{adiabaticity_parameter, adiabaticity_series, dressed_frame, DressedFrame};
pub use hamiltonian::{build_hamiltonian, Hamiltonian};
pub use jump::{jump_trajectory, photons_per_pulse, Emission, JumpOptions};
pub use master::{evolve, Hygiene, StateTrajectory, DEFAULT_TOLERANCE};
pub use phonon::{bose_occupation, dressed_relaxation_rates, phonon_spectral_density};

/// Acoustic-phonon bath with spectral density `J(ω) = α·ω³·exp(−(ω/ω_c)²)`.
///
/// `alpha_ps2` is in ps² so that `J` comes out in 1/ps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhononParams {
    pub alpha_ps2: f64,
    pub cutoff_radps: f64,
    pub temperature_k: f64,
}

impl PhononParams {
    /// InGaAs quantum dot at liquid-helium temperature.
    pub const QUANTUM_DOT_4K: PhononParams = PhononParams {
        alpha_ps2: 0.022,
        cutoff_radps: 2.0,
        temperature_k: 4.2,
    };

    pub fn off() -> Self {
        PhononParams {
            alpha_ps2: 0.0,
            cutoff_radps: 1.0,
            temperature_k: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_ps2 >= 0.0 && self.alpha_ps2.is_finite()) {
            return Err(Error::invalid("phonon.alpha_ps2", "must be non-negative"));
        }
        if !(self.cutoff_radps > 0.0 && self.cutoff_radps.is_finite()) {
            return Err(Error::invalid("phonon.cutoff_radps", "must be positive"));
        }
        if !(self.temperature_k >= 0.0 && self.temperature_k.is_finite()) {
            return Err(Error::invalid("phonon.temperature_k", "must be non-negative"));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.alpha_ps2 > 0.0
    }
}

/// Initial state as populations and the `⟨e|ρ|g⟩` coherence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub p_e: f64,
    #[serde(default)]
    pub coherence: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Γ, inverse excited-state lifetime, 1/ps.
    pub radiative_rate_per_ps: f64,
    /// γ*, 1/ps. Coherences decay at this rate on top of Γ/2.
    #[serde(default)]
    pub pure_dephasing_per_ps: f64,
    pub phonon: PhononParams,
    #[serde(default)]
    pub initial_state: InitialState,
}

impl SystemParams {
    /// Lifetime-limited quantum dot (0.39 GHz linewidth) with the 4.2 K
    /// phonon bath.
    pub fn quantum_dot() -> Self {
        SystemParams {
            radiative_rate_per_ps: units::rate_from_linewidth_ghz(0.39),
            pure_dephasing_per_ps: 0.0,
            phonon: PhononParams::QUANTUM_DOT_4K,
            initial_state: InitialState::default(),
        }
    }

    /// No dissipation at all: unitary evolution.
    pub fn closed() -> Self {
        SystemParams {
            radiative_rate_per_ps: 0.0,
            pure_dephasing_per_ps: 0.0,
            phonon: PhononParams::off(),
            initial_state: InitialState::default(),
        }
    }

    pub fn with_phonons(mut self, phonon: PhononParams) -> Self {
        self.phonon = phonon;
        self
    }

    pub fn with_radiative_rate(mut self, rate: f64) -> Self {
        self.radiative_rate_per_ps = rate;
        self
    }

    pub fn is_closed(&self) -> bool {
        self.radiative_rate_per_ps == 0.0
            && self.pure_dephasing_per_ps == 0.0
            && !self.phonon.is_active()
    }

    pub fn initial(&self) -> Result<DensityMatrix> {
        let s = self.initial_state;
        let rho = DensityMatrix::from_parts(1.0 - s.p_e, s.p_e, crate::C64::new(s.coherence[0], s.coherence[1]));
        rho.validate(1e-9).map_err(|e| match e {
            Error::InvariantViolation { what, value, .. } => Error::invalid(
                "initial_state",
                format!("not a density matrix ({what} = {value:.3e})"),
            ),
            other => other,
        })?;
        Ok(rho)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radiative_rate_per_ps >= 0.0 && self.radiative_rate_per_ps.is_finite()) {
            return Err(Error::invalid("radiative_rate_per_ps", "must be non-negative"));
        }
        if !(self.pure_dephasing_per_ps >= 0.0 && self.pure_dephasing_per_ps.is_finite()) {
            return Err(Error::invalid("pure_dephasing_per_ps", "must be non-negative"));
        }
        self.phonon.validate()?;
        self.initial()?;
        Ok(())
    }
}
