//! Simulation and analysis of chirped-pulse rapid adiabatic passage in a
//! quantum-dot two-level system.
//!
//! The crate follows the measurement chain of a resonance-fluorescence
//! single-photon source:
//!
//! - [`pulse`]: transform-limited pulses, grating-pair chirp, instantaneous
//!   detuning and pulse area.
//! - [`dynamics`]: Lindblad evolution with radiative decay, pure dephasing
//!   and phonon-assisted relaxation between dressed states, plus
//!   quantum-jump unravelling.
//! - [`photonstats`]: HBT and HOM coincidence histograms, g²(0), visibility
//!   correction and the controlled-phase gate fidelity.
//! - [`spectra`]: Voigt lineshapes and their least-squares fit.
//! - [`sweep`]: power scans, chirp × area maps and modulation traces.
//! - [`cli`]: JSON-configured command-line runner.

// `!(x > 0.0)` is how inputs reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod photonstats;
pub mod pulse;
pub mod rng;
pub mod spectra;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
