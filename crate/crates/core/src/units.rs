//! Physical constants and unit conversions.
//!
//! Internally time is in picoseconds and angular frequency in rad/ps.
//! Linewidths and spectra use ordinary frequency in GHz; photon-counting
//! quantities use nanoseconds.

use std::f64::consts::TAU;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light, mm/ps.
pub const C_MM_PER_PS: f64 = 0.299_792_458;

/// Thermal energy k_B·T/ħ in rad/ps.
pub fn thermal_frequency(temperature_k: f64) -> f64 {
    K_B * temperature_k / HBAR * 1e-12
}

/// Ordinary frequency in GHz to angular frequency in rad/ps.
pub fn ghz_to_radps(nu_ghz: f64) -> f64 {
    nu_ghz * TAU / 1e3
}

pub fn radps_to_ghz(omega: f64) -> f64 {
    omega * 1e3 / TAU
}

/// Radiative rate (1/ps) of a transition whose lifetime-limited FWHM is
/// `linewidth_ghz`.
pub fn rate_from_linewidth_ghz(linewidth_ghz: f64) -> f64 {
    ghz_to_radps(linewidth_ghz)
}

/// Repetition period in ns for a repetition rate in MHz.
pub fn period_ns_from_mhz(rate_mhz: f64) -> f64 {
    1e3 / rate_mhz
}
