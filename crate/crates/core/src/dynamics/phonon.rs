use std::f64::consts::FRAC_PI_2;

use super::PhononParams;
use crate::error::{Error, Result};
use crate::units::thermal_frequency;

/// `J(ω) = α·ω³·exp(−(ω/ω_c)²)`, 1/ps.
pub fn phonon_spectral_density(omega: f64, p: &PhononParams) -> Result<f64> {
    if omega < 0.0 || omega.is_nan() {
        return Err(Error::invalid("omega", format!("spectral density needs ω ≥ 0, got {omega}")));
    }
    Ok(spectral_density(omega, p))
}

#[inline]
pub(crate) fn spectral_density(omega: f64, p: &PhononParams) -> f64 {
    let x = omega / p.cutoff_radps;
    p.alpha_ps2 * omega * omega * omega * (-x * x).exp()
}

/// Bose-Einstein occupation at angular frequency `omega` (rad/ps); exactly
/// zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature_k: f64) -> f64 {
    if temperature_k == 0.0 || omega <= 0.0 {
        return 0.0;
    }
    1.0 / (omega / thermal_frequency(temperature_k)).exp_m1()
}

/// Phonon-assisted relaxation rates between dressed states, `(γ_down, γ_up)`
/// in 1/ps.
///
/// `γ_down = (π/2)(Ω/Λ)²·J(Λ)·(n(Λ)+1)` takes `|+⟩ → |−⟩` by phonon
/// emission; `γ_up` replaces `n+1` by `n` (absorption).
pub fn dressed_relaxation_rates(omega: f64, delta: f64, p: &PhononParams) -> (f64, f64) {
    let omega = omega.abs();
    let lambda = omega.hypot(delta);
    if omega == 0.0 || lambda == 0.0 || !p.is_active() {
        return (0.0, 0.0);
    }
    let mix = omega / lambda;
    let base = FRAC_PI_2 * mix * mix * spectral_density(lambda, p);
    let n = bose_occupation(lambda, p.temperature_k);
    (base * (n + 1.0), base * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const QD: PhononParams = PhononParams::QUANTUM_DOT_4K;

    #[test]
    fn spectral_density_values() {
        assert_eq!(phonon_spectral_density(0.0, &QD).unwrap(), 0.0);
        let j1 = phonon_spectral_density(1.0, &QD).unwrap();
        assert!((j1 - 0.022 * (-0.25f64).exp()).abs() < 1e-15);
        assert!((j1 - 0.017_13).abs() < 1e-5);
        assert!(phonon_spectral_density(-1.0, &QD).is_err());
    }

    #[test]
    fn spectral_density_peak() {
        // dJ/dω = 0 at ω = ω_c·√(3/2); scan to confirm
        let peak = 2.0 * 1.5f64.sqrt();
        let j = |w: f64| spectral_density(w, &QD);
        let scan = (1..5000)
            .map(|k| k as f64 * 1e-3)
            .max_by(|a, b| j(*a).total_cmp(&j(*b)))
            .unwrap();
        assert!((scan - peak).abs() < 1e-3);
        assert!((peak - 2.449).abs() < 1e-3);
    }

    #[test]
    fn rates_vanish_without_coupling() {
        assert_eq!(dressed_relaxation_rates(0.0, 0.3, &QD), (0.0, 0.0));
        assert_eq!(dressed_relaxation_rates(0.0, 0.0, &QD), (0.0, 0.0));
    }

    #[test]
    fn zero_temperature_has_no_absorption() {
        let cold = PhononParams { temperature_k: 0.0, ..QD };
        let (down, up) = dressed_relaxation_rates(0.5, 0.2, &cold);
        assert_eq!(up, 0.0);
        let lambda = 0.5f64.hypot(0.2);
        let expect = PI / 2.0 * (0.5 / lambda).powi(2) * spectral_density(lambda, &cold);
        assert!((down - expect).abs() < 1e-16);
    }

    #[test]
    fn golden_rates_on_resonance() {
        // Δ = 0, Ω = 0.628 rad/ps, 4.2 K: k_BT/ħ = 0.549865 rad/ps
        let (down, up) = dressed_relaxation_rates(0.628, 0.0, &QD);
        let j = 0.022 * 0.628f64.powi(3) * (-(0.314f64).powi(2)).exp();
        let n = 1.0 / ((0.628 / 0.549_865_424_670_267f64).exp() - 1.0);
        assert!((down - PI / 2.0 * j * (n + 1.0)).abs() < 1e-12);
        assert!((up - PI / 2.0 * j * n).abs() < 1e-12);
        assert!((down - 0.011_390_68).abs() < 1e-8, "{down}");
        assert!((up - 0.003_635_32).abs() < 1e-8, "{up}");
        assert!((down / up - (0.628f64 / 0.549_865_424_670_267).exp()).abs() < 1e-9);
    }
}
