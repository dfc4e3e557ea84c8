use proptest::prelude::*;
use qdrap::dynamics::{evolve, SystemParams, DEFAULT_TOLERANCE};
use qdrap::pulse::PulseSpec;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dissipative_states_stay_physical(
        area in 0.1f64..3.0,
        gdd in -60.0f64..60.0,
        fwhm in 2.0f64..6.0,
        temperature in 0.0f64..30.0,
    ) {
        let mut system = SystemParams::quantum_dot();
        system.phonon.temperature_k = temperature;
        let field = PulseSpec::sech(fwhm, area).with_gdd(gdd).synthesize().unwrap();
        let traj = evolve(&field, &system, DEFAULT_TOLERANCE).unwrap();
        let h = traj.hygiene();
        prop_assert!(h.max_trace_error <= 1e-9);
        prop_assert!(h.min_eigenvalue >= -1e-9);
        prop_assert!(h.max_hermiticity_error <= 1e-12);
        let y = traj.photon_yield();
        prop_assert!((0.0..1.1).contains(&y), "yield {}", y);
    }

    #[test]
    fn closed_evolution_is_pure_and_chirp_symmetric(area in 0.1f64..3.0, gdd in 5.0f64..60.0) {
        let closed = SystemParams::closed();
        let a = evolve(&PulseSpec::sech(3.0, area).with_gdd(gdd).synthesize().unwrap(), &closed, DEFAULT_TOLERANCE).unwrap();
        let b = evolve(&PulseSpec::sech(3.0, area).with_gdd(-gdd).synthesize().unwrap(), &closed, DEFAULT_TOLERANCE).unwrap();
        prop_assert!(a.hygiene().max_purity_defect <= 1e-8);
        prop_assert!((a.final_pe() - b.final_pe()).abs() < 1e-5);
    }
}
