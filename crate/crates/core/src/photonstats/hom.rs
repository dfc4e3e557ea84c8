use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{correlate, Click, CoincidenceHistogram, SourceModel, DEFAULT_BIN_NS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Parallel,
    Cross,
}

/// Value with one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Measured { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Measured { value, sigma: 0.0 }
    }
}

/// Pulse pair and unbalanced Mach–Zehnder of the two-photon interference
/// setup.
///
/// Each period carries two excitation pulses `pulse_separation_ns` apart;
/// the interferometer delays its long arm by `mz_delay_ns`. When the two
/// are equal, the early photon in the long arm meets the late photon in
/// the short arm on the output splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomGeometry {
    pub pulse_separation_ns: f64,
    pub mz_delay_ns: f64,
    /// First-order (classical) visibility `ξ` of the interferometer.
    pub mz_visibility: f64,
}

impl Default for HomGeometry {
    fn default() -> Self {
        HomGeometry {
            pulse_separation_ns: 4.0,
            mz_delay_ns: 4.0,
            mz_visibility: 1.0,
        }
    }
}

impl HomGeometry {
    pub fn with_mz_visibility(mut self, xi: f64) -> Self {
        self.mz_visibility = xi;
        self
    }

    /// Delay of the outermost peaks of the zero-delay cluster.
    pub fn outer_delay_ns(&self) -> f64 {
        self.pulse_separation_ns + self.mz_delay_ns
    }

    pub fn validate(&self, rep_period_ns: f64) -> Result<()> {
        if !(self.pulse_separation_ns > 0.0 && self.mz_delay_ns > 0.0) {
            return Err(Error::invalid("hom.pulse_separation_ns", "delays must be positive"));
        }
        if self.outer_delay_ns() >= rep_period_ns {
            return Err(Error::invalid(
                "hom.mz_delay_ns",
                "pulse pair plus interferometer delay must fit inside one period",
            ));
        }
        if !(0.0..=1.0).contains(&self.mz_visibility) {
            return Err(Error::invalid("hom.mz_visibility", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomResult {
    pub v_raw: Measured,
    pub v_corrected: Measured,
    pub window_ns: f64,
    pub g2: Measured,
    pub mz_visibility: Measured,
}

/// Relative areas of the five peaks at `−2d, −d, 0, d, 2d` for overlap
/// `m_eff`, obtained by summing amplitudes over every path of two photons
/// through the interferometer onto two detectors.
pub fn hom_peak_ratios(m_eff: f64) -> [f64; 5] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // amplitude of photon from arm `arm` reaching detector `det`
    let out = |arm: usize, det: usize| if arm == 1 && det == 1 { -h } else { h };
    let mut peaks = [0.0; 5];
    for early_arm in 0..2 {
        for late_arm in 0..2 {
            // arrival slots in units of d: early photon at 0 (+1 if long arm), late at 1 (+1)
            let t_early = early_arm as i32;
            let t_late = 1 + late_arm as i32;
            let path = 0.25; // both first-splitter choices, |1/√2|² each
            if t_early == t_late {
                // one photon on each detector: both assignments interfere
                let a = out(early_arm, 0) * out(late_arm, 1);
                let b = out(early_arm, 1) * out(late_arm, 0);
                let p = m_eff * (a + b).powi(2) + (1.0 - m_eff) * (a * a + b * b);
                peaks[2] += path * p;
            } else {
                for (d_early, d_late) in [(0, 1), (1, 0)] {
                    let p = (out(early_arm, d_early) * out(late_arm, d_late)).powi(2);
                    // delay is t(detector 1) − t(detector 0)
                    let delay = if d_early == 0 { t_late - t_early } else { t_early - t_late };
                    peaks[(delay + 2) as usize] += path * p;
                }
            }
        }
    }
    peaks.map(|p| p * 16.0)
}

struct Photon {
    arrival_ns: f64,
    port: usize,
    delay_ns: f64,
}

/// Monte Carlo two-photon interference histogram for `n_periods` laser
/// periods.
///
/// Only clicks from the same period are paired, so the histogram holds the
/// five-peak cluster around zero delay and nothing from neighbouring
/// periods.
///
/// Photons meeting on the output splitter in the same time slot from
/// opposite ports bunch onto one detector with probability
/// `M_eff = M·ξ²` (`0` for cross polarization); otherwise every photon
/// leaves through either port with equal probability.
pub fn simulate_hom(
    src: &SourceModel,
    geometry: &HomGeometry,
    polarization: Polarization,
    n_periods: u64,
    seed: u64,
) -> Result<CoincidenceHistogram> {
    src.validate()?;
    geometry.validate(src.rep_period_ns)?;
    if n_periods < 1000 {
        return Err(Error::invalid("n_pulses", "need at least 1000 periods"));
    }
    let m_eff = match polarization {
        Polarization::Parallel => src.overlap * geometry.mz_visibility.powi(2),
        Polarization::Cross => 0.0,
    };
    let t = src.rep_period_ns;
    let template = CoincidenceHistogram::new(DEFAULT_BIN_NS, t, t)?;
    let jitter = src.jitter();
    let slot_tol = 1e-9;
    Ok(correlate(n_periods, 0, seed, &template, |_, rng, out| {
        let mut photons: Vec<Photon> = Vec::new();
        for pulse in 0..2 {
            for _ in 0..src.sample_number(rng) {
                let delay_ns = jitter.sample(rng);
                let port = rng.random::<bool>() as usize;
                photons.push(Photon {
                    arrival_ns: pulse as f64 * geometry.pulse_separation_ns + port as f64 * geometry.mz_delay_ns,
                    port,
                    delay_ns,
                });
            }
        }
        let mut exits: Vec<Option<u8>> = vec![None; photons.len()];
        for i in 0..photons.len() {
            if exits[i].is_some() {
                continue;
            }
            // partner: first unrouted photon in the same slot, other port
            let partner = (i + 1..photons.len()).find(|&j| {
                exits[j].is_none()
                    && photons[j].port != photons[i].port
                    && (photons[j].arrival_ns - photons[i].arrival_ns).abs() < slot_tol
            });
            match partner {
                Some(j) if rng.random::<f64>() < m_eff => {
                    let d = rng.random::<bool>() as u8;
                    exits[i] = Some(d);
                    exits[j] = Some(d);
                }
                _ => exits[i] = Some(rng.random::<bool>() as u8),
            }
        }
        for (p, exit) in photons.iter().zip(exits) {
            if rng.random::<f64>() < src.efficiency {
                out.push(Click {
                    detector: exit.expect("every photon routed"),
                    time_ns: p.arrival_ns + p.delay_ns,
                });
            }
        }
    }))
}

/// `V = 1 − (A∥/O∥)/(A⊥/O⊥)` from central areas `A` and outer-peak areas
/// `O`, with Poisson uncertainty on all four.
pub fn visibility_from_areas(a_par: f64, a_cross: f64, outer_par: f64, outer_cross: f64) -> Result<Measured> {
    if a_cross <= 0.0 {
        return Err(Error::Undefined(
            "cross-polarized central peak is empty; visibility is undefined".into(),
        ));
    }
    if outer_par <= 0.0 || outer_cross <= 0.0 {
        return Err(Error::Undefined("outer normalization peaks are empty".into()));
    }
    let ratio = |a: f64| (a / outer_par) / (a_cross / outer_cross);
    let r = ratio(a_par);
    // an empty parallel peak gets the one-count uncertainty
    let a_eff = a_par.max(1.0);
    let rel = 1.0 / a_eff + 1.0 / a_cross + 1.0 / outer_par + 1.0 / outer_cross;
    Ok(Measured::new(1.0 - r, ratio(a_eff) * rel.sqrt()))
}

/// Raw HOM visibility from parallel and cross-polarized histograms,
/// integrating `±window/2` around zero delay and normalizing both by their
/// outer peaks at `±(pulse separation + interferometer delay)`.
pub fn hom_raw_visibility(
    h_par: &CoincidenceHistogram,
    h_cross: &CoincidenceHistogram,
    window_ns: f64,
    geometry: &HomGeometry,
) -> Result<Measured> {
    if !h_par.same_binning(h_cross) {
        return Err(Error::invalid("histograms", "parallel and cross histograms differ in binning"));
    }
    if !(window_ns > 0.0 && window_ns < geometry.mz_delay_ns.min(geometry.pulse_separation_ns)) {
        return Err(Error::invalid("window_ns", "window must be positive and narrower than the peak spacing"));
    }
    let outer = geometry.outer_delay_ns();
    let side = |h: &CoincidenceHistogram| (h.integrate(-outer, window_ns) + h.integrate(outer, window_ns)) as f64;
    visibility_from_areas(
        h_par.integrate(0.0, window_ns) as f64,
        h_cross.integrate(0.0, window_ns) as f64,
        side(h_par),
        side(h_cross),
    )
}

/// Remove the multi-photon and interferometer contributions from a raw
/// visibility: `V = (V_raw + 2g²)/ξ²`, with first-order error propagation.
pub fn correct_visibility(v_raw: Measured, g2: Measured, xi: Measured) -> Result<Measured> {
    if !(xi.value > 0.0 && xi.value <= 1.0) {
        return Err(Error::invalid("mz_visibility", "must lie in (0, 1]"));
    }
    if !(g2.value >= 0.0) {
        return Err(Error::invalid("g2", "must be non-negative"));
    }
    if !(-1.0..=1.0).contains(&v_raw.value) {
        return Err(Error::invalid("v_raw", "must lie in [-1, 1]"));
    }
    let x2 = xi.value * xi.value;
    let value = (v_raw.value + 2.0 * g2.value) / x2;
    let sigma = ((v_raw.sigma / x2).powi(2)
        + (2.0 * g2.sigma / x2).powi(2)
        + (2.0 * value / xi.value * xi.sigma).powi(2))
    .sqrt();
    Ok(Measured::new(value, sigma))
}

impl HomResult {
    pub fn analyze(
        h_par: &CoincidenceHistogram,
        h_cross: &CoincidenceHistogram,
        window_ns: f64,
        geometry: &HomGeometry,
        g2: Measured,
        mz_visibility: Measured,
    ) -> Result<HomResult> {
        let v_raw = hom_raw_visibility(h_par, h_cross, window_ns, geometry)?;
        let v_corrected = correct_visibility(v_raw, g2, mz_visibility)?;
        Ok(HomResult {
            v_raw,
            v_corrected,
            window_ns,
            g2,
            mz_visibility,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonstats::DEFAULT_WINDOW_NS;

    fn cluster(h: &CoincidenceHistogram) -> [f64; 5] {
        [-8.0, -4.0, 0.0, 4.0, 8.0].map(|d| h.integrate(d, DEFAULT_WINDOW_NS) as f64)
    }

    #[test]
    fn enumeration_gives_textbook_ratios() {
        for m in [0.0, 0.3, 1.0] {
            let r = hom_peak_ratios(m);
            let expect = [1.0, 2.0, 2.0 * (1.0 - m), 2.0, 1.0];
            for (a, b) in r.iter().zip(expect) {
                assert!((a - b).abs() < 1e-12, "{m}: {r:?}");
            }
        }
    }

    #[test]
    fn published_visibility_arithmetic() {
        let v = visibility_from_areas(21.0, 1000.0, 500.0, 500.0).unwrap();
        assert!((v.value - 0.979).abs() < 1e-12);
        assert_eq!(visibility_from_areas(400.0, 400.0, 9.0, 9.0).unwrap().value, 0.0);
        assert_eq!(visibility_from_areas(0.0, 400.0, 9.0, 9.0).unwrap().value, 1.0);
        assert!(visibility_from_areas(3.0, 0.0, 9.0, 9.0).is_err());
    }

    #[test]
    fn correction_arithmetic() {
        let v = correct_visibility(Measured::new(0.979, 0.006), Measured::new(0.003, 0.002), Measured::exact(0.995))
            .unwrap();
        assert!((v.value - 0.985 / 0.990_025).abs() < 1e-12);
        assert!((v.value - 0.995).abs() < 0.001);
        assert!((v.sigma - 0.007).abs() < 0.0005, "{}", v.sigma);
        let id = correct_visibility(Measured::exact(0.8), Measured::exact(0.0), Measured::exact(1.0)).unwrap();
        assert_eq!(id.value, 0.8);
        let more = correct_visibility(Measured::exact(0.8), Measured::exact(0.01), Measured::exact(1.0)).unwrap();
        assert!(more.value > id.value);
        assert!(correct_visibility(Measured::exact(0.8), Measured::exact(0.0), Measured::exact(0.0)).is_err());
    }

    #[test]
    fn perfect_photons_never_coincide_at_zero() {
        let src = SourceModel::single_photon(1.0);
        let h = simulate_hom(&src, &HomGeometry::default(), Polarization::Parallel, 50_000, 3).unwrap();
        let c = cluster(&h);
        // only the exponential tails of the ±d peaks reach into the window
        assert!(c[2] < 0.005 * c[1], "{c:?}");
        assert!((c[1] / c[0] - 2.0).abs() < 0.1, "{c:?}");
    }

    #[test]
    fn cross_polarization_has_equal_inner_peaks() {
        let src = SourceModel::single_photon(1.0);
        let h = simulate_hom(&src, &HomGeometry::default(), Polarization::Cross, 100_000, 5).unwrap();
        let c = cluster(&h);
        let avg_inner = 0.5 * (c[1] + c[3]);
        let sigma = (c[2] + avg_inner / 2.0).sqrt();
        assert!((c[2] - avg_inner).abs() < 4.0 * sigma, "{c:?}");
        assert!((c[2] / c[0] - 2.0).abs() < 0.1, "{c:?}");
    }

    #[test]
    fn outer_peaks_ignore_polarization() {
        let src = SourceModel::single_photon(0.9).with_overlap(0.9);
        let g = HomGeometry::default();
        let par = simulate_hom(&src, &g, Polarization::Parallel, 100_000, 9).unwrap();
        let cross = simulate_hom(&src, &g, Polarization::Cross, 100_000, 9).unwrap();
        let (a, b) = (cluster(&par), cluster(&cross));
        for i in [0, 4] {
            assert!((a[i] - b[i]).abs() < 4.0 * (a[i] + b[i]).sqrt(), "{a:?} {b:?}");
        }
    }

    #[test]
    fn raw_visibility_grows_with_overlap() {
        let g = HomGeometry::default();
        let mut last = -1.0;
        for m in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let src = SourceModel::single_photon(1.0).with_overlap(m);
            let par = simulate_hom(&src, &g, Polarization::Parallel, 40_000, 17).unwrap();
            let cross = simulate_hom(&src, &g, Polarization::Cross, 40_000, 18).unwrap();
            let v = hom_raw_visibility(&par, &cross, DEFAULT_WINDOW_NS, &g).unwrap();
            assert!(v.value > last, "{m}: {v:?}");
            assert!((v.value - m).abs() < 4.0 * v.sigma + 0.01, "{m}: {v:?}");
            last = v.value;
        }
    }
}
