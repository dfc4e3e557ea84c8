//! Photon-correlation measurements on a pulsed single-photon source.
//!
//! Monte Carlo generators for HBT and HOM coincidence histograms, the g²(0)
//! estimator, raw and corrected two-photon visibility, and the process
//! fidelity of a post-selected linear-optical controlled-phase gate.

mod gate;
mod hbt;
mod histogram;
mod hom;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamFactory;
use crate::units;

pub use gate::{cz_process_fidelity, cz_process_fidelity_closed_form};
pub use hbt::{analytic_g2, estimate_g2, simulate_hbt, G2Result, DEFAULT_SIDE_PEAKS};
pub use histogram::CoincidenceHistogram;
pub use hom::{
    correct_visibility, hom_peak_ratios, hom_raw_visibility, simulate_hom, visibility_from_areas, HomGeometry,
    HomResult, Measured, Polarization,
};

/// Coincidence window used for peak integration, ns.
pub const DEFAULT_WINDOW_NS: f64 = 3.2;
/// Default histogram bin width, ns.
pub const DEFAULT_BIN_NS: f64 = 0.05;
/// HBT pairs are formed between detections at most this many periods apart.
pub const PAIRING_PERIODS: u64 = 4;

/// Photon-number statistics and optics of a pulsed source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    /// Two-photon wavepacket overlap `M`.
    pub overlap: f64,
    /// End-to-end detection efficiency `η` per photon.
    pub efficiency: f64,
    #[serde(default = "default_rep_period")]
    pub rep_period_ns: f64,
    #[serde(default = "default_lifetime")]
    pub lifetime_ns: f64,
}

fn default_rep_period() -> f64 {
    units::period_ns_from_mhz(82.0)
}

fn default_lifetime() -> f64 {
    1e-3 / units::rate_from_linewidth_ghz(0.39)
}

impl SourceModel {
    /// Emits exactly one photon per pulse with probability `p_emit`.
    pub fn single_photon(p_emit: f64) -> Self {
        SourceModel {
            p0: 1.0 - p_emit,
            p1: p_emit,
            p2: 0.0,
            overlap: 1.0,
            efficiency: 1.0,
            rep_period_ns: default_rep_period(),
            lifetime_ns: default_lifetime(),
        }
    }

    /// Photon-number distribution measured by counting emissions per pulse;
    /// pulses with more than two photons are lumped into `p2`.
    pub fn from_photon_counts(counts: &[u32]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("counts", "need at least one pulse"));
        }
        let n = counts.len() as f64;
        let mut hist = [0usize; 3];
        for &c in counts {
            hist[(c as usize).min(2)] += 1;
        }
        Ok(SourceModel {
            p0: hist[0] as f64 / n,
            p1: hist[1] as f64 / n,
            p2: hist[2] as f64 / n,
            ..SourceModel::single_photon(1.0)
        })
    }

    /// Move weight from `p1` to `p2`, keeping `p0`, until the pulsed
    /// `g²(0) = 2p₂/(p₁+2p₂)²` equals `g2`.
    pub fn with_target_g2(mut self, g2: f64) -> Result<Self> {
        let q = self.p1 + self.p2;
        if !(g2 >= 0.0 && g2.is_finite()) {
            return Err(Error::invalid("g2", "must be non-negative"));
        }
        if q <= 0.0 {
            return Err(Error::invalid("p1", "source never emits"));
        }
        if 2.0 * g2 * q > 1.0 {
            return Err(Error::invalid("g2", format!("unreachable with p1 + p2 = {q}")));
        }
        // g2·p2² + (2g2·q − 2)·p2 + g2·q² = 0, smaller root
        self.p2 = if g2 == 0.0 {
            0.0
        } else {
            let b = 2.0 - 2.0 * g2 * q;
            (b - (b * b - 4.0 * g2 * g2 * q * q).sqrt()) / (2.0 * g2)
        };
        self.p1 = q - self.p2;
        Ok(self)
    }

    pub fn with_overlap(mut self, m: f64) -> Self {
        self.overlap = m;
        self
    }

    pub fn with_efficiency(mut self, eta: f64) -> Self {
        self.efficiency = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("source.p0", self.p0), ("source.p1", self.p1), ("source.p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(name, format!("{p} is not a probability")));
            }
        }
        let sum = self.p0 + self.p1 + self.p2;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("source.p0", format!("p0 + p1 + p2 = {sum}, expected 1")));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::invalid("source.overlap", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid("source.efficiency", "must lie in [0, 1]"));
        }
        if !(self.rep_period_ns > 0.0 && self.rep_period_ns.is_finite()) {
            return Err(Error::invalid("source.rep_period_ns", "must be positive"));
        }
        if !(self.lifetime_ns > 0.0 && self.lifetime_ns.is_finite()) {
            return Err(Error::invalid("source.lifetime_ns", "must be positive"));
        }
        Ok(())
    }

    pub fn g2(&self) -> f64 {
        analytic_g2(self.p1, self.p2)
    }

    pub(crate) fn sample_number(&self, rng: &mut ChaCha8Rng) -> u32 {
        let u: f64 = rng.random();
        if u < self.p0 {
            0
        } else if u < self.p0 + self.p1 {
            1
        } else {
            2
        }
    }

    pub(crate) fn jitter(&self) -> Exp<f64> {
        Exp::new(1.0 / self.lifetime_ns).expect("lifetime validated")
    }
}

/// A detector click, time relative to the start of its period.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Click {
    pub detector: u8,
    pub time_ns: f64,
}

const CHUNK: u64 = 1 << 15;

/// Histogram `t₁ − t₀` over all pairs of clicks on detectors 0 and 1 that
/// lie at most `reach` periods apart.
///
/// `events(p, rng, out)` appends the clicks of period `p` using the random
/// stream owned by that period; chunks of periods are correlated in
/// parallel, regenerating the neighbouring periods they need.
pub(crate) fn correlate<F>(
    n_periods: u64,
    reach: u64,
    seed: u64,
    template: &CoincidenceHistogram,
    events: F,
) -> CoincidenceHistogram
where
    F: Fn(u64, &mut ChaCha8Rng, &mut Vec<Click>) + Sync,
{
    let streams = StreamFactory::new(seed);
    let period = template.rep_period_ns;
    let n_chunks = n_periods.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n_periods);
            let lo = start.saturating_sub(reach);
            let hi = (end + reach).min(n_periods);
            let mut clicks: Vec<Vec<Click>> = Vec::with_capacity((hi - lo) as usize);
            for p in lo..hi {
                let mut v = Vec::new();
                events(p, &mut streams.stream(p), &mut v);
                clicks.push(v);
            }
            let mut hist = CoincidenceHistogram {
                counts: vec![0; template.counts.len()],
                ..template.clone()
            };
            for p in start..end {
                let here = &clicks[(p - lo) as usize];
                let q_lo = p.saturating_sub(reach).max(lo);
                let q_hi = (p + reach + 1).min(hi);
                for a in here.iter().filter(|a| a.detector == 0) {
                    for q in q_lo..q_hi {
                        let offset = (q as f64 - p as f64) * period;
                        for b in clicks[(q - lo) as usize].iter().filter(|b| b.detector == 1) {
                            hist.record(offset + b.time_ns - a.time_ns);
                        }
                    }
                }
            }
            hist
        })
        .reduce(
            || CoincidenceHistogram {
                counts: vec![0; template.counts.len()],
                ..template.clone()
            },
            |mut a, b| {
                a.add(&b);
                a
            },
        )
}
