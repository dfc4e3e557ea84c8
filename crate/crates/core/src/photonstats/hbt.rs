use rand::Rng;
use rand_distr::Distribution;
use serde::Serialize;

use super::{correlate, Click, CoincidenceHistogram, SourceModel, DEFAULT_BIN_NS, PAIRING_PERIODS};
use crate::error::{Error, Result};

/// Side peaks averaged by default: three on each side of zero delay.
pub const DEFAULT_SIDE_PEAKS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct G2Result {
    pub g2: f64,
    pub sigma: f64,
    pub window_ns: f64,
    pub n_side_peaks: usize,
    pub zero_peak: u64,
    pub side_mean: f64,
}

/// Pulsed `g²(0)` of a source emitting one photon with probability `p1` and
/// two with probability `p2`.
pub fn analytic_g2(p1: f64, p2: f64) -> f64 {
    let mean = p1 + 2.0 * p2;
    if mean == 0.0 {
        0.0
    } else {
        2.0 * p2 / (mean * mean)
    }
}

/// Monte Carlo Hanbury Brown–Twiss measurement.
///
/// Every pulse emits 0, 1 or 2 photons with exponentially distributed
/// delays; each photon is split 50:50 onto two detectors and detected with
/// probability `η`.
pub fn simulate_hbt(src: &SourceModel, n_pulses: u64, seed: u64) -> Result<CoincidenceHistogram> {
    src.validate()?;
    if n_pulses < 1000 {
        return Err(Error::invalid("n_pulses", "need at least 1000 pulses"));
    }
    let t = src.rep_period_ns;
    let template = CoincidenceHistogram::new(DEFAULT_BIN_NS, t, (PAIRING_PERIODS as f64 + 0.5) * t)?;
    let jitter = src.jitter();
    Ok(correlate(n_pulses, PAIRING_PERIODS, seed, &template, |_, rng, out| {
        for _ in 0..src.sample_number(rng) {
            let time_ns = jitter.sample(rng);
            let detected = rng.random::<f64>() < src.efficiency;
            let detector = rng.random::<bool>() as u8;
            if detected {
                out.push(Click { detector, time_ns });
            }
        }
    }))
}

/// Side-peak offsets in units of the period: nearest first, alternating.
fn side_offsets(n: usize) -> impl Iterator<Item = i64> {
    (0..n).map(|i| {
        let k = (i / 2 + 1) as i64;
        if i % 2 == 0 {
            k
        } else {
            -k
        }
    })
}

/// `g²(0) = N₀/S̄`: zero-delay peak area over the mean area of the
/// `n_side` nearest side peaks, each integrated over `±window/2`.
///
/// `n_side` counts peaks on both sides together, nearest first and
/// alternating sides (an odd count takes one more on the positive side).
/// The uncertainty follows from Poisson statistics on every peak.
pub fn estimate_g2(h: &CoincidenceHistogram, window_ns: f64, n_side: usize) -> Result<G2Result> {
    let t = h.rep_period_ns;
    if !(window_ns > 0.0) {
        return Err(Error::invalid("window_ns", "must be positive"));
    }
    if window_ns >= t {
        return Err(Error::invalid(
            "window_ns",
            format!("window {window_ns} ns overlaps the adjacent peaks (period {t} ns)"),
        ));
    }
    if n_side == 0 {
        return Err(Error::invalid("n_side", "need at least one side peak"));
    }
    let farthest = n_side.div_ceil(2) as f64 * t + 0.5 * window_ns;
    if farthest > h.range_ns() + 0.5 * h.bin_width_ns {
        return Err(Error::invalid(
            "n_side",
            format!("{n_side} side peaks need delays up to {farthest:.3} ns, histogram reaches {:.3} ns", h.range_ns()),
        ));
    }
    let n0 = h.integrate(0.0, window_ns);
    let sides: Vec<u64> = side_offsets(n_side)
        .map(|k| h.integrate(k as f64 * t, window_ns))
        .collect();
    let total: u64 = sides.iter().sum();
    let mean = total as f64 / n_side as f64;
    if total == 0 {
        return Err(Error::Undefined("all side peaks are empty; g2 is undefined".into()));
    }
    let (g2, sigma) = if n0 == 0 {
        (0.0, 1.0 / mean)
    } else {
        let g2 = n0 as f64 / mean;
        let rel = 1.0 / n0 as f64 + total as f64 / (n_side as f64 * n_side as f64 * mean * mean);
        (g2, g2 * rel.sqrt())
    };
    Ok(G2Result {
        g2,
        sigma,
        window_ns,
        n_side_peaks: n_side,
        zero_peak: n0,
        side_mean: mean,
    })
}
