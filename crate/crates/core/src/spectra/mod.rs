//! Voigt lineshapes for resonance-fluorescence spectra.
//!
//! Frequencies are ordinary frequencies in GHz and all widths are FWHM.
//! The Lorentzian part is homogeneous broadening, the Gaussian part
//! inhomogeneous broadening from spectral diffusion.

mod faddeeva;
mod fit;

use std::f64::consts::{LN_2, PI};
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

pub use faddeeva::faddeeva;
pub use fit::{fit_voigt, runs_test, FitOptions, RunsTest, VoigtFit, VoigtSigma};

/// Line parameters. `amplitude` is the integrated area above `baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoigtParams {
    pub center_ghz: f64,
    pub lorentzian_fwhm_ghz: f64,
    pub gaussian_fwhm_ghz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub baseline: f64,
}

impl VoigtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lorentzian_fwhm_ghz >= 0.0 && self.gaussian_fwhm_ghz >= 0.0) {
            return Err(Error::invalid("lorentzian_fwhm_ghz", "widths must be non-negative"));
        }
        if self.lorentzian_fwhm_ghz == 0.0 && self.gaussian_fwhm_ghz == 0.0 {
            return Err(Error::invalid("gaussian_fwhm_ghz", "both widths are zero"));
        }
        if !(self.center_ghz.is_finite() && self.amplitude.is_finite() && self.baseline.is_finite()) {
            return Err(Error::invalid("center_ghz", "parameters must be finite"));
        }
        Ok(())
    }

    pub fn eval(&self, nu: f64) -> f64 {
        voigt_profile(
            nu,
            self.center_ghz,
            self.lorentzian_fwhm_ghz,
            self.gaussian_fwhm_ghz,
            self.amplitude,
            self.baseline,
        )
    }

    pub fn fwhm(&self) -> f64 {
        voigt_fwhm(self.lorentzian_fwhm_ghz, self.gaussian_fwhm_ghz)
    }
}

/// Unit-area Voigt profile at offset `x` from the centre. Exact Lorentzian
/// or Gaussian when the other width is zero; NaN when both are.
pub fn voigt_unit(x: f64, lorentzian_fwhm: f64, gaussian_fwhm: f64) -> f64 {
    let gamma = 0.5 * lorentzian_fwhm;
    if gaussian_fwhm == 0.0 {
        return gamma / (PI * (x * x + gamma * gamma));
    }
    let sigma = gaussian_fwhm / (2.0 * (2.0 * LN_2).sqrt());
    if gamma == 0.0 {
        return (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
    }
    let s2 = sigma * 2f64.sqrt();
    faddeeva(C64::new(x / s2, gamma / s2)).re / (sigma * (2.0 * PI).sqrt())
}

/// `baseline + amplitude·V(ν − center)` with `V` the unit-area Voigt profile.
pub fn voigt_profile(nu: f64, center: f64, lorentzian_fwhm: f64, gaussian_fwhm: f64, amplitude: f64, baseline: f64) -> f64 {
    baseline + amplitude * voigt_unit(nu - center, lorentzian_fwhm, gaussian_fwhm)
}

/// Olivero–Longbothum estimate of the Voigt FWHM.
pub fn voigt_fwhm(lorentzian_fwhm: f64, gaussian_fwhm: f64) -> f64 {
    0.5346 * lorentzian_fwhm + (0.2166 * lorentzian_fwhm.powi(2) + gaussian_fwhm.powi(2)).sqrt()
}

/// Sampled spectrum, optionally with per-point standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub freq_ghz: Vec<f64>,
    pub intensity: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn new(freq_ghz: Vec<f64>, intensity: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        let s = Spectrum {
            freq_ghz,
            intensity,
            sigma,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq_ghz.len() != self.intensity.len() {
            return Err(Error::invalid("intensity", "length differs from freq_ghz"));
        }
        if self.freq_ghz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("freq_ghz", "must be strictly increasing"));
        }
        if self.intensity.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("intensity", "must be finite and non-negative"));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.freq_ghz.len() {
                return Err(Error::invalid("sigma", "length differs from freq_ghz"));
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::invalid("sigma", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freq_ghz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_ghz.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match &self.sigma {
            Some(sigma) => {
                writeln!(out, "freq_ghz,intensity,sigma")?;
                for ((f, y), s) in self.freq_ghz.iter().zip(&self.intensity).zip(sigma) {
                    writeln!(out, "{f},{y},{s}")?;
                }
            }
            None => {
                writeln!(out, "freq_ghz,intensity")?;
                for (f, y) in self.freq_ghz.iter().zip(&self.intensity) {
                    writeln!(out, "{f},{y}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, line)) => {
                    let line = line?;
                    let t = line.trim();
                    if !t.is_empty() && !t.starts_with('#') {
                        break t.to_string();
                    }
                }
                None => return Err(Error::Parse("empty spectrum file".into())),
            }
        };
        let with_sigma = match header.as_str() {
            "freq_ghz,intensity" => false,
            "freq_ghz,intensity,sigma" => true,
            other => {
                return Err(Error::Parse(format!(
                    "expected header `freq_ghz,intensity[,sigma]`, found `{other}`"
                )))
            }
        };
        let (mut f, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for (n, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = t.split(',').collect();
            if cols.len() != if with_sigma { 3 } else { 2 } {
                return Err(Error::Parse(format!("line {}: wrong number of columns", n + 1)));
            }
            let num = |c: &str| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: `{c}` is not a number", n + 1)))
            };
            f.push(num(cols[0])?);
            y.push(num(cols[1])?);
            if with_sigma {
                s.push(num(cols[2])?);
            }
        }
        Spectrum::new(f, y, with_sigma.then_some(s))
    }
}

/// Forward model on `n_points` evenly spaced frequencies in
/// `[start_ghz, stop_ghz]`, with multiplicative Gaussian noise of relative
/// size `noise`. Noisy spectra carry `sigma = noise·model`.
pub fn synth_spectrum(
    params: &VoigtParams,
    start_ghz: f64,
    stop_ghz: f64,
    n_points: usize,
    noise: f64,
    seed: u64,
) -> Result<Spectrum> {
    params.validate()?;
    if n_points < 2 || !(stop_ghz > start_ghz) {
        return Err(Error::invalid("n_points", "need at least two points on an increasing range"));
    }
    if !(0.0..0.5).contains(&noise) {
        return Err(Error::invalid("noise", "relative noise must lie in [0, 0.5)"));
    }
    let step = (stop_ghz - start_ghz) / (n_points - 1) as f64;
    let freq: Vec<f64> = (0..n_points).map(|i| start_ghz + i as f64 * step).collect();
    let model: Vec<f64> = freq.iter().map(|&nu| params.eval(nu)).collect();
    if noise == 0.0 {
        return Spectrum::new(freq, model, None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intensity = model
        .iter()
        .map(|&m| {
            let g: f64 = StandardNormal.sample(&mut rng);
            (m * (1.0 + noise * g)).max(0.0)
        })
        .collect();
    let sigma = model.iter().map(|&m| (noise * m).max(f64::MIN_POSITIVE)).collect();
    Spectrum::new(freq, intensity, Some(sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct numerical convolution of a Gaussian and a Lorentzian.
    fn convolved(x: f64, gl: f64, gg: f64) -> f64 {
        let sigma = gg / (2.0 * (2.0 * LN_2).sqrt());
        let gamma = 0.5 * gl;
        let h = sigma / 400.0;
        let n = (12.0 * sigma / h) as i64;
        let mut acc = 0.0;
        for k in -n..=n {
            let t = k as f64 * h;
            let w = if k.abs() == n { 0.5 } else { 1.0 };
            let g = (-t * t / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
            let l = gamma / (PI * ((x - t).powi(2) + gamma * gamma));
            acc += w * g * l;
        }
        acc * h
    }

    #[test]
    fn matches_numerical_convolution() {
        for (gl, gg) in [(0.48, 0.55), (1.0, 1.0), (0.1, 2.0), (3.0, 0.4)] {
            for x in [0.0, 0.2, 0.7, 1.5, 4.0] {
                let v = voigt_unit(x, gl, gg);
                let c = convolved(x, gl, gg);
                assert!((v / c - 1.0).abs() < 1e-6, "({gl}, {gg}) at {x}: {v} vs {c}");
            }
        }
    }

    #[test]
    fn degenerate_limits() {
        for x in [0.0, 0.1, 0.5, 2.0] {
            let l = 0.2 / (PI * (x * x + 0.04));
            assert!((voigt_unit(x, 0.4, 0.0) / l - 1.0).abs() < 1e-12);
            // a vanishing Gaussian leaves the Lorentzian
            assert!((voigt_unit(x, 0.4, 1e-5) / l - 1.0).abs() < 1e-6);
            let sigma = 0.4 / (2.0 * (2.0 * LN_2).sqrt());
            let g = (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
            assert!((voigt_unit(x, 0.0, 0.4) / g - 1.0).abs() < 1e-12);
            if x < 0.5 {
                assert!((voigt_unit(x, 1e-7, 0.4) / g - 1.0).abs() < 1e-6);
            }
        }
        assert!(VoigtParams {
            center_ghz: 0.0,
            lorentzian_fwhm_ghz: 0.0,
            gaussian_fwhm_ghz: 0.0,
            amplitude: 1.0,
            baseline: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn fwhm_estimate() {
        assert!((voigt_fwhm(1.0, 1.0) - 1.6376).abs() < 1e-4);
        // numerical half maximum of the exact profile
        let peak = voigt_unit(0.0, 1.0, 1.0);
        let (mut lo, mut hi) = (0.0, 3.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if voigt_unit(mid, 1.0, 1.0) > 0.5 * peak {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(((lo + hi) / voigt_fwhm(1.0, 1.0) - 1.0).abs() < 2e-4);
    }

    #[test]
    fn symmetric_and_area_conserving() {
        let (gl, gg) = (0.48, 0.55);
        for x in [0.1, 0.9, 3.3] {
            assert_eq!(voigt_unit(x, gl, gg), voigt_unit(-x, gl, gg));
        }
        let half = 200.0;
        let integral = |h: f64| {
            let n = (half / h) as i64;
            (-n..=n)
                .map(|k| {
                    let w = if k.abs() == n { 0.5 } else { 1.0 };
                    w * voigt_unit(k as f64 * h, gl, gg)
                })
                .sum::<f64>()
                * h
        };
        let coarse = integral(0.02);
        let fine = integral(0.01);
        let richardson = (4.0 * fine - coarse) / 3.0;
        // mass beyond ±half sits in the Lorentzian wings
        let inside = 2.0 / PI * (2.0 * half / gl).atan();
        assert!((richardson - inside).abs() < 1e-4, "{richardson} vs {inside}");
        assert!((fine - richardson).abs() < 1e-4);
    }

    #[test]
    fn synthetic_spectra() {
        let p = VoigtParams {
            center_ghz: 0.3,
            lorentzian_fwhm_ghz: 0.48,
            gaussian_fwhm_ghz: 0.55,
            amplitude: 2.0,
            baseline: 0.01,
        };
        let clean = synth_spectrum(&p, -3.0, 3.0, 101, 0.0, 1).unwrap();
        assert!(clean.sigma.is_none());
        assert_eq!(clean.intensity[50], p.eval(0.0));
        let a = synth_spectrum(&p, -3.0, 3.0, 101, 0.02, 9).unwrap();
        let b = synth_spectrum(&p, -3.0, 3.0, 101, 0.02, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_spectrum(&p, -3.0, 3.0, 101, 0.02, 10).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let s = Spectrum::new(vec![-1.0, 0.0, 1.5], vec![0.1, 2.0, 0.3], Some(vec![0.01, 0.1, 0.02])).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(Spectrum::read_csv(buf.as_slice()).unwrap(), s);
        let plain = Spectrum::new(vec![1.0, 2.0], vec![0.5, 0.25], None).unwrap();
        let mut buf = Vec::new();
        plain.write_csv(&mut buf).unwrap();
        assert_eq!(Spectrum::read_csv(buf.as_slice()).unwrap(), plain);
        assert!(Spectrum::read_csv("freq_ghz,intensity\n2,1\n1,1\n".as_bytes()).is_err());
        assert!(Spectrum::read_csv("freq_ghz,intensity\n1,-1\n2,1\n".as_bytes()).is_err());
    }
}
