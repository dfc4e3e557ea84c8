//! Pulse synthesis and spectral chirp.
//!
//! A pulse is described by its transform-limited shape, intensity FWHM and
//! area, plus the group-delay dispersion applied afterwards by a grating
//! stretcher. The sampled field carries the complex Rabi envelope
//! `Ω(t)·exp(iφ(t))` in rad/ps on a uniform grid.
//!
//! Sign convention: the detuning is `Δ = ω_laser − ω_X`, so a red-detuned
//! laser has `Δ < 0`. Positive GDD makes the instantaneous frequency sweep
//! from low to high, i.e. `Δ(t)` increases through the pulse.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::C_MM_PER_PS;

/// Ratio of the intensity FWHM of `sech²(t/τ)` to `τ`: `2·acosh(√2)`.
pub const SECH_FWHM_FACTOR: f64 = 1.762_747_174_039_086;
/// Ratio of the intensity FWHM of `exp(−t²/T₀²)` to `T₀`: `2·√ln2`.
pub const GAUSS_FWHM_FACTOR: f64 = 1.665_109_222_315_395;

/// Envelope level, relative to peak, that must be reached at both grid ends.
pub const CONTAINMENT_LEVEL: f64 = 1e-6;
/// Edge level above which a stretched pulse is considered aliased.
pub const ALIASING_LEVEL: f64 = 1e-4;
/// Default amplitude floor for phase extraction, relative to peak.
pub const PHASE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    Sech,
    Gaussian,
}

/// Transform-limited pulse parameters plus the chirp applied to it.
///
/// `area_pi` is the area of the transform-limited pulse in units of π. The
/// chirped field keeps the same energy, so its area differs; drive strength
/// is always quoted as the transform-limited area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub fwhm_ps: f64,
    pub area_pi: f64,
    #[serde(default)]
    pub gdd_ps2: f64,
    #[serde(default)]
    pub carrier_detuning_radps: f64,
}

impl PulseSpec {
    pub fn sech(fwhm_ps: f64, area_pi: f64) -> Self {
        PulseSpec {
            shape: PulseShape::Sech,
            fwhm_ps,
            area_pi,
            gdd_ps2: 0.0,
            carrier_detuning_radps: 0.0,
        }
    }

    pub fn gaussian(fwhm_ps: f64, area_pi: f64) -> Self {
        PulseSpec {
            shape: PulseShape::Gaussian,
            ..PulseSpec::sech(fwhm_ps, area_pi)
        }
    }

    pub fn with_gdd(mut self, gdd_ps2: f64) -> Self {
        self.gdd_ps2 = gdd_ps2;
        self
    }

    pub fn with_area(mut self, area_pi: f64) -> Self {
        self.area_pi = area_pi;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.carrier_detuning_radps = detuning;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_ps > 0.0 && self.fwhm_ps.is_finite()) {
            return Err(Error::invalid("fwhm_ps", format!("must be positive, got {}", self.fwhm_ps)));
        }
        if !(self.area_pi >= 0.0 && self.area_pi.is_finite()) {
            return Err(Error::invalid("area_pi", format!("must be non-negative, got {}", self.area_pi)));
        }
        if !self.gdd_ps2.is_finite() {
            return Err(Error::invalid("gdd_ps2", "must be finite"));
        }
        if !self.carrier_detuning_radps.is_finite() {
            return Err(Error::invalid("carrier_detuning_radps", "must be finite"));
        }
        Ok(())
    }

    /// Shape width parameter: `τ` for sech, `T₀` (1/e intensity half-width)
    /// for Gaussian.
    pub fn width_param(&self) -> f64 {
        match self.shape {
            PulseShape::Sech => self.fwhm_ps / SECH_FWHM_FACTOR,
            PulseShape::Gaussian => self.fwhm_ps / GAUSS_FWHM_FACTOR,
        }
    }

    fn fwhm_factor(&self) -> f64 {
        match self.shape {
            PulseShape::Sech => SECH_FWHM_FACTOR,
            PulseShape::Gaussian => GAUSS_FWHM_FACTOR,
        }
    }

    /// Peak Rabi frequency of the transform-limited pulse, rad/ps.
    pub fn peak_rabi(&self) -> f64 {
        let theta = self.area_pi * PI;
        let w = self.width_param();
        match self.shape {
            PulseShape::Sech => theta / (PI * w),
            PulseShape::Gaussian => theta / (w * (2.0 * PI).sqrt()),
        }
    }

    /// Stretched intensity FWHM from the Gaussian-equivalent closed form.
    pub fn stretched_fwhm_estimate(&self) -> f64 {
        stretched_fwhm_estimate(self.fwhm_ps, self.gdd_ps2)
    }

    /// Half-span the transform-limited envelope needs to fall below
    /// [`CONTAINMENT_LEVEL`].
    pub fn containment_half_span(&self) -> f64 {
        let w = self.width_param();
        match self.shape {
            PulseShape::Sech => w * (1.0 / CONTAINMENT_LEVEL).acosh(),
            PulseShape::Gaussian => w * (2.0 * (1.0 / CONTAINMENT_LEVEL).ln()).sqrt(),
        }
    }

    /// Default sampling grid: centred on the pulse, spanning 16 stretched
    /// FWHM (never less than the transform-limited containment span), with
    /// `dt ≤ τ_stretched / 400`.
    pub fn default_grid(&self) -> TimeGrid {
        let fwhm_s = self.stretched_fwhm_estimate();
        let tau_s = fwhm_s / self.fwhm_factor();
        let dt = (tau_s / 400.0).min(self.width_param() / 40.0);
        let half = (8.0 * fwhm_s).max(1.1 * self.containment_half_span());
        TimeGrid::centered(half, dt)
    }

    /// Transform-limited pulse on the default grid, chirped by `gdd_ps2`.
    pub fn synthesize(&self) -> Result<SampledField> {
        self.synthesize_on(&self.default_grid())
    }

    pub fn synthesize_on(&self, grid: &TimeGrid) -> Result<SampledField> {
        let tl = make_transform_limited(&self.with_gdd(0.0), grid)?;
        apply_gdd(&tl, self.gdd_ps2)
    }
}

/// Gaussian-equivalent stretched intensity FWHM for a transform-limited
/// FWHM and GDD.
pub fn stretched_fwhm_estimate(fwhm_ps: f64, gdd_ps2: f64) -> f64 {
    let t0 = fwhm_ps / GAUSS_FWHM_FACTOR;
    fwhm_ps * (1.0 + (gdd_ps2 / (t0 * t0)).powi(2)).sqrt()
}

/// GDD that stretches a Gaussian of intensity FWHM `fwhm_ps` to
/// `stretched_ps` (inverse of [`stretched_fwhm_estimate`], positive root).
pub fn gdd_for_stretch(fwhm_ps: f64, stretched_ps: f64) -> f64 {
    let t0 = fwhm_ps / GAUSS_FWHM_FACTOR;
    let ratio = stretched_ps / fwhm_ps;
    t0 * t0 * (ratio * ratio - 1.0).max(0.0).sqrt()
}

/// Uniform time grid `t_k = t0 + k·dt`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    /// Grid covering `[-half_span, half_span]` with spacing at most `dt`.
    pub fn centered(half_span: f64, dt: f64) -> Self {
        let steps = (2.0 * half_span / dt).ceil() as usize;
        let steps = steps.max(2);
        let dt = 2.0 * half_span / steps as f64;
        TimeGrid {
            t0: -half_span,
            dt,
            len: steps + 1,
        }
    }

    pub fn span(&self) -> f64 {
        self.dt * (self.len.saturating_sub(1)) as f64
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.span()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.time(k)).collect()
    }
}

/// Complex Rabi envelope on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub t0: f64,
    pub dt: f64,
    pub envelope: Vec<C64>,
    /// Static detuning Δ₀ of the carrier, rad/ps.
    pub carrier_detuning: f64,
}

impl SampledField {
    pub fn new(t0: f64, dt: f64, envelope: Vec<C64>, carrier_detuning: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if envelope.len() < 3 {
            return Err(Error::invalid("envelope", "needs at least 3 samples"));
        }
        if envelope.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("envelope", "contains non-finite samples"));
        }
        Ok(SampledField {
            t0,
            dt,
            envelope,
            carrier_detuning,
        })
    }

    pub fn len(&self) -> usize {
        self.envelope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelope.is_empty()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            t0: self.t0,
            dt: self.dt,
            len: self.len(),
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid().times()
    }

    /// `|Ω(t_k)|` for every sample.
    pub fn magnitude(&self) -> Vec<f64> {
        self.envelope.iter().map(|z| z.norm()).collect()
    }

    pub fn peak(&self) -> f64 {
        self.envelope.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Pulse energy `∫|Ω|² dt` (trapezoidal).
    pub fn energy(&self) -> f64 {
        trapezoid(self.envelope.iter().map(|z| z.norm_sqr()), self.dt)
    }

    /// Copy with the envelope multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SampledField {
        SampledField {
            envelope: self.envelope.iter().map(|z| z * factor).collect(),
            ..self.clone()
        }
    }

    /// Intensity FWHM of `|Ω|²`, found from the half-maximum crossings
    /// around the peak with linear interpolation.
    pub fn intensity_fwhm(&self) -> f64 {
        let intensity: Vec<f64> = self.envelope.iter().map(|z| z.norm_sqr()).collect();
        let (imax, &pmax) = intensity
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty envelope");
        if pmax == 0.0 {
            return 0.0;
        }
        let half = pmax / 2.0;
        let mut right = self.time(intensity.len() - 1);
        for k in imax..intensity.len() - 1 {
            if intensity[k + 1] < half {
                let f = (intensity[k] - half) / (intensity[k] - intensity[k + 1]);
                right = self.time(k) + f * self.dt;
                break;
            }
        }
        let mut left = self.t0;
        for k in (1..=imax).rev() {
            if intensity[k - 1] < half {
                let f = (intensity[k] - half) / (intensity[k] - intensity[k - 1]);
                left = self.time(k) - f * self.dt;
                break;
            }
        }
        right - left
    }

    /// Largest edge magnitude relative to the peak.
    pub fn edge_level(&self) -> f64 {
        let peak = self.peak();
        if peak == 0.0 {
            return 0.0;
        }
        let first = self.envelope[0].norm();
        let last = self.envelope[self.len() - 1].norm();
        first.max(last) / peak
    }

    /// Write `t_ps,re_omega,im_omega,delta_radps` rows.
    pub fn write_csv<W: Write>(&self, detuning: &[f64], mut out: W) -> Result<()> {
        writeln!(out, "t_ps,re_omega,im_omega,delta_radps")?;
        for (k, z) in self.envelope.iter().enumerate() {
            writeln!(out, "{},{},{},{}", self.time(k), z.re, z.im, detuning[k])?;
        }
        Ok(())
    }
}

pub(crate) fn trapezoid(values: impl IntoIterator<Item = f64>, dx: f64) -> f64 {
    let mut iter = values.into_iter();
    let Some(first) = iter.next() else {
        return 0.0;
    };
    let mut sum = 0.0;
    let mut last = first;
    for v in iter {
        sum += 0.5 * (last + v);
        last = v;
    }
    sum * dx
}

/// Sample a transform-limited pulse on `grid`.
///
/// For sech the envelope is `(Θ/πτ)·sech(t/τ)`; for Gaussian
/// `Θ/(T₀√2π)·exp(−t²/2T₀²)`. Both integrate to `Θ = area_pi·π`.
pub fn make_transform_limited(spec: &PulseSpec, grid: &TimeGrid) -> Result<SampledField> {
    spec.validate()?;
    if spec.gdd_ps2 != 0.0 {
        return Err(Error::invalid("gdd_ps2", "transform-limited pulse requires gdd = 0"));
    }
    let half = spec.containment_half_span();
    if grid.t0 > -half || grid.end() < half {
        return Err(Error::GridTooSmall {
            what: "transform-limited pulse",
            required_ps: 2.0 * half,
            actual_ps: grid.span(),
        });
    }
    let w = spec.width_param();
    let peak = spec.peak_rabi();
    let envelope = grid
        .times()
        .into_iter()
        .map(|t| {
            let x = t / w;
            let a = match spec.shape {
                PulseShape::Sech => peak / x.cosh(),
                PulseShape::Gaussian => peak * (-0.5 * x * x).exp(),
            };
            C64::new(a, 0.0)
        })
        .collect();
    SampledField::new(grid.t0, grid.dt, envelope, spec.carrier_detuning_radps)
}

/// Apply a quadratic spectral phase to the envelope.
///
/// The spectrum is multiplied by `exp(−i·gdd·ω²/2)` under the forward-FFT
/// convention `E(ω) = Σ E(t)·e^{−iωt}`, which makes positive `gdd` an
/// up-chirp. Energy is conserved exactly by the discrete transform.
pub fn apply_gdd(field: &SampledField, gdd_ps2: f64) -> Result<SampledField> {
    if !gdd_ps2.is_finite() {
        return Err(Error::invalid("gdd_ps2", "must be finite"));
    }
    if gdd_ps2 == 0.0 {
        return Ok(field.clone());
    }
    let n = field.len();
    let mut buf = field.envelope.clone();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let dw = 2.0 * PI / (n as f64 * field.dt);
    for (k, z) in buf.iter_mut().enumerate() {
        let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let w = m * dw;
        *z *= C64::from_polar(1.0, -0.5 * gdd_ps2 * w * w);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);

    let out = SampledField {
        envelope: buf,
        ..field.clone()
    };
    if out.edge_level() > ALIASING_LEVEL {
        let input_fwhm = field.intensity_fwhm();
        return Err(Error::GridTooSmall {
            what: "stretched pulse",
            required_ps: 16.0 * stretched_fwhm_estimate(input_fwhm, gdd_ps2),
            actual_ps: field.grid().span(),
        });
    }
    Ok(out)
}

/// Pulse area `∫|Ω(t)| dt` (trapezoidal), in radians.
pub fn pulse_area(field: &SampledField) -> f64 {
    trapezoid(field.envelope.iter().map(|z| z.norm()), field.dt)
}

/// Instantaneous detuning `Δ(t) = Δ₀ + dφ/dt` with the default amplitude
/// floor.
pub fn instantaneous_detuning(field: &SampledField) -> Result<Vec<f64>> {
    instantaneous_detuning_with_floor(field, PHASE_FLOOR)
}

/// Instantaneous detuning from central differences of the envelope phase.
///
/// Where `|Ω|` is below `floor × peak` the phase derivative carries no
/// information; there the detuning follows a least-squares linear fit to
/// the values inside the window. Phase steps above π/2 per sample inside
/// the window are rejected as undersampling.
pub fn instantaneous_detuning_with_floor(field: &SampledField, floor: f64) -> Result<Vec<f64>> {
    let n = field.len();
    let d0 = field.carrier_detuning;
    let peak = field.peak();
    if peak == 0.0 {
        return Ok(vec![d0; n]);
    }
    let level = floor * peak;
    let env = &field.envelope;
    let inside: Vec<bool> = env.iter().map(|z| z.norm() >= level).collect();

    let mut detuning = vec![f64::NAN; n];
    let (mut st, mut stt, mut sd, mut std_, mut count) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..n - 1 {
        if !(inside[k - 1] && inside[k] && inside[k + 1]) {
            continue;
        }
        let fwd = (env[k + 1] * env[k].conj()).arg();
        let bwd = (env[k] * env[k - 1].conj()).arg();
        for step in [fwd, bwd] {
            if step.abs() > 0.5 * PI {
                return Err(Error::PhaseUnwrap {
                    t_ps: field.time(k),
                    step,
                });
            }
        }
        let d = d0 + (fwd + bwd) / (2.0 * field.dt);
        detuning[k] = d;
        let t = field.time(k);
        st += t;
        stt += t * t;
        sd += d;
        std_ += t * d;
        count += 1.0;
    }

    let (slope, intercept) = if count >= 2.0 {
        let denom = count * stt - st * st;
        if denom.abs() > 0.0 {
            let slope = (count * std_ - st * sd) / denom;
            (slope, (sd - slope * st) / count)
        } else {
            (0.0, sd / count)
        }
    } else if count == 1.0 {
        (0.0, sd)
    } else {
        (0.0, d0)
    };
    for (k, d) in detuning.iter_mut().enumerate() {
        if d.is_nan() {
            *d = intercept + slope * field.time(k);
        }
    }
    Ok(detuning)
}

/// Parallel grating-pair stretcher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StretcherGeometry {
    pub groove_density_per_mm: f64,
    pub wavelength_nm: f64,
    pub incidence_angle_deg: f64,
    /// Perpendicular distance between the gratings.
    pub effective_separation_mm: f64,
    #[serde(default)]
    pub telescope_inserted: bool,
}

impl StretcherGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.groove_density_per_mm > 0.0) {
            return Err(Error::invalid("groove_density_per_mm", "must be positive"));
        }
        if !(self.wavelength_nm > 0.0) {
            return Err(Error::invalid("wavelength_nm", "must be positive"));
        }
        if !(self.effective_separation_mm >= 0.0) {
            return Err(Error::invalid("effective_separation_mm", "must be non-negative"));
        }
        if !self.incidence_angle_deg.is_finite() {
            return Err(Error::invalid("incidence_angle_deg", "must be finite"));
        }
        Ok(())
    }

    /// Sine of the first-order diffraction angle, `λ/d − sin θ_i`.
    pub fn sin_diffraction(&self) -> f64 {
        let lambda_mm = self.wavelength_nm * 1e-6;
        lambda_mm * self.groove_density_per_mm - self.incidence_angle_deg.to_radians().sin()
    }

    /// GDD per millimetre of separation for the bare pair (negative), ps²/mm.
    fn gdd_per_mm(&self) -> Result<f64> {
        self.validate()?;
        let s = self.sin_diffraction();
        if s.abs() > 1.0 {
            return Err(Error::EvanescentOrder { sin_theta: s });
        }
        let cos_d = (1.0 - s * s).sqrt();
        if cos_d == 0.0 {
            return Err(Error::EvanescentOrder { sin_theta: s });
        }
        let lambda = self.wavelength_nm * 1e-6;
        let d = 1.0 / self.groove_density_per_mm;
        Ok(-lambda.powi(3) / (2.0 * PI * C_MM_PER_PS * C_MM_PER_PS * d * d * cos_d.powi(3)))
    }
}

/// Group-delay dispersion of a single pass through a parallel grating pair
/// (Treacy), ps².
///
/// `GDD = −λ³·G / (2π·c²·d²·cos³θ_d)`, negative for the bare pair. An
/// imaging telescope between the gratings inverts the effective separation
/// and flips the sign.
pub fn treacy_gdd(geom: &StretcherGeometry) -> Result<f64> {
    let bare = geom.gdd_per_mm()? * geom.effective_separation_mm;
    Ok(if geom.telescope_inserted { -bare } else { bare })
}

/// Separation (mm) at which `geom` produces `|GDD| = |target_ps2|`.
pub fn separation_for_gdd(geom: &StretcherGeometry, target_ps2: f64) -> Result<f64> {
    Ok(target_ps2.abs() / geom.gdd_per_mm()?.abs())
}
