//! JSON run configuration.
//!
//! Every section is optional at parse time; each subcommand demands the
//! ones it needs. Unknown keys are rejected, and every error names the
//! offending key as a dotted path such as `pulse.fwhm_ps`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{SystemParams, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::photonstats::{
    HomGeometry, Measured, SourceModel, DEFAULT_SIDE_PEAKS, DEFAULT_WINDOW_NS,
};
use crate::pulse::{PulseSpec, StretcherGeometry};
use crate::spectra::VoigtParams;
use crate::sweep::{linspace, ModulationSpec};
use crate::units;

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 12345;

/// Bundled configuration holding the published experimental constants.
pub const BUNDLED_DEFAULTS: &str = include_str!("defaults.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub pulse: Option<PulseSpec>,
    #[serde(default)]
    pub stretcher: Option<StretcherGeometry>,
    #[serde(default)]
    pub system: Option<SystemParams>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub modulation: Option<ModulationSpec>,
    #[serde(default)]
    pub source: Option<SourceConfig>,
    #[serde(default)]
    pub hbt: Option<HbtConfig>,
    #[serde(default)]
    pub hom: Option<HomConfig>,
    #[serde(default)]
    pub g2: Option<G2Config>,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Local error tolerance of the master-equation integrator.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

/// Either an explicit list or an evenly spaced inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range(GridRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range(r) => linspace(r.start, r.stop, r.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub areas_pi: Grid,
    #[serde(default)]
    pub gdds_ps2: Option<Grid>,
    /// Detected counts per unit excitation, added as a `counts` column.
    #[serde(default)]
    pub counts_per_population: Option<f64>,
}

/// Phenomenological photon source. With `jump_trajectories` set, the
/// photon-number distribution is instead measured from that many
/// quantum-jump trajectories of the configured pulse and system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default = "one")]
    pub p_emit: f64,
    #[serde(default)]
    pub g2: f64,
    #[serde(default = "one")]
    pub overlap: f64,
    #[serde(default = "one")]
    pub efficiency: f64,
    #[serde(default = "default_rep_rate")]
    pub rep_rate_mhz: f64,
    /// Defaults to the inverse radiative rate of `system`, else 0.39 GHz.
    #[serde(default)]
    pub lifetime_ns: Option<f64>,
    #[serde(default)]
    pub jump_trajectories: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn default_rep_rate() -> f64 {
    82.0
}

impl SourceConfig {
    /// Source with the configured number distribution; `counts` overrides
    /// `p_emit` and `g2` when given.
    pub fn model(&self, system: Option<&SystemParams>, counts: Option<&[u32]>) -> Result<SourceModel> {
        if !(self.rep_rate_mhz > 0.0 && self.rep_rate_mhz.is_finite()) {
            return Err(Error::invalid("source.rep_rate_mhz", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_emit) {
            return Err(Error::invalid("source.p_emit", "must lie in [0, 1]"));
        }
        let base = match counts {
            Some(c) => SourceModel::from_photon_counts(c)?,
            None => SourceModel::single_photon(self.p_emit).with_target_g2(self.g2)?,
        };
        let lifetime_ns = match (self.lifetime_ns, system) {
            (Some(l), _) => l,
            (None, Some(s)) if s.radiative_rate_per_ps > 0.0 => 1e-3 / s.radiative_rate_per_ps,
            _ => base.lifetime_ns,
        };
        let model = SourceModel {
            rep_period_ns: units::period_ns_from_mhz(self.rep_rate_mhz),
            lifetime_ns,
            ..base.with_overlap(self.overlap).with_efficiency(self.efficiency)
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtConfig {
    pub n_pulses: u64,
    #[serde(default = "default_window")]
    pub window_ns: f64,
    #[serde(default = "default_side_peaks")]
    pub n_side_peaks: usize,
}

fn default_window() -> f64 {
    DEFAULT_WINDOW_NS
}

fn default_side_peaks() -> usize {
    DEFAULT_SIDE_PEAKS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomConfig {
    pub n_periods: u64,
    #[serde(default = "four")]
    pub pulse_separation_ns: f64,
    #[serde(default = "four")]
    pub mz_delay_ns: f64,
    #[serde(default = "one")]
    pub mz_visibility: f64,
    #[serde(default)]
    pub mz_visibility_sigma: f64,
    #[serde(default = "default_window")]
    pub window_ns: f64,
    /// g²(0) used in the correction; defaults to the source model's value.
    #[serde(default)]
    pub correction_g2: Option<Measured>,
}

fn four() -> f64 {
    4.0
}

impl HomConfig {
    pub fn geometry(&self) -> HomGeometry {
        HomGeometry {
            pulse_separation_ns: self.pulse_separation_ns,
            mz_delay_ns: self.mz_delay_ns,
            mz_visibility: self.mz_visibility,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Config {
    /// Coincidence histogram, CSV or JSON table.
    pub histogram: PathBuf,
    #[serde(default = "default_window")]
    pub window_ns: f64,
    #[serde(default = "default_side_peaks")]
    pub n_side_peaks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    /// Measured spectrum to fit, CSV or JSON table; ignored when `synth`
    /// is present.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "yes")]
    pub fit: bool,
    #[serde(default = "yes")]
    pub fit_baseline: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub params: VoigtParams,
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub n_points: usize,
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            format: Format::Csv,
        }
    }
}

/// Recursively merge `patch` into `base`: objects merge key by key, every
/// other value replaces.
pub fn deep_merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let mut path = e.path().to_string();
    let reason = e.inner().to_string();
    // name the missing key itself rather than its parent
    if let Some(rest) = reason.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
        }
    }
    let reason = reason.split(" at line ").next().unwrap_or(&reason).to_string();
    Error::Config { path, reason }
}

impl RunConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        serde_path_to_error::deserialize(value).map_err(parse_error)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config {
            path: ".".into(),
            reason: format!("not valid JSON: {e}"),
        })?;
        Self::from_value(value)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_DEFAULTS).expect("bundled defaults parse")
    }

    /// Bundled defaults (optional) overlaid by the file at `path`
    /// (optional).
    pub fn load(path: Option<&Path>, bundled_defaults: bool) -> Result<Self> {
        let mut value = if bundled_defaults {
            serde_json::from_str(BUNDLED_DEFAULTS).expect("bundled defaults parse")
        } else {
            Value::Object(Default::default())
        };
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config {
                path: ".".into(),
                reason: format!("cannot read {}: {e}", p.display()),
            })?;
            let patch: Value = serde_json::from_str(&text).map_err(|e| Error::Config {
                path: ".".into(),
                reason: format!("{} is not valid JSON: {e}", p.display()),
            })?;
            if !patch.is_object() {
                return Err(Error::Config {
                    path: ".".into(),
                    reason: "top level must be a JSON object".into(),
                });
            }
            deep_merge(&mut value, patch);
        }
        Self::from_value(value)
    }

    pub fn require<'a, T>(section: &'static str, value: &'a Option<T>) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::Config {
            path: section.into(),
            reason: "section is required for this subcommand".into(),
        })
    }

    pub fn pulse(&self) -> Result<PulseSpec> {
        let p = *Self::require("pulse", &self.pulse)?;
        in_section("pulse", p.validate())?;
        Ok(p)
    }

    pub fn system(&self) -> Result<SystemParams> {
        let s = *Self::require("system", &self.system)?;
        in_section("system", s.validate())?;
        Ok(s)
    }

    pub fn tolerance(&self) -> Result<f64> {
        if !(self.tolerance > 0.0 && self.tolerance < 1e-2) {
            return Err(Error::Config {
                path: "tolerance".into(),
                reason: format!("must lie in (0, 1e-2), got {}", self.tolerance),
            });
        }
        Ok(self.tolerance)
    }
}

/// Rewrite a parameter error as a configuration error under `section`.
pub fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, reason } => {
            let last = section.rsplit('.').next().unwrap_or(section);
            let path = match name.strip_prefix(last).and_then(|r| r.strip_prefix('.')) {
                Some(rest) => format!("{section}.{rest}"),
                None => format!("{section}.{name}"),
            };
            Error::Config { path, reason }
        }
        other => other,
    })
}
