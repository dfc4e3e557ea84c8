//! Experiment-level runs: power scans, chirp × area maps and
//! robustness traces under slow laser-power modulation.
//!
//! Every grid point is an independent pulse evaluation. Points run in
//! parallel and results are assembled in grid order, so output does not
//! depend on the thread count.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, SystemParams};
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;

/// Pulse template, grids and system for a scan. The template's own
/// `area_pi` is ignored; `power_scan` keeps its `gdd_ps2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub pulse: PulseSpec,
    pub areas_pi: Vec<f64>,
    pub gdds_ps2: Vec<f64>,
    pub system: SystemParams,
    pub tolerance: f64,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.system.validate()?;
        if self.areas_pi.is_empty() {
            return Err(Error::invalid("scan.areas_pi", "grid is empty"));
        }
        if self.areas_pi.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid("scan.areas_pi", "areas must be finite and non-negative"));
        }
        if self.gdds_ps2.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("scan.gdds_ps2", "must be finite"));
        }
        Ok(())
    }
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Excitation created by one pulse: `P_e(end) + Γ∫P_e dt`.
///
/// Radiative decay on the tail of the grid would otherwise make `P_e(end)`
/// depend on the grid length; adding back what was emitted gives the photon
/// number per pulse, which is what a count rate measures. Without decay it
/// is exactly `P_e(end)`.
pub fn excitation_yield(pulse: &PulseSpec, system: &SystemParams, tol: f64) -> Result<f64> {
    if pulse.area_pi == 0.0 && system.initial_state.p_e == 0.0 {
        return Ok(0.0);
    }
    let field = pulse.synthesize()?;
    Ok(evolve(&field, system, tol)?.photon_yield())
}

fn evaluate_all(points: &[PulseSpec], system: &SystemParams, tol: f64) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|p| excitation_yield(p, system, tol))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCurve {
    pub gdd_ps2: f64,
    pub area_pi: Vec<f64>,
    pub p_e: Vec<f64>,
    /// Counts per unit population, for overlay on measured count rates.
    pub counts_per_population: Option<f64>,
}

impl PowerCurve {
    /// Index of the first local maximum along the area axis.
    pub fn first_maximum(&self) -> Option<usize> {
        let p = &self.p_e;
        (0..p.len()).find(|&i| {
            let left = i == 0 || p[i] >= p[i - 1];
            let right = i + 1 == p.len() || p[i] > p[i + 1];
            left && right && (i > 0 || p.len() == 1)
        })
    }

    pub fn argmax(&self) -> usize {
        self.p_e
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self.counts_per_population {
            Some(k) => {
                writeln!(out, "area_pi,p_e,counts")?;
                for (a, p) in self.area_pi.iter().zip(&self.p_e) {
                    writeln!(out, "{a},{p},{}", k * p)?;
                }
            }
            None => {
                writeln!(out, "area_pi,p_e")?;
                for (a, p) in self.area_pi.iter().zip(&self.p_e) {
                    writeln!(out, "{a},{p}")?;
                }
            }
        }
        Ok(())
    }

    /// Reads the `area_pi` and `p_e` columns; the chirp is not stored.
    pub fn read_csv<R: BufRead>(input: R, gdd_ps2: f64) -> Result<Self> {
        let rows = read_numeric_csv(input, &["area_pi", "p_e"])?;
        Ok(PowerCurve {
            gdd_ps2,
            area_pi: rows.iter().map(|r| r[0]).collect(),
            p_e: rows.iter().map(|r| r[1]).collect(),
            counts_per_population: None,
        })
    }
}

/// Parse a CSV whose header starts with `expected`; extra columns are
/// ignored.
fn read_numeric_csv<R: BufRead>(input: R, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < expected.len() || cols[..expected.len()] != *expected {
        return Err(Error::Parse(format!("expected header starting `{}`", expected.join(","))));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .trim()
            .split(',')
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: `{c}` is not a number", n + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != cols.len() {
            return Err(Error::Parse(format!("line {}: wrong number of columns", n + 2)));
        }
        rows.push(vals);
    }
    Ok(rows)
}

/// `P_e(end)` along the area grid at the template's chirp.
pub fn power_scan(spec: &ScanSpec) -> Result<PowerCurve> {
    spec.validate()?;
    let points: Vec<PulseSpec> = spec.areas_pi.iter().map(|&a| spec.pulse.with_area(a)).collect();
    Ok(PowerCurve {
        gdd_ps2: spec.pulse.gdd_ps2,
        area_pi: spec.areas_pi.clone(),
        p_e: evaluate_all(&points, &spec.system, spec.tolerance)?,
        counts_per_population: None,
    })
}

/// `P_e(end)` over the chirp × area grid: rows are chirps, columns areas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChirpAreaMap {
    pub gdd_ps2: Vec<f64>,
    pub area_pi: Vec<f64>,
    pub p_e: Vec<Vec<f64>>,
}

impl ChirpAreaMap {
    pub fn row(&self, gdd: f64) -> Option<&[f64]> {
        self.gdd_ps2.iter().position(|g| *g == gdd).map(|i| self.p_e[i].as_slice())
    }

    pub fn column_index(&self, area: f64) -> Option<usize> {
        self.area_pi.iter().position(|a| (a - area).abs() < 1e-9)
    }

    /// Header row `gdd_ps2\area_pi,a₁,a₂,…`, then one row per chirp.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "gdd_ps2\\area_pi")?;
        for a in &self.area_pi {
            write!(out, ",{a}")?;
        }
        writeln!(out)?;
        for (g, row) in self.gdd_ps2.iter().zip(&self.p_e) {
            write!(out, "{g}")?;
            for p in row {
                write!(out, ",{p}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty map file".into()))??;
        let mut cols = header.trim().split(',');
        if cols.next() != Some("gdd_ps2\\area_pi") {
            return Err(Error::Parse("map header must start with `gdd_ps2\\area_pi`".into()));
        }
        let num = |c: &str| c.parse::<f64>().map_err(|_| Error::Parse(format!("`{c}` is not a number")));
        let area_pi = cols.map(num).collect::<Result<Vec<f64>>>()?;
        let (mut gdd_ps2, mut p_e) = (Vec::new(), Vec::new());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line.trim().split(',').map(num).collect::<Result<Vec<f64>>>()?;
            if vals.len() != area_pi.len() + 1 {
                return Err(Error::Parse("map row length differs from header".into()));
            }
            gdd_ps2.push(vals[0]);
            p_e.push(vals[1..].to_vec());
        }
        Ok(ChirpAreaMap { gdd_ps2, area_pi, p_e })
    }
}

pub fn chirp_area_map(spec: &ScanSpec) -> Result<ChirpAreaMap> {
    spec.validate()?;
    if spec.areas_pi.len() < 2 || spec.gdds_ps2.len() < 2 {
        return Err(Error::invalid("scan", "a map needs at least two areas and two chirps"));
    }
    let points: Vec<PulseSpec> = spec
        .gdds_ps2
        .iter()
        .flat_map(|&g| spec.areas_pi.iter().map(move |&a| spec.pulse.with_gdd(g).with_area(a)))
        .collect();
    let flat = evaluate_all(&points, &spec.system, spec.tolerance)?;
    Ok(ChirpAreaMap {
        gdd_ps2: spec.gdds_ps2.clone(),
        area_pi: spec.areas_pi.clone(),
        p_e: flat.chunks(spec.areas_pi.len()).map(<[f64]>::to_vec).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    Triangle,
}

/// Slow modulation of the laser power around a centre pulse area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSpec {
    pub waveform: Waveform,
    pub frequency_hz: f64,
    /// Peak-to-peak power excursion relative to the mean power.
    pub peak_to_peak_fraction: f64,
    pub center_area_pi: f64,
    pub duration_s: f64,
    pub sampling_hz: f64,
}

impl ModulationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            return Err(Error::invalid("modulation.frequency_hz", "must be positive"));
        }
        if !(0.0..2.0).contains(&self.peak_to_peak_fraction) {
            return Err(Error::invalid("modulation.peak_to_peak_fraction", "must lie in [0, 2)"));
        }
        if !(self.center_area_pi >= 0.0 && self.center_area_pi.is_finite()) {
            return Err(Error::invalid("modulation.center_area_pi", "must be non-negative"));
        }
        if !(self.duration_s > 0.0 && self.sampling_hz > 0.0) {
            return Err(Error::invalid("modulation.duration_s", "duration and sampling rate must be positive"));
        }
        let n = self.duration_s * self.sampling_hz;
        if n > 1e6 {
            return Err(Error::invalid("modulation.sampling_hz", format!("{n:.0} samples is too many")));
        }
        Ok(())
    }

    /// Unit triangle wave: 0 at `t = 0`, rising to +1 a quarter period later.
    fn shape(&self, t: f64) -> f64 {
        let x = (self.frequency_hz * t).rem_euclid(1.0);
        match self.waveform {
            Waveform::Triangle => {
                if x < 0.25 {
                    4.0 * x
                } else if x < 0.75 {
                    2.0 - 4.0 * x
                } else {
                    4.0 * x - 4.0
                }
            }
        }
    }

    /// Pulse area at time `t`; power scales as area².
    pub fn area_at(&self, t: f64) -> f64 {
        let power = 1.0 + 0.5 * self.peak_to_peak_fraction * self.shape(t);
        self.center_area_pi * power.sqrt()
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.duration_s * self.sampling_hz).round() as usize + 1;
        (0..n).map(|k| k as f64 / self.sampling_hz).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessTrace {
    pub t_s: Vec<f64>,
    pub area_pi: Vec<f64>,
    pub p_e: Vec<f64>,
    /// `(max − min)/(max + min)` of `p_e`.
    pub fluctuation: f64,
    pub counts_per_population: Option<f64>,
}

impl RobustnessTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self.counts_per_population {
            Some(k) => {
                writeln!(out, "t_s,area_pi,p_e,counts")?;
                for ((t, a), p) in self.t_s.iter().zip(&self.area_pi).zip(&self.p_e) {
                    writeln!(out, "{t},{a},{p},{}", k * p)?;
                }
            }
            None => {
                writeln!(out, "t_s,area_pi,p_e")?;
                for ((t, a), p) in self.t_s.iter().zip(&self.area_pi).zip(&self.p_e) {
                    writeln!(out, "{t},{a},{p}")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let rows = read_numeric_csv(input, &["t_s", "area_pi", "p_e"])?;
        let p_e: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        Ok(RobustnessTrace {
            t_s: rows.iter().map(|r| r[0]).collect(),
            area_pi: rows.iter().map(|r| r[1]).collect(),
            fluctuation: fluctuation(&p_e),
            p_e,
            counts_per_population: None,
        })
    }
}

pub fn fluctuation(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max + min <= 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    }
}

/// Quasi-static response to the modulation: every sample is an independent
/// pulse at the instantaneous area. Repeated areas are evaluated once.
pub fn robustness_trace(modulation: &ModulationSpec, pulse: &PulseSpec, system: &SystemParams, tol: f64) -> Result<RobustnessTrace> {
    modulation.validate()?;
    pulse.validate()?;
    system.validate()?;
    let t_s = modulation.sample_times();
    let area_pi: Vec<f64> = t_s.iter().map(|&t| modulation.area_at(t)).collect();
    let mut unique: Vec<f64> = area_pi.clone();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    let points: Vec<PulseSpec> = unique.iter().map(|&a| pulse.with_area(a)).collect();
    let values = evaluate_all(&points, system, tol)?;
    let p_e: Vec<f64> = area_pi
        .iter()
        .map(|a| values[unique.binary_search_by(|u| u.total_cmp(a)).expect("area present")])
        .collect();
    Ok(RobustnessTrace {
        t_s,
        area_pi,
        fluctuation: fluctuation(&p_e),
        p_e,
        counts_per_population: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DEFAULT_TOLERANCE;
    use std::f64::consts::PI;

    fn scan(areas: Vec<f64>, gdds: Vec<f64>, system: SystemParams) -> ScanSpec {
        ScanSpec {
            pulse: PulseSpec::sech(3.0, 1.0),
            areas_pi: areas,
            gdds_ps2: gdds,
            system,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    #[test]
    fn closed_rabi_curve_is_sin_squared() {
        let spec = scan(linspace(0.0, 3.0, 13), vec![], SystemParams::closed());
        let curve = power_scan(&spec).unwrap();
        for (a, p) in curve.area_pi.iter().zip(&curve.p_e) {
            assert!((p - (a * PI / 2.0).sin().powi(2)).abs() < 1e-4, "{a}: {p}");
        }
        assert_eq!(curve.area_pi[curve.first_maximum().unwrap()], 1.0);
    }

    #[test]
    fn phonon_rabi_peak_at_pi() {
        let spec = scan(linspace(0.5, 1.5, 21), vec![], SystemParams::quantum_dot());
        let curve = power_scan(&spec).unwrap();
        let i = curve.first_maximum().unwrap();
        assert!((curve.area_pi[i] - 1.0).abs() <= 0.05 + 1e-9, "{}", curve.area_pi[i]);
    }

    #[test]
    fn map_zero_area_column_and_layout() {
        let spec = scan(vec![0.0, 1.0, 2.0], vec![-20.0, 0.0, 20.0], SystemParams::closed());
        let map = chirp_area_map(&spec).unwrap();
        assert_eq!(map.p_e.len(), 3);
        for row in &map.p_e {
            assert_eq!(row[0], 0.0);
        }
        // unchirped row matches the area theorem
        assert!((map.row(0.0).unwrap()[1] - 1.0).abs() < 1e-4);
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        assert_eq!(ChirpAreaMap::read_csv(buf.as_slice()).unwrap(), map);
    }

    #[test]
    fn map_rejects_degenerate_grids() {
        let spec = scan(vec![1.0], vec![0.0, 1.0], SystemParams::closed());
        assert!(chirp_area_map(&spec).is_err());
        let spec = scan(vec![], vec![0.0], SystemParams::closed());
        assert!(power_scan(&spec).is_err());
        let spec = scan(vec![-1.0, 1.0], vec![0.0], SystemParams::closed());
        assert!(power_scan(&spec).is_err());
    }

    #[test]
    fn triangle_waveform() {
        let m = ModulationSpec {
            waveform: Waveform::Triangle,
            frequency_hz: 0.05,
            peak_to_peak_fraction: 0.8,
            center_area_pi: 1.0,
            duration_s: 40.0,
            sampling_hz: 2.0,
        };
        assert_eq!(m.shape(0.0), 0.0);
        assert!((m.shape(5.0) - 1.0).abs() < 1e-12);
        assert!((m.shape(15.0) + 1.0).abs() < 1e-12);
        assert!((m.area_at(5.0) - 1.4f64.sqrt()).abs() < 1e-12);
        assert!((m.area_at(15.0) - 0.6f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.sample_times().len(), 81);
    }

    #[test]
    fn flat_trace_without_modulation() {
        let m = ModulationSpec {
            waveform: Waveform::Triangle,
            frequency_hz: 0.05,
            peak_to_peak_fraction: 0.0,
            center_area_pi: 1.0,
            duration_s: 20.0,
            sampling_hz: 1.0,
        };
        let tr = robustness_trace(&m, &PulseSpec::sech(3.0, 1.0), &SystemParams::quantum_dot(), DEFAULT_TOLERANCE).unwrap();
        assert_eq!(tr.fluctuation, 0.0);
        assert!(tr.p_e.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn trace_csv_round_trip() {
        let m = ModulationSpec {
            waveform: Waveform::Triangle,
            frequency_hz: 0.05,
            peak_to_peak_fraction: 0.8,
            center_area_pi: 1.0,
            duration_s: 20.0,
            sampling_hz: 0.2,
        };
        let tr = robustness_trace(&m, &PulseSpec::sech(3.0, 1.0), &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap();
        // extremes at area 1 (t = 0) and √0.6 (t = 15 s)
        let low = (0.6f64.sqrt() * PI / 2.0).sin().powi(2);
        assert!((tr.fluctuation - (1.0 - low) / (1.0 + low)).abs() < 1e-4, "{}", tr.fluctuation);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(RobustnessTrace::read_csv(buf.as_slice()).unwrap(), tr);
    }

    #[test]
    fn curve_csv_round_trip() {
        let c = PowerCurve {
            gdd_ps2: 0.0,
            area_pi: vec![0.0, 0.5, 1.0],
            p_e: vec![0.0, 0.5, 0.999_999_9],
            counts_per_population: None,
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(PowerCurve::read_csv(buf.as_slice(), 0.0).unwrap(), c);
    }

    #[test]
    fn first_maximum_skips_monotone_start() {
        let c = PowerCurve {
            gdd_ps2: 0.0,
            area_pi: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            p_e: vec![0.0, 0.6, 0.9, 0.2, 0.95],
            counts_per_population: None,
        };
        assert_eq!(c.first_maximum(), Some(2));
        assert_eq!(c.argmax(), 4);
    }
}
