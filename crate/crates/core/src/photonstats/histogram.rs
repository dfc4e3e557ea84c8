use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Start-stop coincidence histogram with bins centred on `k·bin_width`,
/// `k = −half_bins..=half_bins`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ns: f64,
    pub rep_period_ns: f64,
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    /// Empty histogram covering at least `±range_ns`.
    pub fn new(bin_width_ns: f64, rep_period_ns: f64, range_ns: f64) -> Result<Self> {
        if !(bin_width_ns > 0.0 && bin_width_ns.is_finite()) {
            return Err(Error::invalid("bin_width_ns", "must be positive"));
        }
        if !(rep_period_ns > 0.0 && rep_period_ns.is_finite()) {
            return Err(Error::invalid("rep_period_ns", "must be positive"));
        }
        if !(range_ns > 0.0 && range_ns.is_finite()) {
            return Err(Error::invalid("range_ns", "must be positive"));
        }
        let half = (range_ns / bin_width_ns).ceil() as usize;
        Ok(CoincidenceHistogram {
            bin_width_ns,
            rep_period_ns,
            counts: vec![0; 2 * half + 1],
        })
    }

    pub fn half_bins(&self) -> usize {
        self.counts.len() / 2
    }

    pub fn range_ns(&self) -> f64 {
        self.half_bins() as f64 * self.bin_width_ns
    }

    pub fn delays(&self) -> Vec<f64> {
        let half = self.half_bins() as f64;
        (0..self.counts.len())
            .map(|i| (i as f64 - half) * self.bin_width_ns)
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin index for a delay, or `None` outside the histogram.
    pub fn bin_of(&self, delay_ns: f64) -> Option<usize> {
        let k = (delay_ns / self.bin_width_ns).round();
        let half = self.half_bins() as f64;
        if k.abs() <= half {
            Some((k + half) as usize)
        } else {
            None
        }
    }

    pub fn record(&mut self, delay_ns: f64) {
        if let Some(i) = self.bin_of(delay_ns) {
            self.counts[i] += 1;
        }
    }

    /// Sum of counts in bins whose centres lie within `center ± window/2`.
    pub fn integrate(&self, center_ns: f64, window_ns: f64) -> u64 {
        let lo = center_ns - 0.5 * window_ns;
        let hi = center_ns + 0.5 * window_ns;
        let slack = 1e-9 * self.bin_width_ns;
        self.delays()
            .iter()
            .zip(&self.counts)
            .filter(|(d, _)| **d >= lo - slack && **d <= hi + slack)
            .map(|(_, c)| *c)
            .sum()
    }

    pub fn add(&mut self, other: &CoincidenceHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn scaled(&self, factor: u64) -> CoincidenceHistogram {
        CoincidenceHistogram {
            counts: self.counts.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    pub fn same_binning(&self, other: &CoincidenceHistogram) -> bool {
        self.counts.len() == other.counts.len()
            && (self.bin_width_ns - other.bin_width_ns).abs() <= 1e-12 * self.bin_width_ns
            && (self.rep_period_ns - other.rep_period_ns).abs() <= 1e-12 * self.rep_period_ns
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# bin_width_ns={}", self.bin_width_ns)?;
        writeln!(out, "# rep_period_ns={}", self.rep_period_ns)?;
        writeln!(out, "delay_ns,counts")?;
        for (d, c) in self.delays().iter().zip(&self.counts) {
            writeln!(out, "{d},{c}")?;
        }
        Ok(())
    }

    /// Parse the format written by [`write_csv`](Self::write_csv). Delays
    /// must be uniform, ascending and symmetric about zero.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut bin_width = None;
        let mut rep_period = None;
        let mut delays = Vec::new();
        let mut counts = Vec::new();
        let mut seen_header = false;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once('=') {
                    let v: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("line {}: bad value for {}", n + 1, key.trim())))?;
                    match key.trim() {
                        "bin_width_ns" => bin_width = Some(v),
                        "rep_period_ns" => rep_period = Some(v),
                        _ => {}
                    }
                }
                continue;
            }
            if !seen_header {
                if line != "delay_ns,counts" {
                    return Err(Error::Parse(format!("line {}: expected header `delay_ns,counts`", n + 1)));
                }
                seen_header = true;
                continue;
            }
            let (d, c) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", n + 1)))?;
            delays.push(
                d.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad delay", n + 1)))?,
            );
            counts.push(
                c.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Parse(format!("line {}: counts must be non-negative integers", n + 1)))?,
            );
        }
        let rep_period = rep_period.ok_or_else(|| Error::Parse("missing `# rep_period_ns=` line".into()))?;
        if delays.len() < 3 || delays.len() % 2 == 0 {
            return Err(Error::Parse("need an odd number (≥ 3) of bins symmetric about zero".into()));
        }
        let width = bin_width.unwrap_or(delays[1] - delays[0]);
        let half = (delays.len() / 2) as f64;
        for (i, d) in delays.iter().enumerate() {
            let expect = (i as f64 - half) * width;
            if (d - expect).abs() > 1e-6 * width.max(1.0) {
                return Err(Error::Parse(format!(
                    "delay {d} at row {} breaks the uniform grid symmetric about zero",
                    i + 1
                )));
            }
        }
        let mut h = CoincidenceHistogram::new(width, rep_period, half * width)?;
        h.counts = counts;
        Ok(h)
    }
}
