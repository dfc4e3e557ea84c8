//! Levenberg–Marquardt fit of a Voigt line plus constant baseline.
//!
//! Widths are fitted as logarithms so they stay positive; a floor of
//! `1e-6` of the initial FWHM stops a vanishing component from running off
//! to `-inf`. Uncertainties come from the curvature in the physical
//! parameters at the optimum.

use serde::Serialize;

use super::{voigt_fwhm, voigt_unit, Spectrum, VoigtParams};
use crate::error::{Error, Result};

const MIN_POINTS: usize = 20;
const MIN_SPAN_FWHM: f64 = 3.0;
const WIDTH_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once the relative change of χ² and of every parameter drops
    /// below this.
    pub tolerance: f64,
    /// Fit a constant baseline; otherwise it is held at zero.
    pub fit_baseline: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            tolerance: 1e-8,
            fit_baseline: true,
        }
    }
}

/// One-sigma uncertainties, same layout as [`VoigtParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VoigtSigma {
    pub center_ghz: f64,
    pub lorentzian_fwhm_ghz: f64,
    pub gaussian_fwhm_ghz: f64,
    pub amplitude: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoigtFit {
    pub params: VoigtParams,
    pub sigma: VoigtSigma,
    pub fwhm_ghz: f64,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    /// False when the iteration limit was hit first.
    pub converged: bool,
    pub iterations: usize,
    /// Absent when the residuals do not take both signs (an exact fit).
    pub residual_runs: Option<RunsTest>,
}

/// Wald–Wolfowitz runs test on residual signs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunsTest {
    pub runs: usize,
    pub expected: f64,
    pub sigma: f64,
    /// `(runs − expected)/sigma`; strongly negative means structured residuals.
    pub z: f64,
}

/// Zero residuals are skipped.
pub fn runs_test(residuals: &[f64]) -> Result<RunsTest> {
    let signs: Vec<bool> = residuals.iter().filter(|r| **r != 0.0).map(|r| *r > 0.0).collect();
    let pos = signs.iter().filter(|s| **s).count() as f64;
    let neg = signs.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::Undefined("runs test needs residuals of both signs".into()));
    }
    let runs = 1 + signs.windows(2).filter(|w| w[0] != w[1]).count();
    let n = pos + neg;
    let expected = 2.0 * pos * neg / n + 1.0;
    let var = 2.0 * pos * neg * (2.0 * pos * neg - n) / (n * n * (n - 1.0));
    let sigma = var.sqrt();
    Ok(RunsTest {
        runs,
        expected,
        sigma,
        z: if sigma > 0.0 { (runs as f64 - expected) / sigma } else { 0.0 },
    })
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    weight: Vec<f64>,
    free: Vec<usize>,
}

/// Internal parameters: centre, ln ΓL, ln ΓG, amplitude, baseline.
fn physical(theta: &[f64; 5]) -> VoigtParams {
    VoigtParams {
        center_ghz: theta[0],
        lorentzian_fwhm_ghz: theta[1].exp(),
        gaussian_fwhm_ghz: theta[2].exp(),
        amplitude: theta[3],
        baseline: theta[4],
    }
}

fn model(p: &[f64; 5], nu: f64) -> f64 {
    p[4] + p[3] * voigt_unit(nu - p[0], p[1], p[2])
}

impl Problem<'_> {
    fn residuals(&self, theta: &[f64; 5]) -> Vec<f64> {
        let p = physical(theta);
        let q = [p.center_ghz, p.lorentzian_fwhm_ghz, p.gaussian_fwhm_ghz, p.amplitude, p.baseline];
        self.x
            .iter()
            .zip(self.y)
            .zip(&self.weight)
            .map(|((&nu, &y), &w)| (y - model(&q, nu)) * w)
            .collect()
    }

    fn chi2(&self, theta: &[f64; 5]) -> f64 {
        self.residuals(theta).iter().map(|r| r * r).sum()
    }

    /// Jacobian of the weighted model (not the residual) in the free
    /// parameters, central differences.
    fn jacobian(&self, theta: &[f64; 5], steps: &[f64; 5]) -> Vec<Vec<f64>> {
        self.free
            .iter()
            .map(|&j| {
                let (mut up, mut dn) = (*theta, *theta);
                up[j] += steps[j];
                dn[j] -= steps[j];
                let (ru, rd) = (self.residuals(&up), self.residuals(&dn));
                ru.iter().zip(&rd).map(|(a, b)| (b - a) / (2.0 * steps[j])).collect()
            })
            .collect()
    }
}

fn normal_equations(jac: &[Vec<f64>], res: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = jac.len();
    let mut a = vec![vec![0.0; k]; k];
    let mut g = vec![0.0; k];
    for i in 0..k {
        g[i] = jac[i].iter().zip(res).map(|(x, r)| x * r).sum();
        for j in 0..=i {
            let v: f64 = jac[i].iter().zip(&jac[j]).map(|(x, y)| x * y).sum();
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    (a, g)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if !(a[p][c].abs() > 0.0) {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Diagonal of the inverse, computed on the Jacobi-scaled matrix.
fn inverse_diagonal(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let d: Vec<f64> = (0..n).map(|i| a[i][i].sqrt()).collect();
    let mut out = vec![f64::INFINITY; n];
    if d.iter().any(|v| !(*v > 0.0)) {
        return out;
    }
    let scaled: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[i][j] / (d[i] * d[j])).collect()).collect();
    for (i, o) in out.iter_mut().enumerate() {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        if let Some(col) = solve(scaled.clone(), e) {
            *o = col[i] / (d[i] * d[i]);
        }
    }
    out
}

struct Guess {
    theta: [f64; 5],
    fwhm: f64,
}

fn initial_guess(s: &Spectrum, fit_baseline: bool) -> Result<Guess> {
    let (x, y) = (&s.freq_ghz, &s.intensity);
    let baseline = if fit_baseline {
        let mut sorted = y.clone();
        sorted.sort_by(f64::total_cmp);
        let k = (sorted.len() / 10).max(1);
        sorted[..k].iter().sum::<f64>() / k as f64
    } else {
        0.0
    };
    let (imax, ymax) = y
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty spectrum");
    let height = ymax - baseline;
    if !(height > 0.0) {
        return Err(Error::Undefined("spectrum has no peak above its baseline".into()));
    }
    let half = baseline + 0.5 * height;
    let mut lo = imax;
    while lo > 0 && y[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < y.len() && y[hi + 1] > half {
        hi += 1;
    }
    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let fwhm = (x[hi] - x[lo]).max(2.0 * step);
    let span = x[x.len() - 1] - x[0];
    if span < MIN_SPAN_FWHM * fwhm {
        return Err(Error::invalid(
            "spectrum",
            format!("frequency span {span:.4} GHz covers less than {MIN_SPAN_FWHM} line widths ({fwhm:.4} GHz)"),
        ));
    }
    let w = fwhm / voigt_fwhm(1.0, 1.0);
    let amplitude = height / voigt_unit(0.0, w, w);
    Ok(Guess {
        theta: [x[imax], w.ln(), w.ln(), amplitude, baseline],
        fwhm,
    })
}

/// Least-squares Voigt fit. Points are weighted by `1/sigma²` when the
/// spectrum carries uncertainties; otherwise parameter errors are scaled by
/// the residual variance.
pub fn fit_voigt(s: &Spectrum, opts: &FitOptions) -> Result<VoigtFit> {
    s.validate()?;
    if s.len() < MIN_POINTS {
        return Err(Error::invalid("spectrum", format!("need at least {MIN_POINTS} points, got {}", s.len())));
    }
    if !(opts.tolerance > 0.0) || opts.max_iterations == 0 {
        return Err(Error::invalid("tolerance", "tolerance and iteration limit must be positive"));
    }
    let guess = initial_guess(s, opts.fit_baseline)?;
    let weight = match &s.sigma {
        Some(sig) => sig.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; s.len()],
    };
    let free: Vec<usize> = if opts.fit_baseline { (0..5).collect() } else { (0..4).collect() };
    let prob = Problem {
        x: &s.freq_ghz,
        y: &s.intensity,
        weight,
        free,
    };
    let floor = (WIDTH_FLOOR * guess.fwhm).ln();
    let peak = s.intensity.iter().copied().fold(0.0, f64::max);
    let scale = [guess.fwhm, 1.0, 1.0, guess.theta[3].abs(), peak];
    let steps = scale.map(|v| 1e-6 * v);

    let mut theta = guess.theta;
    let mut chi2 = prob.chi2(&theta);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = prob.jacobian(&theta, &steps);
        let res = prob.residuals(&theta);
        let (a, g) = normal_equations(&jac, &res);
        let mut accepted = None;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * a[i][i].max(1e-300);
            }
            if let Some(delta) = solve(damped, g.clone()) {
                let mut trial = theta;
                for (k, &j) in prob.free.iter().enumerate() {
                    trial[j] += delta[k];
                }
                trial[1] = trial[1].max(floor);
                trial[2] = trial[2].max(floor);
                let c = prob.chi2(&trial);
                if c.is_finite() && c <= chi2 {
                    accepted = Some((trial, c));
                    lambda = (lambda / 10.0).max(1e-12);
                    break;
                }
            }
            lambda *= 10.0;
        }
        let Some((trial, c)) = accepted else {
            // no downhill step left at any damping
            converged = true;
            break;
        };
        let dchi = (chi2 - c) / chi2.max(f64::MIN_POSITIVE);
        let dpar = (0..5)
            .map(|j| (trial[j] - theta[j]).abs() / scale[j].max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        theta = trial;
        chi2 = c;
        if dchi < opts.tolerance && dpar < opts.tolerance.sqrt() {
            converged = true;
            break;
        }
    }

    let params = physical(&theta);
    let dof = s.len() - prob.free.len();
    let reduced_chi2 = chi2 / dof as f64;
    let sigma = covariance_sigmas(&prob, &params, guess.fwhm, peak, if s.sigma.is_some() { 1.0 } else { reduced_chi2 });
    let residuals: Vec<f64> = s
        .freq_ghz
        .iter()
        .zip(&s.intensity)
        .map(|(&nu, &y)| y - params.eval(nu))
        .collect();
    Ok(VoigtFit {
        params,
        sigma,
        fwhm_ghz: params.fwhm(),
        chi2,
        dof,
        reduced_chi2,
        converged,
        iterations,
        residual_runs: runs_test(&residuals).ok(),
    })
}

/// Parameter uncertainties from the curvature in the physical parameters.
/// A width sitting near zero is differenced one-sidedly.
fn covariance_sigmas(prob: &Problem, p: &VoigtParams, fwhm: f64, peak: f64, s2: f64) -> VoigtSigma {
    let q = [p.center_ghz, p.lorentzian_fwhm_ghz, p.gaussian_fwhm_ghz, p.amplitude, p.baseline];
    let h = [1e-5 * fwhm, 1e-5 * fwhm, 1e-5 * fwhm, 1e-6 * p.amplitude.abs().max(f64::MIN_POSITIVE), 1e-6 * peak];
    let eval = |q: &[f64; 5]| -> Vec<f64> {
        prob.x
            .iter()
            .zip(&prob.weight)
            .map(|(&nu, &w)| model(q, nu) * w)
            .collect()
    };
    let jac: Vec<Vec<f64>> = prob
        .free
        .iter()
        .map(|&j| {
            let (mut up, mut dn) = (q, q);
            up[j] += h[j];
            let one_sided = (j == 1 || j == 2) && q[j] < 2.0 * h[j];
            if !one_sided {
                dn[j] -= h[j];
            }
            let (fu, fd) = (eval(&up), eval(&dn));
            let span = if one_sided { h[j] } else { 2.0 * h[j] };
            fu.iter().zip(&fd).map(|(a, b)| (a - b) / span).collect()
        })
        .collect();
    let (a, _) = normal_equations(&jac, &vec![0.0; prob.x.len()]);
    let diag = inverse_diagonal(&a);
    let mut out = [0.0; 5];
    for (k, &j) in prob.free.iter().enumerate() {
        out[j] = (s2 * diag[k]).sqrt();
    }
    VoigtSigma {
        center_ghz: out[0],
        lorentzian_fwhm_ghz: out[1],
        gaussian_fwhm_ghz: out[2],
        amplitude: out[3],
        baseline: out[4],
    }
}
