//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Runs without the libtest harness so the lines are
//! always shown.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qdrap::dynamics::{evolve, photons_per_pulse, JumpOptions, SystemParams, DEFAULT_TOLERANCE};
use qdrap::photonstats::{
    correct_visibility, cz_process_fidelity, estimate_g2, simulate_hbt, simulate_hom, CoincidenceHistogram, HomGeometry,
    HomResult, Measured, Polarization, SourceModel, DEFAULT_BIN_NS, DEFAULT_WINDOW_NS,
};
use qdrap::pulse::PulseSpec;
use qdrap::spectra::{fit_voigt, synth_spectrum, FitOptions, VoigtParams};
use qdrap::sweep::{chirp_area_map, linspace, power_scan, robustness_trace, ModulationSpec, ScanSpec, Waveform};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("pulse-area theorem", c1_area_theorem),
        ("Rabi landmark", c2_rabi_landmark),
        ("chirp x area map", c3_chirp_map),
        ("robustness contrast", c4_robustness),
        ("g2 arithmetic and statistics", c5_g2),
        ("HOM chain", c6_hom),
        ("gate fidelity", c7_gate),
        ("Voigt round trip", c8_voigt),
        ("numerical hygiene", c9_hygiene),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict}: {name} [{:.1} s] {}", i + 1, t.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn qd() -> SystemParams {
    SystemParams::quantum_dot()
}

fn c1_area_theorem() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for theta in [0.5, 1.0, 2.0, 3.0] {
        let field = PulseSpec::sech(3.0, theta).synthesize().unwrap();
        let pe = evolve(&field, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap().final_pe();
        worst = worst.max((pe - (theta * PI / 2.0).sin().powi(2)).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst < 1e-4 && secs < 10.0, format!("max |P_e - sin^2(theta/2)| = {worst:.2e}"))
}

fn c2_rabi_landmark() -> Outcome {
    let spec = ScanSpec {
        pulse: PulseSpec::sech(3.0, 1.0),
        areas_pi: linspace(0.0, 3.0, 61),
        gdds_ps2: vec![],
        system: qd(),
        tolerance: DEFAULT_TOLERANCE,
    };
    let c = power_scan(&spec).unwrap();
    match c.first_maximum() {
        Some(i) => {
            let a = c.area_pi[i];
            outcome((a - 1.0).abs() <= 0.05 + 1e-9, format!("first maximum at {a:.2} pi (P_e = {:.4})", c.p_e[i]))
        }
        None => outcome(false, "no interior maximum"),
    }
}

fn c3_chirp_map() -> Outcome {
    let t = Instant::now();
    // the area grid contains 1.5 and 3.0, the chirp grid contains ±32
    let areas: Vec<f64> = (0..40).map(|i| 0.075 * (i + 1) as f64).collect();
    let gdds: Vec<f64> = (0..40).map(|i| (i as f64 - 19.5) * 64.0 / 19.0).collect();
    let spec = ScanSpec {
        pulse: PulseSpec::sech(3.0, 1.0),
        areas_pi: areas.clone(),
        gdds_ps2: gdds.clone(),
        system: qd(),
        tolerance: DEFAULT_TOLERANCE,
    };
    let map = chirp_area_map(&spec).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let nearest = |target: f64| {
        let i = (0..gdds.len())
            .min_by(|&a, &b| (gdds[a] - target).abs().total_cmp(&(gdds[b] - target).abs()))
            .unwrap();
        &map.p_e[i]
    };
    let pos = nearest(32.0);
    let neg = nearest(-32.0);
    let from = map.column_index(1.5).unwrap();
    let to = map.column_index(3.0).unwrap();

    let plateau_min = pos[from..=to].iter().copied().fold(f64::INFINITY, f64::min);
    let plateau = plateau_min >= 0.9;
    let dominates = (from..=to).all(|j| pos[j] >= neg[j]);
    let peak = (0..areas.len()).max_by(|&a, &b| neg[a].total_cmp(&neg[b])).unwrap();
    let peak_area = areas[peak];
    // nearer to 1.5π than to the π or 2π landmarks
    let near = (peak_area - 1.5).abs() < 0.25;
    let lo = peak.max(from);
    let monotone = (lo..to).all(|j| neg[j + 1] <= neg[j]);
    let detail = format!(
        "+32 plateau min {plateau_min:.3} on [1.5, 3] pi ({}); -32 peak {:.3} at {peak_area:.3} pi, needs |peak - 1.5| < 0.25 ({}); \
         -32 decreasing beyond the peak ({}); +32 >= -32 on [1.5, 3] pi ({}); -32 at 3 pi {:.3}; map {secs:.0} s",
        ok(plateau),
        neg[peak],
        ok(near),
        ok(monotone),
        ok(dominates),
        neg[to],
    );
    outcome(plateau && near && monotone && dominates && secs < 600.0, detail)
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "not met"
    }
}

fn c4_robustness() -> Outcome {
    let m = |center| ModulationSpec {
        waveform: Waveform::Triangle,
        frequency_hz: 0.05,
        peak_to_peak_fraction: 0.8,
        center_area_pi: center,
        duration_s: 40.0,
        sampling_hz: 5.0,
    };
    let ro = robustness_trace(&m(1.0), &PulseSpec::sech(3.0, 1.0), &qd(), DEFAULT_TOLERANCE).unwrap();
    let rap = robustness_trace(&m(1.9), &PulseSpec::sech(3.0, 1.0).with_gdd(32.0), &qd(), DEFAULT_TOLERANCE).unwrap();
    let ratio = ro.fluctuation / rap.fluctuation;
    outcome(
        ratio >= 3.0 && rap.fluctuation <= 0.05,
        format!(
            "RO fluctuation {:.4}, RAP fluctuation {:.4}, ratio {ratio:.1}",
            ro.fluctuation, rap.fluctuation
        ),
    )
}

fn c5_g2() -> Outcome {
    let t = 1e3 / 82.0;
    let mut h = CoincidenceHistogram::new(DEFAULT_BIN_NS, t, 4.5 * t).unwrap();
    for k in -4i64..=4 {
        let i = h.bin_of(k as f64 * t).unwrap();
        h.counts[i] = if k == 0 { 36 } else { 12000 };
    }
    let fixture = estimate_g2(&h, DEFAULT_WINDOW_NS, 6).unwrap().g2;
    let exact = fixture == 0.003;

    let start = Instant::now();
    let src = SourceModel::single_photon(1.0).with_target_g2(0.003).unwrap();
    let mc = simulate_hbt(&src, 10_000_000, 2024).unwrap();
    let r = estimate_g2(&mc, DEFAULT_WINDOW_NS, 6).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let within = (r.g2 - 0.003).abs() <= 3.0 * r.sigma;
    outcome(
        exact && within && secs < 60.0,
        format!(
            "fixture g2 = {fixture}; Monte Carlo 1e7 pulses g2 = {:.6} +- {:.6} ({:.1} sigma from 0.003, {secs:.1} s)",
            r.g2,
            r.sigma,
            (r.g2 - 0.003).abs() / r.sigma
        ),
    )
}

fn c6_hom() -> Outcome {
    let src = SourceModel::single_photon(1.0).with_target_g2(0.003).unwrap().with_overlap(0.995);
    let geom = HomGeometry::default().with_mz_visibility(0.995);
    let par = simulate_hom(&src, &geom, Polarization::Parallel, 1_000_000, 7).unwrap();
    let cross = simulate_hom(&src, &geom, Polarization::Cross, 1_000_000, 8).unwrap();
    let r = HomResult::analyze(
        &par,
        &cross,
        DEFAULT_WINDOW_NS,
        &geom,
        Measured::exact(0.003),
        Measured::exact(0.995),
    )
    .unwrap();
    let raw_ok = (r.v_raw.value - 0.979).abs() <= 0.01;
    let corrected = correct_visibility(Measured::new(0.979, 0.006), Measured::new(0.003, 0.002), Measured::exact(0.995))
        .unwrap();
    let corr_ok = (corrected.value - 0.995).abs() <= 0.001;
    outcome(
        raw_ok && corr_ok,
        format!(
            "Monte Carlo v_raw = {:.4} +- {:.4}; corrected(0.979, 0.003, 0.995) = {:.4} +- {:.4}",
            r.v_raw.value, r.v_raw.sigma, corrected.value, corrected.sigma
        ),
    )
}

fn c7_gate() -> Outcome {
    let f1 = cz_process_fidelity(1.0).unwrap();
    let f = cz_process_fidelity(0.995).unwrap();
    let ideal = (f1 - 1.0).abs() <= 1e-10;
    let target = (f - 0.999).abs() <= 0.002;
    // smallest overlap that would reach the lower edge 0.997
    let needed = (4.0 * 0.997 - 1.0) / (1.0 + 2.0 * 0.997);
    outcome(
        ideal && target,
        format!(
            "F(1) = {f1:.12}; F(0.995) = {f:.5}, target 0.999 +- 0.002 ({}); \
             this gate model reaches 0.997 only for overlap >= {needed:.5}",
            ok(target)
        ),
    )
}

fn c8_voigt() -> Outcome {
    let params = VoigtParams {
        center_ghz: 0.0,
        lorentzian_fwhm_ghz: 0.48,
        gaussian_fwhm_ghz: 0.55,
        amplitude: 1.0,
        baseline: 0.0,
    };
    let s = synth_spectrum(&params, -3.0, 3.0, 200, 0.0, 1).unwrap();
    let fit = fit_voigt(&s, &FitOptions::default()).unwrap();
    let el = (fit.params.lorentzian_fwhm_ghz / 0.48 - 1.0).abs();
    let eg = (fit.params.gaussian_fwhm_ghz / 0.55 - 1.0).abs();

    let lorentz = VoigtParams {
        lorentzian_fwhm_ghz: 0.39,
        gaussian_fwhm_ghz: 0.0,
        ..params
    };
    let noisy = synth_spectrum(&lorentz, -3.0, 3.0, 200, 0.02, 5).unwrap();
    let lf = fit_voigt(&noisy, &FitOptions::default()).unwrap();
    let g = lf.params.gaussian_fwhm_ghz;
    let gs = lf.sigma.gaussian_fwhm_ghz;
    let zero = g <= 2.0 * gs;
    outcome(
        el < 0.01 && eg < 0.01 && zero,
        format!(
            "recovered L = {:.4}, G = {:.4} GHz (errors {:.1e}, {:.1e}); Lorentzian input gives G = {g:.4} +- {gs:.4} GHz",
            fit.params.lorentzian_fwhm_ghz, fit.params.gaussian_fwhm_ghz, el, eg
        ),
    )
}

fn c9_hygiene() -> Outcome {
    let mut trace_err: f64 = 0.0;
    let mut min_eig: f64 = 0.0;
    let mut purity: f64 = 0.0;
    let mut runs = 0;
    let areas = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let gdds = [-64.0, -32.0, 0.0, 32.0, 64.0];
    for &g in &gdds {
        for &a in &areas {
            let field = PulseSpec::sech(3.0, a).with_gdd(g).synthesize().unwrap();
            let open = evolve(&field, &qd(), DEFAULT_TOLERANCE).unwrap().hygiene();
            let closed = evolve(&field, &SystemParams::closed(), DEFAULT_TOLERANCE).unwrap().hygiene();
            trace_err = trace_err.max(open.max_trace_error).max(closed.max_trace_error);
            min_eig = min_eig.min(open.min_eigenvalue).min(closed.min_eigenvalue);
            purity = purity.max(closed.max_purity_defect);
            runs += 2;
        }
    }
    let invariants = trace_err <= 1e-9 && min_eig >= -1e-9 && purity <= 1e-8;

    let field = PulseSpec::sech(3.0, 1.9).with_gdd(32.0).synthesize().unwrap();
    let yield_ = evolve(&field, &qd(), DEFAULT_TOLERANCE).unwrap().photon_yield();
    let counts = photons_per_pulse(&field, &qd(), &JumpOptions::new(10_000, 99)).unwrap();
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let jump_ok = (mean - yield_).abs() <= 3.0 * se;
    outcome(
        invariants && jump_ok,
        format!(
            "{runs} runs: trace error {trace_err:.1e}, min eigenvalue {min_eig:.1e}, closed purity defect {purity:.1e}; \
             jump mean {mean:.4} +- {se:.4} vs master yield {yield_:.4}"
        ),
    )
}

fn c10_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_qdrap");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"scan": {"areas_pi": {"start": 0.5, "stop": 3.0, "points": 6}, "gdds_ps2": [-32, 32]},
            "hbt": {"n_pulses": 200000}, "hom": {"n_periods": 200000},
            "source": {"jump_trajectories": 2000}}"#,
    )
    .unwrap();
    let mut differing = Vec::new();
    let mut compared = 0;
    for cmd in ["rap", "map", "hbt", "hom", "spectrum", "dressed"] {
        for format in ["csv", "json"] {
            let a = tmp.path().join(format!("{cmd}-{format}-a"));
            let b = tmp.path().join(format!("{cmd}-{format}-b"));
            for dir in [&a, &b] {
                let status = Command::new(bin)
                    .args([cmd, "--paper-defaults", "--seed", "7", "--format", format, "--config"])
                    .arg(&cfg)
                    .arg("--out")
                    .arg(dir)
                    .output()
                    .unwrap();
                if !status.status.success() {
                    return outcome(false, format!("`{cmd}` failed: {}", String::from_utf8_lossy(&status.stderr)));
                }
            }
            compared += compare_dirs(&a, &b, &mut differing);
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!("{compared} artifacts compared, {} differ {:?}", differing.len(), differing),
    )
}

fn compare_dirs(a: &Path, b: &Path, differing: &mut Vec<String>) -> usize {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in &names {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap_or_default();
        if x != y {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    names.len()
}
